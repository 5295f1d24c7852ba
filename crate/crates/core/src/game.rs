//! Nonatomic resource selection games: profiles, loads, costs, Nash checks
//! and the potential.

use crate::monotone_fn::MonotonePL;
use crate::subset::{ResourceSet, MAX_RESOURCES};
use crate::tol::Tol;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one resource")]
    NoResources,
    #[error("{0} resources exceed the representable maximum of {MAX_RESOURCES}")]
    TooManyResources(usize),
    #[error("cost of resource {0} must be defined from 0")]
    CostDomain(usize),
    #[error("type {0} is empty or names a resource outside the game")]
    BadType(ResourceSet),
    #[error("mass of type {0} must be finite and nonnegative")]
    BadMass(ResourceSet),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid profile: {0}")]
pub struct InvalidProfile(pub String);

/// Costs `f_j` and masses `μ^R`; zero masses are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    costs: Vec<MonotonePL>,
    masses: BTreeMap<ResourceSet, f64>,
}

impl Game {
    pub fn new<I>(costs: Vec<MonotonePL>, masses: I) -> Result<Self, GameError>
    where
        I: IntoIterator<Item = (ResourceSet, f64)>,
    {
        let n = costs.len();
        if n == 0 {
            return Err(GameError::NoResources);
        }
        if n > MAX_RESOURCES {
            return Err(GameError::TooManyResources(n));
        }
        if let Some(j) = costs.iter().position(|f| f.domain_start() != 0.0) {
            return Err(GameError::CostDomain(j));
        }
        let full = ResourceSet::full(n);
        let mut map = BTreeMap::new();
        for (r, m) in masses {
            if r.is_empty() || !r.is_subset(full) {
                return Err(GameError::BadType(r));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(GameError::BadMass(r));
            }
            if m > 0.0 {
                *map.entry(r).or_insert(0.0) += m;
            }
        }
        Ok(Game { costs, masses: map })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn all(&self) -> ResourceSet {
        ResourceSet::full(self.n())
    }

    pub fn costs(&self) -> &[MonotonePL] {
        &self.costs
    }

    pub fn cost(&self, j: usize) -> &MonotonePL {
        &self.costs[j]
    }

    /// Types with positive mass.
    pub fn masses(&self) -> &BTreeMap<ResourceSet, f64> {
        &self.masses
    }

    pub fn mass(&self, r: ResourceSet) -> f64 {
        self.masses.get(&r).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Mass of the types confined to `s`.
    pub fn confined_mass(&self, s: ResourceSet) -> f64 {
        self.masses.iter().filter(|(r, _)| r.is_subset(s)).map(|(_, m)| m).sum()
    }

    pub fn with_mass(&self, r: ResourceSet, m: f64) -> Result<Game, GameError> {
        let mut masses = self.masses.clone();
        masses.insert(r, m);
        Game::new(self.costs.clone(), masses)
    }

    pub fn is_continuous(&self) -> bool {
        self.costs.iter().all(|f| f.is_continuous())
    }
}

/// Consumption vectors `s(R)` for the types of a game.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Profile {
    rows: BTreeMap<ResourceSet, Vec<f64>>,
}

impl Profile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, r: ResourceSet, row: Vec<f64>) {
        self.rows.insert(r, row);
    }

    pub fn get(&self, r: ResourceSet) -> Option<&[f64]> {
        self.rows.get(&r).map(|v| v.as_slice())
    }

    pub fn rows(&self) -> &BTreeMap<ResourceSet, Vec<f64>> {
        &self.rows
    }
}

impl FromIterator<(ResourceSet, Vec<f64>)> for Profile {
    fn from_iter<T: IntoIterator<Item = (ResourceSet, Vec<f64>)>>(iter: T) -> Self {
        Profile { rows: iter.into_iter().collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub loads: Vec<f64>,
    pub costs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquilibriumClass {
    NotNash,
    Strong,
    SuperStrong,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub class: EquilibriumClass,
    /// Resources whose cost is a plateau height of their cost function.
    pub plateau_resources: Vec<usize>,
}

fn check_profile(game: &Game, s: &Profile, tol: Tol) -> Result<(), InvalidProfile> {
    let n = game.n();
    for (&r, row) in s.rows() {
        if row.len() != n {
            return Err(InvalidProfile(format!("row for {r} has length {}, expected {n}", row.len())));
        }
        let m = game.mass(r);
        let slack = tol.slack(m, 0.0);
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() || x < -slack {
                return Err(InvalidProfile(format!("type {r} has entry {x} at resource {}", j + 1)));
            }
            if !r.contains(j) && x > slack {
                return Err(InvalidProfile(format!("type {r} consumes from resource {}", j + 1)));
            }
        }
        let total: f64 = row.iter().sum();
        if !tol.eq(total, m) {
            return Err(InvalidProfile(format!("type {r} consumes {total}, its mass is {m}")));
        }
    }
    for (&r, &m) in game.masses() {
        if s.get(r).is_none() && m > 0.0 {
            return Err(InvalidProfile(format!("type {r} with mass {m} has no row")));
        }
    }
    Ok(())
}

pub fn evaluate(game: &Game, s: &Profile, tol: Tol) -> Result<Outcome, InvalidProfile> {
    check_profile(game, s, tol)?;
    let mut loads = vec![0.0; game.n()];
    for row in s.rows().values() {
        for (l, x) in loads.iter_mut().zip(row) {
            *l += x;
        }
    }
    for l in &mut loads {
        *l = l.max(0.0);
    }
    let costs = loads
        .iter()
        .zip(game.costs())
        .map(|(&l, f)| f.eval(l).expect("loads are nonnegative"))
        .collect();
    Ok(Outcome { loads, costs })
}

/// Every resource used by a type is cost-minimal among the type's resources.
pub fn is_nash(game: &Game, s: &Profile, tol: Tol) -> Result<bool, InvalidProfile> {
    let out = evaluate(game, s, tol)?;
    Ok(nash_given_costs(s, &out.costs, tol))
}

pub(crate) fn nash_given_costs(s: &Profile, costs: &[f64], tol: Tol) -> bool {
    s.rows().iter().all(|(&r, row)| {
        let total: f64 = row.iter().sum();
        let cheapest = r.iter().map(|j| costs[j]).fold(f64::INFINITY, f64::min);
        r.iter()
            .filter(|&k| row[k] > tol.slack(total, 0.0))
            .all(|k| tol.le(costs[k], cheapest))
    })
}

pub fn classify_equilibrium(game: &Game, s: &Profile, tol: Tol) -> Result<Classification, InvalidProfile> {
    let out = evaluate(game, s, tol)?;
    if !nash_given_costs(s, &out.costs, tol) {
        return Ok(Classification { class: EquilibriumClass::NotNash, plateau_resources: vec![] });
    }
    let plateau_resources: Vec<usize> = (0..game.n())
        .filter(|&j| game.cost(j).is_plateau_height(out.costs[j], tol))
        .collect();
    let class = if plateau_resources.is_empty() {
        EquilibriumClass::SuperStrong
    } else {
        EquilibriumClass::Strong
    };
    Ok(Classification { class, plateau_resources })
}

/// `Σ_j ∫_0^{l_j} f_j`.
pub fn potential(game: &Game, s: &Profile, tol: Tol) -> Result<f64, InvalidProfile> {
    let out = evaluate(game, s, tol)?;
    Ok(out.loads.iter().zip(game.costs()).map(|(&l, f)| f.integral(l)).sum())
}
