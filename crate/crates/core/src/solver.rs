//! Equilibrium costs by repeated removal of the highest-costing resources.
//!
//! For a nonempty set `S`, `E_G(S)` equalizes the costs of `S` at the mass of
//! the types confined to `S`. A proper subset `S'` of `S` is problematic when
//! the types able to reach it cannot lift it to `E_G(S)`. The highest cost
//! `h_G` is the largest `E_G(S)` over sets without problematic subsets, and
//! `P_G` is the union of the sets attaining it. Removing `P_G` and repeating
//! yields every resource's equilibrium cost.

use crate::distribution::{DistributionConstraint, DistributionError};
use crate::equalization;
use crate::game::{self, Game, GameError, Profile};
use crate::monotone_fn::MonotonePL;
use crate::subset::ResourceSet;
use crate::tol::Tol;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default cap on the resource count for subset enumeration.
pub const DEFAULT_MAX_N: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{n} resources exceed the enumeration cap of {max}; raise it explicitly to proceed")]
    TooManyResources { n: usize, max: usize },
    #[error("cost of resource {} has a jump", .0 + 1)]
    DiscontinuousCost(usize),
    #[error("E_G({0}) is undefined")]
    UndefinedE(ResourceSet),
    #[error("the set is empty or outside the game")]
    BadSet(ResourceSet),
    #[error("removing every resource leaves no game")]
    AllResourcesRemoved,
    #[error("no set without problematic subsets has a defined E_G value")]
    NoHighestSet,
    #[error("mass grid must be sorted ascending")]
    UnsortedGrid,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("constructed profile failed verification: {0}")]
    Verification(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: Tol,
    pub max_n: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: Tol::default(), max_n: DEFAULT_MAX_N }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingStep {
    pub resources: ResourceSet,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub heights: Vec<f64>,
    pub stopping_order: Vec<StoppingStep>,
    pub equilibrium: Option<Profile>,
}

/// `m(S)` for every bitmask `S` of a game.
fn confined_table(game: &Game) -> Vec<f64> {
    let n = game.n();
    let mut t = vec![0.0; 1 << n];
    for (r, &m) in game.masses() {
        t[r.bits() as usize] += m;
    }
    for b in 0..n {
        for s in 0..t.len() {
            if s >> b & 1 == 1 {
                t[s] += t[s ^ (1 << b)];
            }
        }
    }
    t
}

fn check_set(game: &Game, s: ResourceSet) -> Result<(), SolverError> {
    if s.is_empty() || !s.is_subset(game.all()) {
        return Err(SolverError::BadSet(s));
    }
    Ok(())
}

fn e_with(game: &Game, s: ResourceSet, confined: f64, tol: Tol) -> Option<f64> {
    let fs: Vec<&MonotonePL> = s.iter().map(|j| game.cost(j)).collect();
    equalization::height(&fs, confined, tol)
}

/// `E_G(S)`.
pub fn e_value(game: &Game, s: ResourceSet, tol: Tol) -> Result<Option<f64>, SolverError> {
    check_set(game, s)?;
    Ok(e_with(game, s, game.confined_mass(s), tol))
}

/// Per-member lower inverse at `h0`, `None` where `h0` is not attained.
fn lower_inverses(game: &Game, s: ResourceSet, h0: f64, tol: Tol) -> Vec<Option<f64>> {
    (0..game.n())
        .map(|k| if s.contains(k) { game.cost(k).inverse_interval(h0, tol).map(|iv| iv.lo) } else { None })
        .collect()
}

fn is_problematic(sub: ResourceSet, s: ResourceSet, lows: &[Option<f64>], confined: &[f64], tol: Tol) -> bool {
    let budget = confined[s.bits() as usize] - confined[s.difference(sub).bits() as usize];
    let mut need = 0.0;
    for k in sub.iter() {
        match lows[k] {
            Some(lo) => need += lo,
            None => return true,
        }
    }
    !tol.le(need, budget)
}

/// `M_G(S)`: the problematic proper subsets of `S`.
pub fn problematic_subsets(game: &Game, s: ResourceSet, tol: Tol) -> Result<Vec<ResourceSet>, SolverError> {
    check_set(game, s)?;
    let confined = confined_table(game);
    let h0 = e_with(game, s, confined[s.bits() as usize], tol).ok_or(SolverError::UndefinedE(s))?;
    let lows = lower_inverses(game, s, h0, tol);
    Ok(s.proper_subsets().filter(|&sub| is_problematic(sub, s, &lows, &confined, tol)).collect())
}

fn has_problematic(game: &Game, s: ResourceSet, h0: f64, confined: &[f64], tol: Tol) -> bool {
    let lows = lower_inverses(game, s, h0, tol);
    s.proper_subsets().any(|sub| is_problematic(sub, s, &lows, confined, tol))
}

/// `(P_G, h_G)`.
pub fn highest_set(game: &Game, tol: Tol) -> Result<(ResourceSet, f64), SolverError> {
    let confined = confined_table(game);
    let mut values: Vec<(ResourceSet, f64)> = game
        .all()
        .subsets()
        .filter_map(|s| e_with(game, s, confined[s.bits() as usize], tol).map(|h| (s, h)))
        .collect();
    values.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut start = 0;
    while start < values.len() {
        let head = values[start].1;
        let end = start + values[start..].iter().take_while(|(_, h)| tol.eq(*h, head)).count();
        let mut union = ResourceSet::EMPTY;
        for &(s, h) in &values[start..end] {
            if !has_problematic(game, s, h, &confined, tol) {
                union = union.union(s);
            }
        }
        if !union.is_empty() {
            return Ok((union, head));
        }
        start = end;
    }
    Err(SolverError::NoHighestSet)
}

/// `G − S`, with the original indices of the surviving resources.
pub fn remove_resources(game: &Game, s: ResourceSet) -> Result<(Game, Vec<usize>), SolverError> {
    if !s.is_subset(game.all()) {
        return Err(SolverError::BadSet(s));
    }
    let keep = game.all().difference(s);
    if keep.is_empty() {
        return Err(SolverError::AllResourcesRemoved);
    }
    let costs = keep.iter().map(|j| game.cost(j).clone()).collect();
    let masses = game
        .masses()
        .iter()
        .map(|(r, &m)| (r.difference(s).compress(keep), m))
        .filter(|(r, _)| !r.is_empty());
    Ok((Game::new(costs, masses)?, keep.iter().collect()))
}

fn check_size(game: &Game, opts: &SolverOptions) -> Result<(), SolverError> {
    if game.n() > opts.max_n {
        return Err(SolverError::TooManyResources { n: game.n(), max: opts.max_n });
    }
    Ok(())
}

/// Equilibrium costs of every resource and the order in which they stop.
pub fn compute_heights(game: &Game, opts: &SolverOptions) -> Result<SolverReport, SolverError> {
    check_size(game, opts)?;
    let n = game.n();
    let mut heights = vec![f64::NAN; n];
    let mut order = Vec::new();
    let mut removed = ResourceSet::EMPTY;
    while removed != game.all() {
        let (sub, survivors) = remove_resources(game, removed)?;
        let (p, h) = highest_set(&sub, opts.tol)?;
        let mut original = ResourceSet::EMPTY;
        for local in p.iter() {
            heights[survivors[local]] = h;
            original = original.union(ResourceSet::singleton(survivors[local]));
        }
        order.push(StoppingStep { resources: original, height: h });
        removed = removed.union(original);
    }
    Ok(SolverReport { heights, stopping_order: order, equilibrium: None })
}

/// A Nash equilibrium together with its costs. Costs must be continuous.
pub fn construct_equilibrium(game: &Game, opts: &SolverOptions) -> Result<SolverReport, SolverError> {
    check_size(game, opts)?;
    if let Some(j) = game.costs().iter().position(|f| !f.is_continuous()) {
        return Err(SolverError::DiscontinuousCost(j));
    }
    let mut order = Vec::new();
    let profile = construct_level(game, opts.tol, &mut order, &(0..game.n()).collect::<Vec<_>>())?;
    let mut heights = vec![f64::NAN; game.n()];
    for step in &order {
        for j in step.resources.iter() {
            heights[j] = step.height;
        }
    }
    let out = game::evaluate(game, &profile, opts.tol).map_err(|e| SolverError::Verification(e.0))?;
    for j in 0..game.n() {
        if !opts.tol.eq(out.costs[j], heights[j]) {
            return Err(SolverError::Verification(format!(
                "resource {} costs {} instead of {}",
                j + 1,
                out.costs[j],
                heights[j]
            )));
        }
    }
    if !game::nash_given_costs(&profile, &out.costs, opts.tol) {
        return Err(SolverError::Verification("profile is not a Nash equilibrium".into()));
    }
    Ok(SolverReport { heights, stopping_order: order, equilibrium: Some(profile) })
}

/// Profile of `game` over its own indices; `names` maps them to the caller's indices.
fn construct_level(
    game: &Game,
    tol: Tol,
    order: &mut Vec<StoppingStep>,
    names: &[usize],
) -> Result<Profile, SolverError> {
    let n = game.n();
    let (p, h) = highest_set(game, tol)?;
    order.push(StoppingStep { resources: ResourceSet::from_indices(p.iter().map(|j| names[j])), height: h });

    let total = game.total_mass();
    let mut intervals = Vec::with_capacity(p.len());
    for j in p.iter() {
        let iv = game.cost(j).inverse_interval(h, tol).ok_or(SolverError::NoHighestSet)?;
        let hi = if iv.hi.is_finite() { iv.hi } else { total.max(iv.lo) };
        intervals.push((iv.lo, hi));
    }
    let inside: Vec<(ResourceSet, f64)> = game
        .masses()
        .iter()
        .filter(|(r, _)| r.is_subset(p))
        .map(|(r, &m)| (r.compress(p), m))
        .collect();
    let witness = DistributionConstraint::new(inside, intervals)?.satisfy(tol)?;

    let mut profile = Profile::new();
    for (local, row) in witness {
        let mut full = vec![0.0; n];
        for (k, j) in p.iter().enumerate() {
            full[j] = row[k];
        }
        profile.insert(local.expand(p), full);
    }
    if p == game.all() {
        return Ok(profile);
    }

    let (sub, survivors) = remove_resources(game, p)?;
    let sub_names: Vec<usize> = survivors.iter().map(|&j| names[j]).collect();
    let sub_profile = construct_level(&sub, tol, order, &sub_names)?;
    let keep = ResourceSet::from_indices(survivors.iter().copied());
    let mut merged_mass: BTreeMap<ResourceSet, f64> = BTreeMap::new();
    for (r, &m) in game.masses() {
        if !r.is_subset(p) {
            *merged_mass.entry(r.difference(p).compress(keep)).or_insert(0.0) += m;
        }
    }
    for (&r, &m) in game.masses() {
        if r.is_subset(p) {
            continue;
        }
        let local = r.difference(p).compress(keep);
        let share = m / merged_mass[&local];
        let sub_row = sub_profile.get(local).expect("merged type has a row");
        let mut full = vec![0.0; n];
        for (k, &j) in survivors.iter().enumerate() {
            full[j] = share * sub_row[k];
        }
        profile.insert(r, full);
    }
    Ok(profile)
}

/// Equilibrium costs as the mass of type `r` sweeps `grid`.
pub fn sensitivity(
    game: &Game,
    r: ResourceSet,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<(f64, Vec<f64>)>, SolverError> {
    check_set(game, r)?;
    if let Some(j) = game.costs().iter().position(|f| !f.is_continuous()) {
        return Err(SolverError::DiscontinuousCost(j));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(SolverError::UnsortedGrid);
    }
    grid.iter()
        .map(|&m| {
            let g = game.with_mass(r, m)?;
            Ok((m, compute_heights(&g, opts)?.heights))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ix: &[usize]) -> ResourceSet {
        ResourceSet::from_indices(ix.iter().map(|j| j - 1))
    }

    fn need_mg() -> Game {
        Game::new(
            vec![MonotonePL::identity(), MonotonePL::capped_identity(2.0)],
            [(set(&[1]), 1.0), (set(&[2]), 3.0)],
        )
        .unwrap()
    }

    fn not_enough_info() -> Game {
        Game::new(
            vec![MonotonePL::identity(), MonotonePL::identity()],
            [(set(&[2]), 1.0), (set(&[1, 2]), 1.0)],
        )
        .unwrap()
    }

    fn no_max() -> Game {
        Game::new(
            vec![MonotonePL::identity(), MonotonePL::identity(), MonotonePL::capped_identity(2.0)],
            [(set(&[1]), 1.0), (set(&[2]), 1.0), (set(&[3]), 3.0)],
        )
        .unwrap()
    }

    fn not_super_strong() -> Game {
        Game::new(
            vec![MonotonePL::identity(), MonotonePL::capped_identity(3.0)],
            [(set(&[1]), 1.0), (set(&[2]), 2.0), (set(&[1, 2]), 3.0)],
        )
        .unwrap()
    }

    #[test]
    fn e_values() {
        let t = Tol::default();
        assert_eq!(e_value(&need_mg(), set(&[2]), t), Ok(Some(2.0)));
        assert_eq!(e_value(&need_mg(), set(&[1, 2]), t), Ok(Some(2.0)));
        assert_eq!(e_value(&not_enough_info(), set(&[1]), t), Ok(Some(0.0)));
        assert!(e_value(&need_mg(), ResourceSet::EMPTY, t).is_err());
    }

    #[test]
    fn problematic_examples() {
        let t = Tol::default();
        assert_eq!(problematic_subsets(&need_mg(), set(&[1, 2]), t), Ok(vec![set(&[1])]));
        assert_eq!(problematic_subsets(&need_mg(), set(&[1]), t), Ok(vec![]));
        let g = Game::new(vec![MonotonePL::identity(), MonotonePL::identity()], [(set(&[1, 2]), 4.0)]).unwrap();
        assert_eq!(problematic_subsets(&g, set(&[1, 2]), t), Ok(vec![]));
    }

    #[test]
    fn highest_set_examples() {
        let t = Tol::default();
        assert_eq!(highest_set(&need_mg(), t), Ok((set(&[2]), 2.0)));
        assert_eq!(highest_set(&not_enough_info(), t), Ok((set(&[1, 2]), 1.0)));
        assert_eq!(highest_set(&no_max(), t), Ok((set(&[3]), 2.0)));
    }

    #[test]
    fn removal() {
        let g = need_mg();
        let (same, names) = remove_resources(&g, ResourceSet::EMPTY).unwrap();
        assert_eq!(same, g);
        assert_eq!(names, vec![0, 1]);
        let g = Game::new(
            vec![MonotonePL::identity(), MonotonePL::capped_identity(2.0)],
            [(set(&[1]), 0.5), (set(&[1, 2]), 0.5), (set(&[2]), 3.0)],
        )
        .unwrap();
        let (sub, names) = remove_resources(&g, set(&[2])).unwrap();
        assert_eq!(names, vec![0]);
        assert_eq!(sub.mass(set(&[1])), 1.0);
        assert_eq!(remove_resources(&g, set(&[1, 2])), Err(SolverError::AllResourcesRemoved));
    }

    #[test]
    fn heights_examples() {
        let o = SolverOptions::default();
        let r = compute_heights(&need_mg(), &o).unwrap();
        assert_eq!(r.heights, vec![1.0, 2.0]);
        assert_eq!(
            r.stopping_order,
            vec![
                StoppingStep { resources: set(&[2]), height: 2.0 },
                StoppingStep { resources: set(&[1]), height: 1.0 }
            ]
        );
        let r = compute_heights(&not_super_strong(), &o).unwrap();
        assert_eq!(r.heights, vec![3.0, 3.0]);
        assert_eq!(r.stopping_order.len(), 1);
        assert_eq!(compute_heights(&not_enough_info(), &o).unwrap().heights, vec![1.0, 1.0]);
    }

    #[test]
    fn construction_examples() {
        let o = SolverOptions::default();
        let r = construct_equilibrium(&need_mg(), &o).unwrap();
        let s = r.equilibrium.unwrap();
        assert_eq!(s.get(set(&[1])), Some(&[1.0, 0.0][..]));
        assert_eq!(s.get(set(&[2])), Some(&[0.0, 3.0][..]));

        let r = construct_equilibrium(&not_super_strong(), &o).unwrap();
        assert_eq!(r.heights, vec![3.0, 3.0]);

        let no_equilibrium = Game::new(
            vec![
                MonotonePL::identity(),
                MonotonePL::new(vec![(0.0, 0.0), (2.0, 2.0), (2.0, 2.0), (2.0, 3.0)], 1.0).unwrap(),
            ],
            [(set(&[1, 2]), 5.0)],
        )
        .unwrap();
        assert_eq!(construct_equilibrium(&no_equilibrium, &o), Err(SolverError::DiscontinuousCost(1)));
    }

    #[test]
    fn construction_lifts_merged_types() {
        let o = SolverOptions::default();
        let g = Game::new(
            vec![MonotonePL::identity(), MonotonePL::identity(), MonotonePL::affine(0.0, 0.25)],
            [(set(&[1]), 2.0), (set(&[1, 3]), 1.0), (set(&[2, 3]), 1.0), (set(&[3]), 0.5)],
        )
        .unwrap();
        let r = construct_equilibrium(&g, &o).unwrap();
        assert!(game::is_nash(&g, r.equilibrium.as_ref().unwrap(), o.tol).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        let o = SolverOptions { max_n: 1, ..Default::default() };
        assert_eq!(compute_heights(&need_mg(), &o), Err(SolverError::TooManyResources { n: 2, max: 1 }));
    }

    #[test]
    fn sensitivity_examples() {
        let o = SolverOptions::default();
        let rows = sensitivity(&need_mg(), set(&[1]), &[1.0, 2.0], &o).unwrap();
        assert_eq!(rows[0].1[0], 1.0);
        assert_eq!(rows[1].1[0], 2.0);
        let rows = sensitivity(&need_mg(), set(&[1]), &[1.5, 1.5], &o).unwrap();
        assert_eq!(rows[0].1, rows[1].1);
        assert_eq!(sensitivity(&need_mg(), set(&[1]), &[2.0, 1.0], &o), Err(SolverError::UnsortedGrid));
    }
}
