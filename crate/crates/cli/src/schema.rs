//! Instance files: JSON documents tagged with a `schema` version.
//!
//! Resources are 1-indexed in files. Transport upper bounds may be `null` for +∞.

use serde::{Deserialize, Serialize};
use vessel::applications::{CspTriple, MarriageInstance};
use vessel::id_weighted::WeightedProfile;
use vessel::{DistributionConstraint, Game, MonotonePL, Profile, ResourceSet, WeightedGame};

pub const SCHEMA: &str = "vessel/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_game: Option<WeightedGameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marriage: Option<MarriageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csp: Option<CspSpec>,
    /// Consumption rows for `verify` and `potential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ConsumptionSpec>>,
    /// Per-type fraction rows for `idverify`, in type order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_profile: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<Settings>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub breakpoints: Vec<(f64, f64)>,
    pub final_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSpec {
    pub resources: Vec<usize>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub costs: Vec<CostSpec>,
    pub masses: Vec<MassSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTypeSpec {
    pub resources: Vec<usize>,
    /// One weight per listed resource, in the same order.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedGameSpec {
    pub costs: Vec<CostSpec>,
    pub types: Vec<WeightedTypeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub masses: Vec<MassSpec>,
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarriageSpec {
    pub n: usize,
    pub acceptable: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CspSpec {
    pub rows: Vec<(f64, Option<f64>)>,
    pub columns: Vec<(f64, Option<f64>)>,
    pub cells: Vec<Vec<(f64, Option<f64>)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumptionSpec {
    pub resources: Vec<usize>,
    pub consumption: Vec<f64>,
}

/// Which problem an instance file carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Game,
    WeightedGame,
    Distribution,
    Marriage,
    Csp,
}

impl Kind {
    pub fn key(self) -> &'static str {
        match self {
            Kind::Game => "game",
            Kind::WeightedGame => "weighted_game",
            Kind::Distribution => "distribution",
            Kind::Marriage => "marriage",
            Kind::Csp => "csp",
        }
    }
}

pub fn parse(text: &str) -> Result<InstanceFile, String> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| format!("invalid instance file: {e}"))?;
    if file.schema != SCHEMA {
        return Err(format!("unsupported schema '{}', expected '{SCHEMA}'", file.schema));
    }
    file.kind()?;
    Ok(file)
}

impl InstanceFile {
    pub fn kind(&self) -> Result<Kind, String> {
        let present: Vec<Kind> = [
            (self.game.is_some(), Kind::Game),
            (self.weighted_game.is_some(), Kind::WeightedGame),
            (self.distribution.is_some(), Kind::Distribution),
            (self.marriage.is_some(), Kind::Marriage),
            (self.csp.is_some(), Kind::Csp),
        ]
        .into_iter()
        .filter_map(|(p, k)| p.then_some(k))
        .collect();
        match present.as_slice() {
            [k] => Ok(*k),
            [] => Err("instance file holds no problem; expected one of game, weighted_game, distribution, marriage, csp".into()),
            _ => Err(format!(
                "instance file holds several problems: {}",
                present.iter().map(|k| k.key()).collect::<Vec<_>>().join(", ")
            )),
        }
    }

    pub fn settings(&self) -> Settings {
        self.settings.clone().unwrap_or_default()
    }
}

fn upper(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::INFINITY)
}

/// 1-indexed resource list to a set, checking the range.
pub fn resource_set(ix: &[usize], n: usize) -> Result<ResourceSet, String> {
    if ix.is_empty() {
        return Err("empty resource list".into());
    }
    if let Some(&j) = ix.iter().find(|&&j| j == 0 || j > n) {
        return Err(format!("resource {j} is outside 1..={n}"));
    }
    Ok(ResourceSet::from_indices(ix.iter().map(|j| j - 1)))
}

fn costs(specs: &[CostSpec]) -> Result<Vec<MonotonePL>, String> {
    specs
        .iter()
        .enumerate()
        .map(|(j, c)| MonotonePL::new(c.breakpoints.clone(), c.final_slope).map_err(|e| format!("cost {}: {e}", j + 1)))
        .collect()
}

fn masses(specs: &[MassSpec], n: usize) -> Result<Vec<(ResourceSet, f64)>, String> {
    specs.iter().map(|m| Ok((resource_set(&m.resources, n)?, m.mass))).collect()
}

impl GameSpec {
    pub fn build(&self) -> Result<Game, String> {
        let costs = costs(&self.costs)?;
        let n = costs.len();
        Game::new(costs, masses(&self.masses, n)?).map_err(|e| e.to_string())
    }
}

impl WeightedGameSpec {
    pub fn build(&self) -> Result<WeightedGame, String> {
        let costs = costs(&self.costs)?;
        let n = costs.len();
        let mut types = Vec::with_capacity(self.types.len());
        for (i, t) in self.types.iter().enumerate() {
            let r = resource_set(&t.resources, n).map_err(|e| format!("type {}: {e}", i + 1))?;
            if t.weights.len() != t.resources.len() || r.len() != t.resources.len() {
                return Err(format!("type {}: need one weight per distinct resource", i + 1));
            }
            let mut w = vec![0.0; n];
            for (&j, &x) in t.resources.iter().zip(&t.weights) {
                w[j - 1] = x;
            }
            types.push((r, w));
        }
        WeightedGame::new(costs, types).map_err(|e| e.to_string())
    }
}

impl DistributionSpec {
    pub fn build(&self) -> Result<DistributionConstraint, String> {
        let n = self.intervals.len();
        DistributionConstraint::new(masses(&self.masses, n)?, self.intervals.clone()).map_err(|e| e.to_string())
    }
}

impl MarriageSpec {
    pub fn build(&self) -> Result<MarriageInstance, String> {
        let acceptable = self
            .acceptable
            .iter()
            .enumerate()
            .map(|(i, r)| resource_set(r, self.n).map_err(|e| format!("woman {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        MarriageInstance::new(self.n, acceptable).map_err(|e| e.to_string())
    }
}

impl CspSpec {
    pub fn build(&self) -> Result<CspTriple, String> {
        let conv = |v: &[(f64, Option<f64>)]| v.iter().map(|&(lo, hi)| (lo, upper(hi))).collect::<Vec<_>>();
        CspTriple::new(conv(&self.rows), conv(&self.columns), self.cells.iter().map(|r| conv(r)).collect())
            .map_err(|e| e.to_string())
    }
}

pub fn profile(rows: &[ConsumptionSpec], n: usize) -> Result<Profile, String> {
    let mut p = Profile::new();
    for (k, row) in rows.iter().enumerate() {
        let r = resource_set(&row.resources, n).map_err(|e| format!("profile row {}: {e}", k + 1))?;
        if row.consumption.len() != n {
            return Err(format!("profile row {}: consumption needs {n} entries", k + 1));
        }
        if p.get(r).is_some() {
            return Err(format!("profile row {}: duplicate type", k + 1));
        }
        p.insert(r, row.consumption.clone());
    }
    Ok(p)
}

pub fn weighted_profile(rows: &[Vec<f64>]) -> WeightedProfile {
    WeightedProfile { fractions: rows.to_vec() }
}
