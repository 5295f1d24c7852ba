//! Named, runtime-selected strategies for equilibrium costs and transport feasibility.

use crate::applications::{solve_csp, CspOutcome, CspTriple};
use crate::game::Game;
use crate::oracles::{flow_feasibility_oracle, potential_min_oracle, FlowVerdict, OracleConfig};
use crate::solver::{compute_heights, SolverOptions};
use crate::tol::Tol;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown {kind} '{name}'; known: {}", known.join(", "))]
    Unknown { kind: &'static str, name: String, known: Vec<String> },
    #[error("{0}")]
    Failed(String),
}

/// Equilibrium cost vector of a plain game.
pub trait CostSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn equilibrium_costs(&self, game: &Game, opts: &SolverOptions) -> Result<Vec<f64>, RegistryError>;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Feasible(Vec<Vec<f64>>),
    /// Infeasible, with the backend's explanation when it has one.
    Infeasible(Option<String>),
}

/// Decides a triple, returning a witness matrix when feasible.
pub trait FeasibilityBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, triple: &CspTriple, tol: Tol) -> Result<Verdict, RegistryError>;
}

pub struct Hydraulic;

impl CostSolver for Hydraulic {
    fn name(&self) -> &'static str {
        "hydraulic"
    }

    fn equilibrium_costs(&self, game: &Game, opts: &SolverOptions) -> Result<Vec<f64>, RegistryError> {
        compute_heights(game, opts).map(|r| r.heights).map_err(|e| RegistryError::Failed(e.to_string()))
    }
}

pub struct PotentialDescent(pub OracleConfig);

impl CostSolver for PotentialDescent {
    fn name(&self) -> &'static str {
        "potential-descent"
    }

    fn equilibrium_costs(&self, game: &Game, _opts: &SolverOptions) -> Result<Vec<f64>, RegistryError> {
        potential_min_oracle(game, &self.0).map(|(_, c)| c).map_err(|e| RegistryError::Failed(e.to_string()))
    }
}

pub struct SequentialPistons;

impl FeasibilityBackend for SequentialPistons {
    fn name(&self) -> &'static str {
        "sequential-pistons"
    }

    fn solve(&self, triple: &CspTriple, tol: Tol) -> Result<Verdict, RegistryError> {
        match solve_csp(triple, tol).map_err(|e| RegistryError::Failed(e.to_string()))? {
            CspOutcome::Solution(q) => Ok(Verdict::Feasible(q)),
            CspOutcome::Infeasible(stuck) => Ok(Verdict::Infeasible(Some(stuck.to_string()))),
        }
    }
}

pub struct MaxFlow(pub OracleConfig);

impl FeasibilityBackend for MaxFlow {
    fn name(&self) -> &'static str {
        "max-flow"
    }

    fn solve(&self, triple: &CspTriple, _tol: Tol) -> Result<Verdict, RegistryError> {
        match flow_feasibility_oracle(&triple.rows, &triple.columns, &triple.cells, &self.0)
            .map_err(|e| RegistryError::Failed(e.to_string()))?
        {
            FlowVerdict::Feasible(q) => Ok(Verdict::Feasible(q)),
            FlowVerdict::Infeasible => Ok(Verdict::Infeasible(None)),
        }
    }
}

pub struct SolverRegistry {
    cost: BTreeMap<&'static str, Box<dyn CostSolver>>,
    feasibility: BTreeMap<&'static str, Box<dyn FeasibilityBackend>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry { cost: BTreeMap::new(), feasibility: BTreeMap::new() }
    }

    /// Hydraulic and potential-descent cost solvers; sequential-pistons and max-flow backends.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register_cost(Box::new(Hydraulic));
        r.register_cost(Box::new(PotentialDescent(OracleConfig::default())));
        r.register_feasibility(Box::new(SequentialPistons));
        r.register_feasibility(Box::new(MaxFlow(OracleConfig::default())));
        r
    }

    pub fn register_cost(&mut self, s: Box<dyn CostSolver>) {
        self.cost.insert(s.name(), s);
    }

    pub fn register_feasibility(&mut self, b: Box<dyn FeasibilityBackend>) {
        self.feasibility.insert(b.name(), b);
    }

    pub fn cost_solver(&self, name: &str) -> Result<&dyn CostSolver, RegistryError> {
        self.cost.get(name).map(|b| b.as_ref()).ok_or_else(|| RegistryError::Unknown {
            kind: "cost solver",
            name: name.into(),
            known: self.cost.keys().map(|k| k.to_string()).collect(),
        })
    }

    pub fn feasibility_backend(&self, name: &str) -> Result<&dyn FeasibilityBackend, RegistryError> {
        self.feasibility.get(name).map(|b| b.as_ref()).ok_or_else(|| RegistryError::Unknown {
            kind: "feasibility backend",
            name: name.into(),
            known: self.feasibility.keys().map(|k| k.to_string()).collect(),
        })
    }

    pub fn cost_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.cost.keys().copied()
    }

    pub fn feasibility_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.feasibility.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{MonotonePL, ResourceSet};

    #[test]
    fn strategies_agree_on_a_small_game() {
        let reg = SolverRegistry::standard();
        let g = Game::new(
            vec![MonotonePL::identity(), MonotonePL::affine(0.5, 2.0)],
            [(ResourceSet::full(2), 3.0)],
        )
        .unwrap();
        let opts = SolverOptions::default();
        let a = reg.cost_solver("hydraulic").unwrap().equilibrium_costs(&g, &opts).unwrap();
        let b = reg.cost_solver("potential-descent").unwrap().equilibrium_costs(&g, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn backends_agree_on_confined_rows() {
        let reg = SolverRegistry::standard();
        let t = CspTriple::new(
            vec![(1.0, 1.0), (1.0, 1.0)],
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![vec![(0.0, 1.0), (0.0, 0.0)], vec![(0.0, 1.0), (0.0, 0.0)]],
        )
        .unwrap();
        for name in reg.feasibility_names() {
            let v = reg.feasibility_backend(name).unwrap().solve(&t, Tol::default()).unwrap();
            assert!(matches!(v, Verdict::Infeasible(_)));
        }
    }

    #[test]
    fn unknown_names_list_the_known_ones() {
        let reg = SolverRegistry::standard();
        match reg.cost_solver("nope") {
            Err(RegistryError::Unknown { known, .. }) => assert_eq!(known, ["hydraulic", "potential-descent"]),
            _ => panic!("expected an unknown-name error"),
        }
    }
}
