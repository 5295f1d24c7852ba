//! Equilibrium costs and strong equilibria of nonatomic resource selection games.
//!
//! Costs are nondecreasing piecewise-linear functions ([`MonotonePL`]). The solver
//! finds the highest-costing resources by communicating-vessel equalization,
//! removes them and repeats; explicit equilibria are synthesised level by level
//! through distribution constraints.

pub mod applications;
pub mod distribution;
pub mod equalization;
pub mod game;
pub mod id_weighted;
pub mod monotone_fn;
pub mod oracles;
pub mod registry;
pub mod solver;
pub mod subset;
pub mod tol;

pub use distribution::DistributionConstraint;
pub use equalization::{equalize_at, equalize_fn, EqualizeResult};
pub use game::{EquilibriumClass, Game, Profile};
pub use id_weighted::{WeightedGame, WeightedProfile};
pub use monotone_fn::{MonotonePL, ValueInterval};
pub use solver::{SolverOptions, SolverReport};
pub use subset::ResourceSet;
pub use tol::Tol;
