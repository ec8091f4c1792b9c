//! Relaxation approximations of one-dimensional hyperbolic balance laws.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod hypotheses;
pub mod linalg;
pub mod numdiff;
pub mod output;
pub mod sampling;
pub mod scalar;
pub mod solver;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instances of the generic types.
pub mod f64 {
    pub type Matrix = crate::linalg::Matrix<f64>;
    pub type SystemDefinition = crate::systems::SystemDefinition<f64>;
    pub type StructuralConstants = crate::systems::StructuralConstants<f64>;
    pub type WorkingBox = crate::sampling::WorkingBox<f64>;
    pub type Grid = crate::solver::Grid<f64>;
    pub type Profile = crate::solver::Profile<f64>;
    pub type SolverConfig = crate::solver::SolverConfig<f64>;
    pub type RelaxationField = crate::solver::RelaxationField<f64>;
    pub type SolutionTrace = crate::solver::SolutionTrace<f64>;
    pub type RelaxationSolver<'a> = crate::solver::RelaxationSolver<'a, f64>;
    pub type EquilibriumTrace = crate::equilibrium::EquilibriumTrace<f64>;
    pub type BalanceLawConfig = crate::equilibrium::BalanceLawConfig<f64>;
    pub type TravellingWave = crate::equilibrium::TravellingWave<f64>;
    pub type FunctionalContext<'a> = crate::functionals::FunctionalContext<'a, f64>;
    pub type FunctionalRow = crate::functionals::FunctionalRow<f64>;
    pub type HypothesisReport = crate::hypotheses::HypothesisReport<f64>;
    pub type CheckOptions = crate::hypotheses::CheckOptions<f64>;
    pub type CheckSuite = crate::hypotheses::CheckSuite<f64>;
}
