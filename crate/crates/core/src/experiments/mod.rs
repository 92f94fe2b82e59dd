//! Scenario-level checks built on the solver.

pub mod admissibility;
pub mod decay;
pub mod self_similar;
pub mod stability;
