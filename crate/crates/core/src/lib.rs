//! Pseudospectral solver for the mild formulation of a doubly chemotactic
//! Navier-Stokes system in critical Morrey-type spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod duhamel;
pub mod error;
pub mod experiments;
pub mod norms;
pub mod profiles;
pub mod solver;
pub mod spectral;

pub use duhamel::{
    beta_function, bilinear_b, bilinear_constant_bound, duhamel_integral, linear_constant_bound,
    linear_l, BilinearTag, ConstantTag, ConstantsTable, ForceField, Kernel, LinearTag,
    QuadratureRule, TimeGrid,
};
pub use error::{Error, Result};
pub use experiments::admissibility::{check_admissible, suggest_subindices, Admissibility, Case, ExponentSet};
pub use norms::{
    besov_morrey_norm_heat, besov_morrey_norm_lp, data_norm_i, morrey_norm, x_space_norms,
    BallSampling, LittlewoodPaleyBank, MorreyIndex, XNormsRecord,
};
pub use solver::{
    caloric_extension, picard_map, picard_solve, smallness_check, InitialData, IterationTrace,
    SolverConfig, StateTuple,
};
pub use spectral::{
    damped_heat_apply, heat_apply, heat_grad_apply, leray_project, rescale_field, Grid,
    SpectralField, VectorField,
};
