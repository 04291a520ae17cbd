//! Dense and sparse `f64` matrices with tape-based reverse-mode
//! differentiation, seeded Gaussian sampling, finite-difference gradient
//! verification and the Adam update.
//!
//! Everything here is single-threaded and evaluates reductions in a fixed
//! order, so equal inputs give bitwise-equal results.

mod adam;
mod gradcheck;
mod params;
mod rng;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{
    comparison_floor, finite_diff_check, finite_diff_check_with, relative_error, relative_error_with_floor,
    GradCheckReport, ParamCheck, RELATIVE_ERROR_FLOOR, ROUNDOFF_FACTOR,
};
pub use params::{Gradients, ParamVars, ParameterStore};
pub use rng::{sample_standard_normal, RngState};
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
