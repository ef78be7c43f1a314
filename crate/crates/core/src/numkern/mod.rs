//! Shared numeric kernel: special functions in log space, packed symmetric
//! matrices with eigen/Cholesky routines, and a box-constrained maximizer.
//! Everything here is a pure function of its inputs.

mod bessel;
mod gamma;
mod mat;
mod optim;

pub use bessel::{bessel_i_ratio, log_bessel_i, scaled_bessel_term};
pub use gamma::log_gamma;
pub use mat::{duplication, mat_vec, sym_eig, unvech, vec_to_array, vech, SymMat};
pub use optim::{maximize, OptResult, OptimizerSpec};
