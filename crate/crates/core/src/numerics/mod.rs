//! Special functions and least-squares primitives used by every other
//! module. All operations are pure functions; call them from any thread.

mod linalg;
mod special;

pub use linalg::{
    dot, least_squares, norm2, project_onto_rows, residual, ridge_solve, LeastSquaresFit,
    RANK_TOL,
};
pub use special::{
    chi2_1_cdf, chi2_1_inv_cdf, clamp_probability, erfc, noncentral_chi2_1_cdf, std_normal_cdf,
    std_normal_inv_cdf, PROB_CLAMP,
};
