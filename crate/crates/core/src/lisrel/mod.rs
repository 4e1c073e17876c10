//! LISREL model family: parameter templates, the implied covariance Σ(θ),
//! its Jacobian, and the asymptotic covariance of the minimum contrast
//! estimator.

mod implied;
mod inference;
mod spec;
mod template;

pub use implied::{
    implied_sigma, sigma_jacobian, sigma_jacobian_fd, ModelMatrices, PSI_CONDITION_LIMIT,
};
pub use inference::{
    asymptotic_cov, local_identifiability, standard_errors, IdentifiabilityReport,
    JACOBIAN_RANK_TOL,
};
pub use spec::{ModelSpec, Templates, Theta};
pub use template::{Cell, MatrixTemplate, ParamBounds};
