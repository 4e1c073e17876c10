//! Realized covariance, the minimum contrast estimator and the
//! quasi-likelihood-ratio goodness-of-fit test.

mod contrast;
mod fit;
mod gof;
mod optimizer;
mod realized;

pub use contrast::{contrast, v_integral};
pub use fit::{fit, FitOptions, FitResult, GradientMode};
pub use gof::{gof_test, GofResult, Report, ReportDiagnostics};
pub use realized::{realized_cov, RealizedCov};

#[cfg(test)]
mod tests;
