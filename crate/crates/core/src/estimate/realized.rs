use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matstat::SymMatrix;

/// Realized covariance Q_XX = T⁻¹ Σᵢ ΔXᵢ ΔXᵢᵀ with its grid metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedCov {
    q_xx: SymMatrix,
    n: usize,
    h: f64,
    pd: bool,
}

#[derive(Serialize, Deserialize)]
struct RealizedCovRepr {
    q_xx: Vec<Vec<f64>>,
    n: usize,
    h: f64,
    horizon: f64,
    pd_flag: bool,
}

impl Serialize for RealizedCov {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RealizedCovRepr {
            q_xx: self.q_xx.to_rows(),
            n: self.n,
            h: self.h,
            horizon: self.horizon(),
            pd_flag: self.pd,
        }
        .serialize(s)
    }
}

impl RealizedCov {
    /// Wraps a known matrix as if it were observed with `n` increments of length `h`.
    pub fn from_matrix(q_xx: SymMatrix, n: usize, h: f64) -> Result<Self> {
        if n == 0 || !(h > 0.0) {
            return Err(Error::InsufficientData(
                "realized covariance needs n >= 1 and h > 0".into(),
            ));
        }
        let pd = q_xx.is_positive_definite();
        Ok(Self { q_xx, n, h, pd })
    }

    pub fn q_xx(&self) -> &SymMatrix {
        &self.q_xx
    }

    pub fn dim(&self) -> usize {
        self.q_xx.dim()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Whether Q_XX admitted a Cholesky factorization.
    pub fn is_pd(&self) -> bool {
        self.pd
    }
}

/// Realized covariance of an (n+1) x p series observed every `h` time units.
pub fn realized_cov(obs: &DMatrix<f64>, h: f64) -> Result<RealizedCov> {
    let rows = obs.nrows();
    if rows < 2 {
        return Err(Error::InsufficientData(format!(
            "realized covariance needs at least 2 observations, got {rows}"
        )));
    }
    if obs.ncols() == 0 {
        return Err(Error::InvalidDimension("series has no columns".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step h must be positive, got {h}")));
    }
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("series has non-finite entries".into()));
    }
    let n = rows - 1;
    let inc = obs.rows(1, n) - obs.rows(0, n);
    let q = inc.transpose() * &inc / (n as f64 * h);
    RealizedCov::from_matrix(SymMatrix::from_lower(q), n, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_increment() {
        let obs = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.0, -2.0, 0.5]);
        let q = realized_cov(&obs, 1.0).unwrap();
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(q.q_xx().as_matrix(), &(&x * x.transpose()));
        assert!(!q.is_pd());
        assert_eq!(q.horizon(), 1.0);
    }

    #[test]
    fn constant_series_is_zero() {
        let obs = DMatrix::from_element(50, 2, 3.5);
        let q = realized_cov(&obs, 0.1).unwrap();
        assert_eq!(q.q_xx(), &SymMatrix::zeros(2));
        assert!(!q.is_pd());
    }

    #[test]
    fn too_few_observations() {
        let obs = DMatrix::from_element(1, 2, 0.0);
        assert!(matches!(
            realized_cov(&obs, 0.1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn scaled_by_horizon() {
        let obs = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let q = realized_cov(&obs, 0.5).unwrap();
        // (1 + 4) / (2 * 0.5)
        assert_eq!(q.q_xx().get(0, 0), 5.0);
        assert!(q.is_pd());
    }
}
