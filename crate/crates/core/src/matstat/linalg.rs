use nalgebra::DMatrix;

use super::sym::{half_len, vech_pairs, SymMatrix};
#[cfg(test)]
use super::sym::vech_index;
use crate::error::{Error, Result};

/// The duplication matrix D_p together with its Moore–Penrose inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationPair {
    dim: usize,
    d: DMatrix<f64>,
    dplus: DMatrix<f64>,
}

impl DuplicationPair {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// D: p² x p̄, `D * vech(A) == vec(A)`.
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// D⁺ = (DᵀD)⁻¹Dᵀ: p̄ x p², `D⁺ * vec(A) == vech(A)`.
    pub fn dplus(&self) -> &DMatrix<f64> {
        &self.dplus
    }
}

pub fn duplication(p: usize) -> Result<DuplicationPair> {
    if p == 0 {
        return Err(Error::InvalidDimension("duplication matrix needs p >= 1".into()));
    }
    let pbar = half_len(p);
    let mut d = DMatrix::zeros(p * p, pbar);
    let mut dplus = DMatrix::zeros(pbar, p * p);
    for (k, (i, j)) in vech_pairs(p).into_iter().enumerate() {
        d[(i + j * p, k)] = 1.0;
        d[(j + i * p, k)] = 1.0;
        if i == j {
            dplus[(k, i + j * p)] = 1.0;
        } else {
            // DᵀD is diagonal with 2 on off-diagonal slots.
            dplus[(k, i + j * p)] = 0.5;
            dplus[(k, j + i * p)] = 0.5;
        }
    }
    Ok(DuplicationPair { dim: p, d, dplus })
}

/// Moore–Penrose pseudoinverse by SVD.
///
/// Singular values below `tol * σ_max` are treated as zero; the default
/// relative cutoff is `max(rows, cols) * f64::EPSILON`.
pub fn pinv(m: &DMatrix<f64>, tol: Option<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("pinv input has non-finite entries".into()));
    }
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let rel = tol.unwrap_or(r.max(c) as f64 * f64::EPSILON);
    let cutoff = rel * smax;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    Ok(out)
}

/// Numerical rank: number of singular values above `rel_tol * σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// W(Σ) = 2 D⁺ (Σ ⊗ Σ) D⁺ᵀ, the asymptotic covariance of √n vech(Q_XX).
pub fn w_matrix(sigma: &SymMatrix) -> SymMatrix {
    let dup = duplication(sigma.dim()).expect("SymMatrix has dim >= 1");
    let s = sigma.as_matrix();
    let w = dup.dplus() * kron(s, s) * dup.dplus().transpose() * 2.0;
    SymMatrix::from_lower(w)
}

/// Entry-wise W: W[(ij),(kl)] = σ_ik σ_jl + σ_il σ_jk.
#[cfg(test)]
pub(crate) fn w_matrix_direct(sigma: &SymMatrix) -> SymMatrix {
    let p = sigma.dim();
    let pairs = vech_pairs(p);
    let s = sigma.as_matrix();
    let mut w = DMatrix::zeros(pairs.len(), pairs.len());
    for &(i, j) in &pairs {
        for &(k, l) in &pairs {
            w[(vech_index(p, i, j), vech_index(p, k, l))] =
                s[(i, k)] * s[(j, l)] + s[(i, l)] * s[(j, k)];
        }
    }
    SymMatrix::from_lower(w)
}
