use nalgebra::{DMatrix, DVector};

use super::realized::RealizedCov;
use crate::error::{Error, Result};
use crate::matstat::{duplication, kron, vech_pairs, SymMatrix};

/// Minimum-contrast discrepancy between Q and Σ.
///
/// For PD Q this is logdet Σ − logdet Q + tr(Σ⁻¹Q) − p, evaluated as
/// Σᵢ (μᵢ − ln μᵢ − 1) over the eigenvalues of L⁻¹QL⁻ᵀ (Σ = LLᵀ), which is
/// exactly 0 at Σ = Q and free of cancellation near it. For singular Q it is
/// the unweighted least-squares ‖vech Q − vech Σ‖².
pub fn contrast(q: &RealizedCov, sigma: &SymMatrix) -> Result<f64> {
    contrast_parts(q.q_xx(), q.is_pd(), sigma)
}

pub(crate) fn contrast_parts(q: &SymMatrix, q_pd: bool, sigma: &SymMatrix) -> Result<f64> {
    if q.dim() != sigma.dim() {
        return Err(Error::InvalidDimension(format!(
            "Q is {0}x{0} but Sigma is {1}x{1}",
            q.dim(),
            sigma.dim()
        )));
    }
    let chol = sigma.cholesky().ok_or(Error::NonPdModel)?;
    if !q_pd {
        return Ok(lower_sq_dist(q, sigma));
    }
    if q == sigma {
        return Ok(0.0);
    }
    let l = chol.l();
    // E = L⁻¹ Q L⁻ᵀ
    let half = l
        .solve_lower_triangular(q.as_matrix())
        .ok_or(Error::NonPdModel)?;
    let e = l
        .solve_lower_triangular(&half.transpose())
        .ok_or(Error::NonPdModel)?;
    let e = (&e + e.transpose()) * 0.5;
    let mut f = 0.0;
    for mu in e.symmetric_eigenvalues().iter() {
        if *mu <= 0.0 {
            return Err(Error::Domain("Q is not positive definite".into()));
        }
        let x = mu - 1.0;
        f += x - x.ln_1p();
    }
    Ok(f.max(0.0))
}

fn lower_sq_dist(q: &SymMatrix, sigma: &SymMatrix) -> f64 {
    vech_pairs(q.dim())
        .into_iter()
        .map(|(i, j)| (q.get(i, j) - sigma.get(i, j)).powi(2))
        .sum()
}

/// ∂F/∂θ from Σ and the Jacobian J = ∂vech Σ/∂θᵀ.
///
/// PD branch: ∂F/∂θⱼ = tr(Σ⁻¹(Σ − Q)Σ⁻¹ ∂Σ/∂θⱼ). Singular branch:
/// −2 Jᵀ(vech Q − vech Σ).
pub(crate) fn contrast_gradient(
    q: &SymMatrix,
    q_pd: bool,
    sigma: &SymMatrix,
    jac: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let p = sigma.dim();
    let pairs = vech_pairs(p);
    let mut weights = DVector::zeros(pairs.len());
    if q_pd {
        let chol = sigma.cholesky().ok_or(Error::NonPdModel)?;
        let inv = chol.inverse();
        let m = &inv * (sigma.as_matrix() - q.as_matrix()) * &inv;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            weights[k] = if i == j { m[(i, j)] } else { m[(i, j)] + m[(j, i)] };
        }
    } else {
        for (k, &(i, j)) in pairs.iter().enumerate() {
            weights[k] = -2.0 * (q.get(i, j) - sigma.get(i, j));
        }
    }
    Ok(jac.transpose() * weights)
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Newton on P_m from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// V(Q, Σ) = Dᵀ [∫₀¹∫₀¹ λ₂ (A⁻¹ ⊗ A⁻¹) dλ₁ dλ₂] D with A = Σ + λ₁λ₂(Q − Σ).
///
/// With this V, F(Q, Σ) = (vech Q − vech Σ)ᵀ V (vech Q − vech Σ) exactly, and
/// V(Σ, Σ) = W(Σ)⁻¹. Tensor-product Gauss–Legendre, doubling the order until
/// successive estimates agree to `quad_tol` (relative, max-norm).
pub fn v_integral(q: &SymMatrix, sigma: &SymMatrix, quad_tol: f64) -> Result<SymMatrix> {
    let p = sigma.dim();
    if q.dim() != p {
        return Err(Error::InvalidDimension("Q and Sigma differ in size".into()));
    }
    let dup = duplication(p)?;
    let diff = q.as_matrix() - sigma.as_matrix();
    let estimate = |m: usize| -> Result<DMatrix<f64>> {
        let (x, w) = gauss_legendre(m);
        let mut acc = DMatrix::zeros(p * p, p * p);
        for (&l2, &w2) in x.iter().zip(&w) {
            for (&l1, &w1) in x.iter().zip(&w) {
                let a = sigma.as_matrix() + &diff * (l1 * l2);
                let inv = a
                    .cholesky()
                    .ok_or_else(|| {
                        Error::Domain("segment between Q and Sigma leaves the PD cone".into())
                    })?
                    .inverse();
                acc += kron(&inv, &inv) * (w1 * w2 * l2);
            }
        }
        Ok(dup.d().transpose() * acc * dup.d())
    };
    let mut m = 8;
    let mut prev = estimate(m)?;
    loop {
        m *= 2;
        let next = estimate(m)?;
        let change = (&next - &prev).amax() / next.amax().max(f64::MIN_POSITIVE);
        if change <= quad_tol || m >= 256 {
            return Ok(SymMatrix::from_lower(next));
        }
        prev = next;
    }
}
