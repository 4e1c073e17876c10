use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::implied::{
    implied_sigma, sigma_from_matrices, sigma_jacobian, ModelMatrices, PSI_CONDITION_LIMIT,
};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::matstat::{condition_number, numeric_rank, w_matrix, SymMatrix};

/// Relative singular-value cutoff for the rank of the Jacobian Δ.
pub const JACOBIAN_RANK_TOL: f64 = 1e-8;

/// (Δᵀ W(θ)⁻¹ Δ)⁻¹, the asymptotic covariance of √n (θ̂ − θ).
pub fn asymptotic_cov(spec: &ModelSpec, theta: &[f64]) -> Result<SymMatrix> {
    let sigma = implied_sigma(spec, theta)?;
    if !sigma.is_positive_definite() {
        return Err(Error::NonPdModel);
    }
    let delta = sigma_jacobian(spec, theta)?;
    let rank = numeric_rank(&delta, JACOBIAN_RANK_TOL);
    if rank < spec.q() {
        return Err(Error::AssumptionH { rank, q: spec.q() });
    }
    let w = w_matrix(&sigma);
    let w_chol = w.cholesky().ok_or(Error::NonPdModel)?;
    let w_inv_delta = w_chol.solve(&delta);
    let info = SymMatrix::from_lower(delta.transpose() * w_inv_delta);
    let info_chol = info.cholesky().ok_or(Error::AssumptionH {
        rank,
        q: spec.q(),
    })?;
    Ok(SymMatrix::from_lower(info_chol.inverse()))
}

/// Standard errors sqrt(diag(V) / n).
pub fn standard_errors(vcov: &SymMatrix, n: usize) -> Vec<f64> {
    (0..vcov.dim())
        .map(|j| (vcov.get(j, j) / n as f64).sqrt())
        .collect()
}

/// Runtime check of the identification and regularity assumptions at θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub q: usize,
    pub pbar: usize,
    /// Numerical column rank of ∂vech Σ/∂θᵀ.
    pub jacobian_rank: usize,
    /// [H]: Jacobian has full column rank.
    pub local_identified: bool,
    /// [B2]: Σ_δδ positive definite.
    pub sigma_dd_pd: bool,
    /// [C2]: Σ_εε positive definite (vacuous when p2 = 0).
    pub sigma_ee_pd: bool,
    /// [E]: condition number of Ψ = I − B₀.
    pub psi_condition: f64,
    pub psi_nonsingular: bool,
    /// [F]: rank of Λ_x1 equals k1.
    pub lambda_x1_rank: usize,
    pub lambda_x1_full_rank: bool,
    pub sigma_xixi_psd: bool,
    pub sigma_zz_psd: bool,
    pub implied_pd: bool,
}

impl IdentifiabilityReport {
    pub fn all_pass(&self) -> bool {
        self.local_identified
            && self.sigma_dd_pd
            && self.sigma_ee_pd
            && self.psi_nonsingular
            && self.lambda_x1_full_rank
            && self.implied_pd
    }
}

fn is_pd(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || nalgebra::Cholesky::new(m.clone()).is_some()
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let ev = m.clone().symmetric_eigenvalues();
    let scale = m.amax().max(1.0);
    ev.iter().all(|&l| l >= -1e-12 * scale)
}

/// Diagnostic form of [H], [B2], [C2], [E] and [F]; never fails on violated
/// assumptions, only on malformed input.
pub fn local_identifiability(spec: &ModelSpec, theta: &[f64]) -> Result<IdentifiabilityReport> {
    if theta.len() != spec.q() {
        return Err(Error::InvalidDimension(format!(
            "theta has {} entries, model has q = {}",
            theta.len(),
            spec.q()
        )));
    }
    let t = spec.templates();
    let b0 = t.b0.evaluate(theta);
    let psi = DMatrix::identity(spec.k2(), spec.k2()) - &b0;
    let psi_condition = if spec.k2() == 0 {
        1.0
    } else {
        condition_number(&psi)
    };
    let psi_nonsingular = psi_condition <= PSI_CONDITION_LIMIT;
    let lambda_x1 = t.lambda_x1.evaluate(theta);
    let lambda_x1_rank = numeric_rank(&lambda_x1, JACOBIAN_RANK_TOL);
    let sigma_dd = t.sigma_dd.evaluate(theta);
    let sigma_ee = t.sigma_ee.evaluate(theta);

    let (jacobian_rank, implied_pd) = if psi_nonsingular {
        let mm = ModelMatrices::evaluate(spec, theta)?;
        let sigma = sigma_from_matrices(&mm);
        let jac = sigma_jacobian(spec, theta)?;
        (
            numeric_rank(&jac, JACOBIAN_RANK_TOL),
            sigma.is_positive_definite(),
        )
    } else {
        (0, false)
    };

    Ok(IdentifiabilityReport {
        q: spec.q(),
        pbar: spec.pbar(),
        jacobian_rank,
        local_identified: jacobian_rank == spec.q(),
        sigma_dd_pd: is_pd(&sigma_dd),
        sigma_ee_pd: is_pd(&sigma_ee),
        psi_condition,
        psi_nonsingular,
        lambda_x1_rank,
        lambda_x1_full_rank: lambda_x1_rank == spec.k1(),
        sigma_xixi_psd: is_psd(&t.sigma_xixi.evaluate(theta)),
        sigma_zz_psd: is_psd(&t.sigma_zz.evaluate(theta)),
        implied_pd,
    })
}
