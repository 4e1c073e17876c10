use nalgebra::DMatrix;

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::matstat::{condition_number, vech_pairs, SymMatrix};

/// Largest condition number of Ψ = I − B₀ accepted as non-singular.
pub const PSI_CONDITION_LIMIT: f64 = 1e12;

/// The structural matrices evaluated at one θ.
#[derive(Debug, Clone)]
pub struct ModelMatrices {
    pub lambda_x1: DMatrix<f64>,
    pub lambda_x2: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub sigma_xixi: DMatrix<f64>,
    pub sigma_dd: DMatrix<f64>,
    pub sigma_ee: DMatrix<f64>,
    pub sigma_zz: DMatrix<f64>,
    /// Ψ⁻¹ = (I − B₀)⁻¹.
    pub psi_inv: DMatrix<f64>,
}

impl ModelMatrices {
    pub fn evaluate(spec: &ModelSpec, theta: &[f64]) -> Result<Self> {
        if theta.len() != spec.q() {
            return Err(Error::InvalidDimension(format!(
                "theta has {} entries, model has q = {}",
                theta.len(),
                spec.q()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("theta has non-finite entries".into()));
        }
        let t = spec.templates();
        let b0 = t.b0.evaluate(theta);
        let psi_inv = psi_inverse(&b0)?;
        Ok(Self {
            lambda_x1: t.lambda_x1.evaluate(theta),
            lambda_x2: t.lambda_x2.evaluate(theta),
            b0,
            gamma: t.gamma.evaluate(theta),
            sigma_xixi: t.sigma_xixi.evaluate(theta),
            sigma_dd: t.sigma_dd.evaluate(theta),
            sigma_ee: t.sigma_ee.evaluate(theta),
            sigma_zz: t.sigma_zz.evaluate(theta),
            psi_inv,
        })
    }

    /// Reduced-form loading of X on (ξ, ζ):
    /// `[[Λ₁, 0], [Λ₂Ψ⁻¹Γ, Λ₂Ψ⁻¹]]`.
    pub fn reduced_loading(&self) -> DMatrix<f64> {
        let (p1, k1) = self.lambda_x1.shape();
        let (p2, k2) = self.lambda_x2.shape();
        let l2_psi = &self.lambda_x2 * &self.psi_inv;
        let mut m = DMatrix::zeros(p1 + p2, k1 + k2);
        m.view_mut((0, 0), (p1, k1)).copy_from(&self.lambda_x1);
        m.view_mut((p1, 0), (p2, k1)).copy_from(&(&l2_psi * &self.gamma));
        m.view_mut((p1, k1), (p2, k2)).copy_from(&l2_psi);
        m
    }

    fn latent_cov(&self) -> DMatrix<f64> {
        block_diag(&self.sigma_xixi, &self.sigma_zz)
    }

    fn unique_cov(&self) -> DMatrix<f64> {
        block_diag(&self.sigma_dd, &self.sigma_ee)
    }
}

fn psi_inverse(b0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k2 = b0.nrows();
    if b0.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::identity(k2, k2));
    }
    let psi = DMatrix::identity(k2, k2) - b0;
    let condition = condition_number(&psi);
    if !(condition <= PSI_CONDITION_LIMIT) {
        return Err(Error::AssumptionE { condition });
    }
    psi.try_inverse().ok_or(Error::AssumptionE {
        condition: f64::INFINITY,
    })
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut m = DMatrix::zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

/// Model-implied covariance Σ(θ) of the observed increments.
///
/// Blocks: Σ₁₁ = Λ₁Σ_ξξΛ₁ᵀ + Σ_δδ, Σ₁₂ = Λ₁Σ_ξξΓᵀΨ⁻ᵀΛ₂ᵀ,
/// Σ₂₂ = Λ₂Ψ⁻¹(ΓΣ_ξξΓᵀ + Σ_ζζ)Ψ⁻ᵀΛ₂ᵀ + Σ_εε. Positive definiteness is not
/// checked here.
pub fn implied_sigma(spec: &ModelSpec, theta: &[f64]) -> Result<SymMatrix> {
    let mm = ModelMatrices::evaluate(spec, theta)?;
    Ok(sigma_from_matrices(&mm))
}

pub(crate) fn sigma_from_matrices(mm: &ModelMatrices) -> SymMatrix {
    let m = mm.reduced_loading();
    let s = &m * mm.latent_cov() * m.transpose() + mm.unique_cov();
    SymMatrix::from_lower(s)
}

/// Analytic Jacobian ∂vech Σ(θ)/∂θᵀ, p̄ x q.
pub fn sigma_jacobian(spec: &ModelSpec, theta: &[f64]) -> Result<DMatrix<f64>> {
    let mm = ModelMatrices::evaluate(spec, theta)?;
    let t = spec.templates();
    let p = spec.p();
    let (p1, k1) = (spec.p1(), spec.k1());
    let (p2, k2) = (spec.p2(), spec.k2());
    let pairs = vech_pairs(p);

    let m = mm.reduced_loading();
    let omega = mm.latent_cov();
    let omega_mt = &omega * m.transpose();
    let l2_psi = &mm.lambda_x2 * &mm.psi_inv;

    let mut jac = DMatrix::zeros(pairs.len(), spec.q());
    for j in 0..spec.q() {
        let d_l1 = t.lambda_x1.derivative(j);
        let d_l2 = t.lambda_x2.derivative(j);
        let d_b0 = t.b0.derivative(j);
        let d_g = t.gamma.derivative(j);

        let mut d_sigma = DMatrix::<f64>::zeros(p, p);

        if d_l1.is_some() || d_l2.is_some() || d_b0.is_some() || d_g.is_some() {
            // dM for M = [[Λ₁, 0], [Λ₂Ψ⁻¹Γ, Λ₂Ψ⁻¹]]
            let mut d_m = DMatrix::<f64>::zeros(p, k1 + k2);
            if let Some(d) = &d_l1 {
                d_m.view_mut((0, 0), (p1, k1)).copy_from(d);
            }
            // d(Λ₂Ψ⁻¹) = dΛ₂Ψ⁻¹ + Λ₂Ψ⁻¹dB₀Ψ⁻¹
            let mut d_l2_psi = DMatrix::<f64>::zeros(p2, k2);
            if let Some(d) = &d_l2 {
                d_l2_psi += d * &mm.psi_inv;
            }
            if let Some(d) = &d_b0 {
                d_l2_psi += &l2_psi * d * &mm.psi_inv;
            }
            let mut lower_left = &d_l2_psi * &mm.gamma;
            if let Some(d) = &d_g {
                lower_left += &l2_psi * d;
            }
            d_m.view_mut((p1, 0), (p2, k1)).copy_from(&lower_left);
            d_m.view_mut((p1, k1), (p2, k2)).copy_from(&d_l2_psi);
            let half = &d_m * &omega_mt;
            d_sigma += &half + half.transpose();
        }

        let d_xi = t.sigma_xixi.derivative(j);
        let d_zz = t.sigma_zz.derivative(j);
        if d_xi.is_some() || d_zz.is_some() {
            let d_omega = block_diag(
                &d_xi.unwrap_or_else(|| DMatrix::zeros(k1, k1)),
                &d_zz.unwrap_or_else(|| DMatrix::zeros(k2, k2)),
            );
            d_sigma += &m * d_omega * m.transpose();
        }
        if let Some(d) = t.sigma_dd.derivative(j) {
            let mut block = d_sigma.view_mut((0, 0), (p1, p1));
            block += &d;
        }
        if let Some(d) = t.sigma_ee.derivative(j) {
            let mut block = d_sigma.view_mut((p1, p1), (p2, p2));
            block += &d;
        }

        for (k, &(r, c)) in pairs.iter().enumerate() {
            jac[(k, j)] = d_sigma[(r, c)];
        }
    }
    Ok(jac)
}

/// Central finite-difference Jacobian with step `rel_step * (1 + |θ_j|)`.
pub fn sigma_jacobian_fd(spec: &ModelSpec, theta: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
    let pairs = vech_pairs(spec.p());
    let mut jac = DMatrix::zeros(pairs.len(), spec.q());
    let mut work = theta.to_vec();
    for j in 0..spec.q() {
        let h = rel_step * (1.0 + theta[j].abs());
        work[j] = theta[j] + h;
        let plus = implied_sigma(spec, &work)?;
        work[j] = theta[j] - h;
        let minus = implied_sigma(spec, &work)?;
        work[j] = theta[j];
        for (k, &(r, c)) in pairs.iter().enumerate() {
            jac[(k, j)] = (plus.get(r, c) - minus.get(r, c)) / (2.0 * h);
        }
    }
    Ok(jac)
}
