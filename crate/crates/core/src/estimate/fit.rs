use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contrast::{contrast_gradient, contrast_parts};
use super::optimizer::{minimize, Objective, Outcome, Settings};
use super::realized::RealizedCov;
use crate::error::{Error, Result};
use crate::lisrel::{asymptotic_cov, implied_sigma, sigma_jacobian, standard_errors, ModelSpec};
use crate::matstat::{vech_pairs, SymMatrix};

/// How the optimizer obtains ∇F.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Central differences with step 1e-7·(1 + |θⱼ|).
    #[default]
    Numeric,
    /// Chain rule through the closed-form contrast and the Jacobian of vech Σ.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Uniform random starts drawn over the admissible parameter set.
    pub n_starts: usize,
    pub seed: u64,
    /// Extra start evaluated first (index 0) when present.
    pub init_override: Option<Vec<f64>>,
    /// Tolerance on |ΔF| between iterations.
    pub tol: f64,
    /// Tolerance on the max-norm of the projected gradient.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub gradient: GradientMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 50,
            seed: 0,
            init_override: None,
            tol: 1e-12,
            grad_tol: 1e-10,
            max_iter: 500,
            gradient: GradientMode::Numeric,
        }
    }
}

impl FitOptions {
    /// A single start at `theta`, as when the true value is known.
    pub fn from_init(theta: &[f64]) -> Self {
        Self {
            n_starts: 0,
            init_override: Some(theta.to_vec()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub contrast: f64,
    pub converged: bool,
    /// Starts whose initial point had a positive definite Σ(θ).
    pub n_starts_used: usize,
    pub best_start_index: usize,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Number of increments behind Q.
    pub n: usize,
    pub se: Option<Vec<f64>>,
    pub vcov: Option<Vec<Vec<f64>>>,
    /// Why `se` is absent, when it is.
    pub identification: Option<String>,
}

pub(super) struct ContrastObjective<'a> {
    pub spec: &'a ModelSpec,
    pub q: &'a SymMatrix,
    pub q_pd: bool,
    pub gradient: GradientMode,
}

impl ContrastObjective<'_> {
    fn numeric_gradient(&self, x: &[f64], f: f64) -> DVector<f64> {
        let mut xs = x.to_vec();
        DVector::from_fn(x.len(), |j, _| {
            let step = 1e-7 * (1.0 + x[j].abs());
            xs[j] = x[j] + step;
            let up = self.value(&xs);
            xs[j] = x[j] - step;
            let down = self.value(&xs);
            xs[j] = x[j];
            match (up.is_finite(), down.is_finite()) {
                (true, true) => (up - down) / (2.0 * step),
                (true, false) => (up - f) / step,
                (false, true) => (f - down) / step,
                (false, false) => 0.0,
            }
        })
    }
}

impl Objective for ContrastObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        implied_sigma(self.spec, x)
            .and_then(|s| contrast_parts(self.q, self.q_pd, &s))
            .unwrap_or(f64::INFINITY)
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, DVector<f64>)> {
        let sigma = implied_sigma(self.spec, x).ok()?;
        let f = contrast_parts(self.q, self.q_pd, &sigma).ok()?;
        let g = match self.gradient {
            GradientMode::Numeric => self.numeric_gradient(x, f),
            GradientMode::Analytic => {
                let jac = sigma_jacobian(self.spec, x).ok()?;
                contrast_gradient(self.q, self.q_pd, &sigma, &jac).ok()?
            }
        };
        Some((f, g))
    }

    // Fisher information ½ tr(Σ⁻¹ ∂ₐΣ Σ⁻¹ ∂ᵦΣ), or the Gauss–Newton 2JᵀJ when
    // Q is singular. A small ridge keeps it invertible off the identified set.
    fn curvature(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let jac = sigma_jacobian(self.spec, x).ok()?;
        let q = jac.ncols();
        let mut g = if self.q_pd {
            let sigma = implied_sigma(self.spec, x).ok()?;
            let inv = sigma.cholesky()?.inverse();
            let p = sigma.dim();
            let pairs = vech_pairs(p);
            let scaled: Vec<DMatrix<f64>> = (0..q)
                .map(|a| {
                    let mut d = DMatrix::zeros(p, p);
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        d[(i, j)] = jac[(k, a)];
                        d[(j, i)] = jac[(k, a)];
                    }
                    &inv * d
                })
                .collect();
            DMatrix::from_fn(q, q, |a, b| 0.5 * scaled[a].tr_mul(&scaled[b].transpose()).trace())
        } else {
            jac.tr_mul(&jac) * 2.0
        };
        let ridge = 1e-10 * g.trace().max(f64::MIN_POSITIVE) / q as f64;
        for a in 0..q {
            g[(a, a)] += ridge;
        }
        Some(g)
    }
}

fn start_points(spec: &ModelSpec, opts: &FitOptions) -> Result<Vec<Vec<f64>>> {
    let mut starts = Vec::with_capacity(opts.n_starts + 1);
    if let Some(init) = &opts.init_override {
        if init.len() != spec.q() {
            return Err(Error::InvalidDimension(format!(
                "init has {} values, model has q = {}",
                init.len(),
                spec.q()
            )));
        }
        starts.push(init.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.n_starts {
        starts.push(spec.bounds().iter().map(|b| b.sample(&mut rng)).collect());
    }
    if starts.is_empty() {
        return Err(Error::Domain("fit needs n_starts >= 1 or an init".into()));
    }
    Ok(starts)
}

/// Minimum-contrast estimate of θ from the realized covariance.
///
/// Every start is optimized independently; the lowest final contrast wins,
/// ties going to the lower start index. Standard errors come from the
/// asymptotic covariance at θ̂ scaled by 1/n; when local identification
/// fails there, θ̂ is still returned and `identification` says why.
pub fn fit(spec: &ModelSpec, q: &RealizedCov, opts: &FitOptions) -> Result<FitResult> {
    if q.dim() != spec.p() {
        return Err(Error::InvalidDimension(format!(
            "Q is {0}x{0} but the model has p = {1}",
            q.dim(),
            spec.p()
        )));
    }
    let starts = start_points(spec, opts)?;
    let objective = ContrastObjective {
        spec,
        q: q.q_xx(),
        q_pd: q.is_pd(),
        gradient: opts.gradient,
    };
    let settings = Settings {
        f_tol: opts.tol,
        g_tol: opts.grad_tol,
        max_iter: opts.max_iter,
    };
    let outcomes: Vec<Option<Outcome>> = starts
        .par_iter()
        .map(|x0| minimize(&objective, spec.bounds(), x0, settings))
        .collect();

    let n_starts_used = outcomes.iter().filter(|o| o.is_some()).count();
    let (best_start_index, best) = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|o| (i, o)))
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .ok_or(Error::NoFeasibleStart)?;
    log::debug!(
        "fit: best start {best_start_index} of {n_starts_used}, F = {:.6e}, {} iterations",
        best.f,
        best.iterations
    );

    let (se, vcov, identification) = match asymptotic_cov(spec, &best.x) {
        Ok(v) => (
            Some(standard_errors(&v, q.n())),
            Some(
                v.to_rows()
                    .into_iter()
                    .map(|row| row.into_iter().map(|x| x / q.n() as f64).collect())
                    .collect(),
            ),
            None,
        ),
        Err(e) => (None, None, Some(e.to_string())),
    };

    Ok(FitResult {
        names: spec.names().to_vec(),
        theta_hat: best.x,
        contrast: best.f,
        converged: best.converged,
        n_starts_used,
        best_start_index,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        n: q.n(),
        se,
        vcov,
        identification,
    })
}
