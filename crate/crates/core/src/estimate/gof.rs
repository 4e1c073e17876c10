use serde::{Deserialize, Serialize};

use super::contrast::contrast;
use super::fit::FitResult;
use super::realized::RealizedCov;
use crate::error::{Error, Result};
use crate::lisrel::{implied_sigma, ModelSpec};
use crate::matstat::{chi2_quantile, chi2_sf};

/// Quasi-likelihood-ratio goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    /// T = n·F(Q, Σ(θ̂)).
    pub t_stat: f64,
    pub df: u32,
    pub p_value: f64,
    pub alpha: f64,
    /// Upper-α point of χ²_df.
    pub critical_value: f64,
    pub reject: bool,
}

/// Tests H₀: Σ = Σ(θ) against an unrestricted PD Σ.
pub fn gof_test(spec: &ModelSpec, fit: &FitResult, q: &RealizedCov, alpha: f64) -> Result<GofResult> {
    if !q.is_pd() {
        return Err(Error::SingularQ);
    }
    let df = spec.df();
    if df <= 0 {
        return Err(Error::Saturated { df });
    }
    let df = df as u32;
    let critical_value = chi2_quantile(alpha, df)?;
    let sigma = implied_sigma(spec, &fit.theta_hat)?;
    let t_stat = q.n() as f64 * contrast(q, &sigma)?;
    Ok(GofResult {
        t_stat,
        df,
        p_value: chi2_sf(t_stat, df),
        alpha,
        critical_value,
        reject: t_stat > critical_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub names: Vec<String>,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
    pub n_starts_used: usize,
    pub best_start_index: usize,
    pub n: usize,
    pub q_pd: bool,
    pub identification: Option<String>,
    pub alpha: Option<f64>,
    pub critical_value: Option<f64>,
}

/// Flat machine-readable summary of a fit and, optionally, its test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub theta_hat: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub vcov: Option<Vec<Vec<f64>>>,
    pub contrast: f64,
    pub t_stat: Option<f64>,
    pub df: Option<u32>,
    pub p_value: Option<f64>,
    pub reject: Option<bool>,
    pub diagnostics: ReportDiagnostics,
}

impl Report {
    pub fn new(fit: &FitResult, q: &RealizedCov, gof: Option<&GofResult>) -> Self {
        Self {
            theta_hat: fit.theta_hat.clone(),
            se: fit.se.clone(),
            vcov: fit.vcov.clone(),
            contrast: fit.contrast,
            t_stat: gof.map(|g| g.t_stat),
            df: gof.map(|g| g.df),
            p_value: gof.map(|g| g.p_value),
            reject: gof.map(|g| g.reject),
            diagnostics: ReportDiagnostics {
                names: fit.names.clone(),
                converged: fit.converged,
                grad_norm: fit.grad_norm,
                iterations: fit.iterations,
                n_starts_used: fit.n_starts_used,
                best_start_index: fit.best_start_index,
                n: fit.n,
                q_pd: q.is_pd(),
                identification: fit.identification.clone(),
                alpha: gof.map(|g| g.alpha),
                critical_value: gof.map(|g| g.critical_value),
            },
        }
    }
}
