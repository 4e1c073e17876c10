//! Replicated simulate → estimate → test pipelines.
//!
//! Replication r draws its latent paths from the streams keyed by
//! (seed, r), so results do not depend on how replications are scheduled
//! across workers. Aggregation folds the per-replication records in index
//! order.

mod diag;
mod output;
pub mod stats;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, gof_test, realized_cov, FitOptions};
use crate::lisrel::{asymptotic_cov, implied_sigma, ModelSpec};
use crate::matstat::{vech, vech_pairs, w_matrix};
use crate::simulate::{simulate_replication, Scheme, SdeBlocks, SimGrid};

pub use diag::{emit_diagnostics, DiagRow, Diagnostics, Quantity};
pub use output::{default_quantities, write_outputs};

/// Failure share above which the study is flagged.
pub const FAILURE_WARNING_SHARE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub name: String,
    pub spec: ModelSpec,
    pub options: FitOptions,
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub replications: usize,
    pub grid: SimGrid,
    pub scheme: Scheme,
    pub true_spec: ModelSpec,
    pub true_theta: Vec<f64>,
    pub blocks: SdeBlocks,
    pub fitted: Vec<FittedModel>,
    pub alpha: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Where [`write_outputs`] puts its files, when set.
    pub outputs: Option<PathBuf>,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.true_theta.len() != self.true_spec.q() {
            return Err(Error::InvalidDimension(
                "true theta length differs from the true model's q".into(),
            ));
        }
        for m in &self.fitted {
            if m.spec.p() != self.true_spec.p() {
                return Err(Error::ConfigInconsistency(format!(
                    "fitted model `{}` has p = {}, true model has p = {}",
                    m.name,
                    m.spec.p(),
                    self.true_spec.p()
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Domain("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of fitting one model in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub theta_hat: Option<Vec<f64>>,
    pub contrast: Option<f64>,
    pub t_stat: Option<f64>,
    pub reject: Option<bool>,
    pub converged: bool,
    pub error: Option<String>,
}

impl ModelRecord {
    fn failed(e: &Error) -> Self {
        Self {
            theta_hat: None,
            contrast: None,
            t_stat: None,
            reject: None,
            converged: false,
            error: Some(e.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// vech Q_XX; absent when the simulation itself failed.
    pub q_vech: Option<Vec<f64>>,
    pub models: Vec<ModelRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub name: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub theoretical: Option<f64>,
    pub theoretical_sd: Option<f64>,
}

impl QuantityStats {
    fn from_values(
        name: String,
        xs: &[f64],
        theoretical: Option<f64>,
        theoretical_sd: Option<f64>,
    ) -> Self {
        Self {
            name,
            n: xs.len(),
            mean: stats::mean(xs),
            sd: stats::sample_sd(xs),
            theoretical,
            theoretical_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStats {
    pub model: String,
    pub df: i64,
    pub n: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub rejection_rate: Option<f64>,
}

/// Per-model context needed to standardize and label results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub names: Vec<String>,
    pub df: i64,
    /// True when the fitted model is the data-generating one.
    pub correctly_specified: bool,
    /// θ₀ and its asymptotic SEs at the study n, for the correct model.
    pub theta0: Option<Vec<f64>>,
    pub theta_se: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub replications: usize,
    pub failed_replications: usize,
    /// Observed dimension.
    pub p: usize,
    /// Increments per replication.
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub seed: u64,
    pub q: Vec<QuantityStats>,
    pub models: Vec<ModelInfo>,
    /// Parameter summaries, one list per fitted model.
    pub theta: Vec<Vec<QuantityStats>>,
    pub t: Vec<TStats>,
    pub warnings: Vec<String>,
    pub records: Vec<ReplicationRecord>,
    /// vech Σ(θ₀) and sqrt(diag W / n) for standardizing Q.
    pub sigma0_vech: Vec<f64>,
    pub q_se: Vec<f64>,
}

// Decorrelates the multi-start seed of replication r from its neighbours.
fn start_seed(base: u64, replication: usize, model: usize) -> u64 {
    let mut z = base
        ^ (replication as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (model as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_replication(cfg: &McConfig, r: usize) -> ReplicationRecord {
    let sim = simulate_replication(
        &cfg.true_spec,
        &cfg.true_theta,
        &cfg.blocks,
        &cfg.grid,
        cfg.scheme,
        cfg.seed,
        r as u64,
    )
    .and_then(|b| realized_cov(&b.observed(), cfg.grid.h()));
    let q = match sim {
        Ok(q) => q,
        Err(e) => {
            return ReplicationRecord {
                replication: r,
                q_vech: None,
                models: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    };
    let models = cfg
        .fitted
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let opts = FitOptions {
                seed: start_seed(m.options.seed, r, k),
                ..m.options.clone()
            };
            let res = fit(&m.spec, &q, &opts)
                .and_then(|f| gof_test(&m.spec, &f, &q, cfg.alpha).map(|g| (f, g)));
            match res {
                Ok((f, g)) => ModelRecord {
                    theta_hat: Some(f.theta_hat),
                    contrast: Some(f.contrast),
                    t_stat: Some(g.t_stat),
                    reject: Some(g.reject),
                    converged: f.converged,
                    error: None,
                },
                Err(e) => ModelRecord::failed(&e),
            }
        })
        .collect();
    ReplicationRecord {
        replication: r,
        q_vech: Some(vech(q.q_xx()).data().iter().copied().collect()),
        models,
        error: None,
    }
}

/// Runs every replication and aggregates the results.
///
/// Failed replications and failed fits are excluded from the statistics and
/// counted; a failure share above [`FAILURE_WARNING_SHARE`] adds a warning.
/// When `cfg.outputs` is set the tables are written there as well.
pub fn run_study(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let run = || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(cfg, r))
            .collect::<Vec<_>>()
    };
    let records = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let summary = summarize(cfg, records)?;
    if let Some(dir) = &cfg.outputs {
        write_outputs(&summary, dir)?;
    }
    Ok(summary)
}

fn summarize(cfg: &McConfig, records: Vec<ReplicationRecord>) -> Result<McSummary> {
    let n = cfg.grid.n();
    let p = cfg.true_spec.p();
    let sigma0 = implied_sigma(&cfg.true_spec, &cfg.true_theta)?;
    let w = w_matrix(&sigma0);
    let sigma0_vech: Vec<f64> = vech(&sigma0).data().iter().copied().collect();
    let q_se: Vec<f64> = (0..sigma0_vech.len())
        .map(|k| (w.get(k, k) / n as f64).sqrt())
        .collect();

    let mut warnings = Vec::new();
    let failed_replications = records.iter().filter(|r| r.error.is_some()).count();

    let q_stats = vech_pairs(p)
        .into_iter()
        .enumerate()
        .map(|(k, (i, j))| {
            let xs: Vec<f64> = records
                .iter()
                .filter_map(|r| r.q_vech.as_ref().map(|v| v[k]))
                .collect();
            QuantityStats::from_values(
                format!("q_{}{}", i + 1, j + 1),
                &xs,
                Some(sigma0_vech[k]),
                Some(q_se[k]),
            )
        })
        .collect();

    let mut models = Vec::new();
    let mut theta = Vec::new();
    let mut t = Vec::new();
    for (k, m) in cfg.fitted.iter().enumerate() {
        let correct = m.spec == cfg.true_spec;
        let (theta0, theta_se) = if correct {
            let se = asymptotic_cov(&cfg.true_spec, &cfg.true_theta)
                .ok()
                .map(|v| crate::lisrel::standard_errors(&v, n));
            (Some(cfg.true_theta.clone()), se)
        } else {
            (None, None)
        };
        let ok: Vec<&ModelRecord> = records
            .iter()
            .filter_map(|r| r.models.get(k))
            .filter(|m| m.is_ok())
            .collect();
        let failed = cfg.replications - ok.len();
        if failed as f64 > FAILURE_WARNING_SHARE * cfg.replications as f64 {
            let msg = format!(
                "model `{}`: {failed} of {} replications failed",
                m.name, cfg.replications
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }

        let per_param = m
            .spec
            .names()
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let xs: Vec<f64> = ok
                    .iter()
                    .filter_map(|r| r.theta_hat.as_ref().map(|v| v[j]))
                    .collect();
                QuantityStats::from_values(
                    name.clone(),
                    &xs,
                    theta0.as_ref().map(|v| v[j]),
                    theta_se.as_ref().map(|v| v[j]),
                )
            })
            .collect();
        theta.push(per_param);

        let ts: Vec<f64> = ok.iter().filter_map(|r| r.t_stat).collect();
        let sorted = stats::sorted(&ts);
        let rejections = ok.iter().filter(|r| r.reject == Some(true)).count();
        t.push(TStats {
            model: m.name.clone(),
            df: m.spec.df(),
            n: ts.len(),
            failed,
            mean: stats::mean(&ts),
            sd: stats::sample_sd(&ts),
            min: sorted.first().copied(),
            q1: stats::quantile_sorted(&sorted, 0.25),
            median: stats::quantile_sorted(&sorted, 0.5),
            q3: stats::quantile_sorted(&sorted, 0.75),
            max: sorted.last().copied(),
            rejection_rate: (!ts.is_empty()).then(|| rejections as f64 / ts.len() as f64),
        });
        models.push(ModelInfo {
            name: m.name.clone(),
            names: m.spec.names().to_vec(),
            df: m.spec.df(),
            correctly_specified: correct,
            theta0,
            theta_se,
        });
    }
    if failed_replications as f64 > FAILURE_WARNING_SHARE * cfg.replications as f64 {
        let msg = format!(
            "{failed_replications} of {} simulations failed",
            cfg.replications
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    Ok(McSummary {
        replications: cfg.replications,
        failed_replications,
        p,
        n,
        h: cfg.grid.h(),
        alpha: cfg.alpha,
        seed: cfg.seed,
        q: q_stats,
        models,
        theta,
        t,
        warnings,
        records,
        sigma0_vech,
        q_se,
    })
}
