use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{ls_slope, quantile_sorted, sorted};
use super::McSummary;
use crate::error::{Error, Result};
use crate::matstat::{chi2_quantile, normal_quantile, vech_index};

/// A per-replication quantity whose sampling distribution is inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// √n((Q_XX)ᵢⱼ − Σᵢⱼ)/√Wₖₖ with 0-based (i, j), against N(0, 1).
    Q { i: usize, j: usize },
    /// √n(θ̂ⱼ − θ₀ⱼ) standardized by its asymptotic SD, against N(0, 1).
    /// Only defined for the correctly specified model.
    Theta { model: usize, param: usize },
    /// The test statistic of a fitted model, against χ²_df.
    T { model: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    /// `hist`, `qq` or `ecdf`.
    pub series: String,
    /// Bin start, theoretical quantile, or sample value.
    pub x: f64,
    /// Bin end for histogram rows.
    pub x_hi: Option<f64>,
    /// Bin count, sample quantile, or ECDF height.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub label: String,
    pub n: usize,
    pub qq_slope: Option<f64>,
    pub rows: Vec<DiagRow>,
}

impl Diagnostics {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "series,x,x_hi,y")?;
        for r in &self.rows {
            let hi = r.x_hi.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.series, r.x, hi, r.y)?;
        }
        Ok(())
    }
}

enum Reference {
    Normal,
    ChiSquared(u32),
}

impl Reference {
    fn quantile(&self, p: f64) -> Result<f64> {
        match *self {
            Reference::Normal => normal_quantile(p),
            Reference::ChiSquared(df) => chi2_quantile(1.0 - p, df),
        }
    }
}

fn extract(summary: &McSummary, which: Quantity) -> Result<(String, Vec<f64>, Reference)> {
    match which {
        Quantity::Q { i, j } => {
            let p = summary.p;
            if i >= p || j >= p {
                return Err(Error::InvalidDimension(format!("no Q entry ({i},{j})")));
            }
            let k = vech_index(p, i, j);
            let (s0, se) = (summary.sigma0_vech[k], summary.q_se[k]);
            let xs = summary
                .records
                .iter()
                .filter_map(|r| r.q_vech.as_ref().map(|v| (v[k] - s0) / se))
                .collect();
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            Ok((format!("q_{}{}", a + 1, b + 1), xs, Reference::Normal))
        }
        Quantity::Theta { model, param } => {
            let info = summary
                .models
                .get(model)
                .ok_or_else(|| Error::Domain(format!("no fitted model {model}")))?;
            let (Some(theta0), Some(se)) = (&info.theta0, &info.theta_se) else {
                return Err(Error::Domain(format!(
                    "model `{}` is not the data-generating model; no reference law for θ̂",
                    info.name
                )));
            };
            let name = info
                .names
                .get(param)
                .ok_or_else(|| Error::Domain(format!("no parameter {param}")))?;
            let xs = summary
                .records
                .iter()
                .filter_map(|r| r.models.get(model)?.theta_hat.as_ref())
                .map(|t| (t[param] - theta0[param]) / se[param])
                .collect();
            Ok((format!("theta_{}_{}", info.name, name), xs, Reference::Normal))
        }
        Quantity::T { model } => {
            let info = summary
                .models
                .get(model)
                .ok_or_else(|| Error::Domain(format!("no fitted model {model}")))?;
            if info.df < 1 {
                return Err(Error::Saturated { df: info.df });
            }
            let xs = summary
                .records
                .iter()
                .filter_map(|r| r.models.get(model)?.t_stat)
                .collect();
            Ok((
                format!("t_{}", info.name),
                xs,
                Reference::ChiSquared(info.df as u32),
            ))
        }
    }
}

fn histogram(sorted: &[f64]) -> Vec<DiagRow> {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let iqr = quantile_sorted(sorted, 0.75).unwrap_or(0.0) - quantile_sorted(sorted, 0.25).unwrap_or(0.0);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).clamp(1, 10_000)
    } else {
        1
    };
    let step = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in sorted {
        let b = (((x - lo) / step) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| DiagRow {
            series: "hist".into(),
            x: lo + b as f64 * step,
            x_hi: Some(if b + 1 == bins { hi.max(lo + step) } else { lo + (b + 1) as f64 * step }),
            y: c as f64,
        })
        .collect()
}

/// Histogram (Freedman–Diaconis bins), QQ pairs against the reference law
/// and ECDF points for each requested quantity.
///
/// A single replication yields one ECDF row and nothing else. An empty
/// selection logs a warning and returns nothing.
pub fn emit_diagnostics(summary: &McSummary, which: &[Quantity]) -> Result<Vec<Diagnostics>> {
    if which.is_empty() {
        log::warn!("emit_diagnostics called with no quantities");
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(which.len());
    for &w in which {
        let (label, xs, reference) = extract(summary, w)?;
        let s = sorted(&xs);
        let n = s.len();
        let mut rows = Vec::new();
        let mut qq = Vec::new();
        if n >= 2 {
            rows.extend(histogram(&s));
            for (i, &x) in s.iter().enumerate() {
                let p = (i as f64 + 0.5) / n as f64;
                qq.push((reference.quantile(p)?, x));
            }
            rows.extend(qq.iter().map(|&(t, x)| DiagRow {
                series: "qq".into(),
                x: t,
                x_hi: None,
                y: x,
            }));
        }
        rows.extend(s.iter().enumerate().map(|(i, &x)| DiagRow {
            series: "ecdf".into(),
            x,
            x_hi: None,
            y: (i + 1) as f64 / n as f64,
        }));
        out.push(Diagnostics {
            label,
            n,
            qq_slope: ls_slope(&qq),
            rows,
        });
    }
    Ok(out)
}
