use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::diag::{emit_diagnostics, Quantity};
use super::McSummary;
use crate::error::Result;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// The default diagnostic set: every Q entry, every parameter of the
/// correctly specified model, and every model's test statistic.
pub fn default_quantities(summary: &McSummary) -> Vec<Quantity> {
    let mut out = Vec::new();
    for j in 0..summary.p {
        for i in j..summary.p {
            out.push(Quantity::Q { i, j });
        }
    }
    for (model, info) in summary.models.iter().enumerate() {
        if info.theta0.is_some() && info.theta_se.is_some() {
            out.extend((0..info.names.len()).map(|param| Quantity::Theta { model, param }));
        }
        if info.df >= 1 {
            out.push(Quantity::T { model });
        }
    }
    out
}

/// Writes `summary.json`, `table_q.csv`, `table_theta.csv`, `table_t.csv`
/// and one `diag_<quantity>.csv` per default diagnostic into `dir`.
pub fn write_outputs(summary: &McSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, summary)
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    writeln!(w)?;

    let mut w = create(dir, "table_q.csv")?;
    writeln!(w, "quantity,n,mean,sd,theoretical,theoretical_sd")?;
    for s in &summary.q {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.name,
            s.n,
            opt(s.mean),
            opt(s.sd),
            opt(s.theoretical),
            opt(s.theoretical_sd)
        )?;
    }

    let mut w = create(dir, "table_theta.csv")?;
    writeln!(w, "model,parameter,n,mean,sd,theoretical,theoretical_sd")?;
    for (info, params) in summary.models.iter().zip(&summary.theta) {
        for s in params {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                info.name,
                s.name,
                s.n,
                opt(s.mean),
                opt(s.sd),
                opt(s.theoretical),
                opt(s.theoretical_sd)
            )?;
        }
    }

    let mut w = create(dir, "table_t.csv")?;
    writeln!(
        w,
        "model,df,n,failed,mean,sd,theoretical_mean,theoretical_sd,min,q1,median,q3,max,rejection_rate"
    )?;
    for t in &summary.t {
        let df = t.df as f64;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.model,
            t.df,
            t.n,
            t.failed,
            opt(t.mean),
            opt(t.sd),
            df,
            (2.0 * df).sqrt(),
            opt(t.min),
            opt(t.q1),
            opt(t.median),
            opt(t.q3),
            opt(t.max),
            opt(t.rejection_rate)
        )?;
    }

    for d in emit_diagnostics(summary, &default_quantities(summary))? {
        let mut w = create(dir, &format!("diag_{}.csv", d.label))?;
        d.write_csv(&mut w)?;
    }
    Ok(())
}
