use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use super::PathBundle;
use crate::error::{Error, Result};

/// Observed series read back from a path dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    pub h: f64,
    pub p1: usize,
    pub p2: usize,
    /// (n+1) x (p1 + p2), columns X1 then X2.
    pub data: DMatrix<f64>,
}

fn header(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |j| format!("{prefix}_{j}"))
}

/// Writes `t,x1_1..x1_p1,x2_1..x2_p2` (plus latent columns when asked).
///
/// Numbers use Rust's shortest round-trip formatting, so reading the file
/// back reproduces every value bit for bit.
pub fn write_paths_csv(bundle: &PathBundle, out: &mut impl Write, latents: bool) -> Result<()> {
    let mut blocks: Vec<(&str, &DMatrix<f64>)> = vec![("x1", &bundle.x1), ("x2", &bundle.x2)];
    if latents {
        blocks.extend([
            ("xi", &bundle.xi),
            ("delta", &bundle.delta),
            ("eps", &bundle.eps),
            ("zeta", &bundle.zeta),
        ]);
    }
    let mut cols = vec!["t".to_string()];
    for (name, m) in &blocks {
        cols.extend(header(name, m.ncols()));
    }
    writeln!(out, "{}", cols.join(","))?;
    let h = bundle.grid.h();
    let mut line = String::new();
    for i in 0..bundle.x1.nrows() {
        line.clear();
        line.push_str(&format!("{}", i as f64 * h));
        for (_, m) in &blocks {
            for v in m.row(i).iter() {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads the observed columns of a path dump. The step h is `t₁ − t₀`.
pub fn read_observed_csv(input: impl Read) -> Result<ObservedSeries> {
    let mut lines = BufReader::new(input).lines();
    let head = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::InsufficientData("empty data file".into())),
    };
    let names: Vec<&str> = head.trim().split(',').collect();
    if names.first() != Some(&"t") {
        return Err(Error::InvalidDimension("first column must be `t`".into()));
    }
    let pick = |prefix: &str| -> Vec<usize> {
        let mut idx = Vec::new();
        for j in 1.. {
            match names.iter().position(|n| *n == format!("{prefix}_{j}")) {
                Some(k) => idx.push(k),
                None => break,
            }
        }
        idx
    };
    let c1 = pick("x1");
    let c2 = pick("x2");
    if c1.is_empty() {
        return Err(Error::InvalidDimension("no x1_* columns in header".into()));
    }
    let cols: Vec<usize> = c1.iter().chain(&c2).copied().collect();

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::InvalidDimension(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                names.len(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::NumericInput(format!("line {}: cannot parse `{s}`", lineno + 2))
            })
        };
        times.push(parse(fields[0])?);
        for &k in &cols {
            values.push(parse(fields[k])?);
        }
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two observations".into(),
        ));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::Domain("time column must be increasing".into()));
    }
    let data = DMatrix::from_row_slice(times.len(), cols.len(), &values);
    Ok(ObservedSeries {
        h,
        p1: c1.len(),
        p2: c2.len(),
        data,
    })
}
