use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a parameterized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Fixed(f64),
    Free(usize),
    /// Equality constraint: `scale * θ[param]`.
    Tied { param: usize, scale: f64 },
}

impl Cell {
    #[inline]
    pub fn value(&self, theta: &[f64]) -> f64 {
        match *self {
            Cell::Fixed(v) => v,
            Cell::Free(k) => theta[k],
            Cell::Tied { param, scale } => scale * theta[param],
        }
    }

    /// Parameter index and the coefficient ∂cell/∂θ, if the cell depends on θ.
    #[inline]
    pub fn param(&self) -> Option<(usize, f64)> {
        match *self {
            Cell::Fixed(_) => None,
            Cell::Free(k) => Some((k, 1.0)),
            Cell::Tied { param, scale } => Some((param, scale)),
        }
    }
}

/// A matrix whose entries are fixed numbers or (scaled) references into θ.
///
/// Symmetric templates store the full grid but every write is mirrored, so
/// cells (i, j) and (j, i) always carry the same parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixTemplate {
    rows: usize,
    cols: usize,
    symmetric: bool,
    cells: Vec<Cell>,
}

impl MatrixTemplate {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            symmetric: false,
            cells: vec![Cell::Fixed(0.0); rows * cols],
        }
    }

    pub fn symmetric_zeros(dim: usize) -> Self {
        Self {
            symmetric: true,
            ..Self::zeros(dim, dim)
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, cell: Cell) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::InvalidDimension(format!(
                "cell ({}, {}) outside a {}x{} template",
                i + 1,
                j + 1,
                self.rows,
                self.cols
            )));
        }
        self.cells[i * self.cols + j] = cell;
        if self.symmetric {
            self.cells[j * self.cols + i] = cell;
        }
        Ok(())
    }

    /// Builder form of [`set`](Self::set) for literals; panics on out-of-range cells.
    pub fn with(mut self, i: usize, j: usize, cell: Cell) -> Self {
        self.set(i, j, cell).expect("cell inside template");
        self
    }

    pub fn evaluate(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.cell(i, j).value(theta))
    }

    /// ∂template/∂θ[param]: the coefficient pattern of cells referencing `param`.
    pub fn derivative(&self, param: usize) -> Option<DMatrix<f64>> {
        let mut out: Option<DMatrix<f64>> = None;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if let Some((k, c)) = self.cell(i, j).param() {
                    if k == param {
                        out.get_or_insert_with(|| DMatrix::zeros(self.rows, self.cols))[(i, j)] = c;
                    }
                }
            }
        }
        out
    }

    pub fn params(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().filter_map(|c| c.param().map(|(k, _)| k))
    }

    /// A copy with every cell referencing `param` rescaled by `factor`.
    pub fn rescale_param(&self, param: usize, factor: f64) -> Self {
        let mut out = self.clone();
        for c in out.cells.iter_mut() {
            *c = match *c {
                Cell::Free(k) if k == param => Cell::Tied { param, scale: factor },
                Cell::Tied { param: k, scale } if k == param => Cell::Tied {
                    param,
                    scale: scale * factor,
                },
                other => other,
            };
        }
        out
    }

    /// Reorders rows and (for symmetric templates) columns: row i of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let src_col = if self.symmetric { perm[j] } else { j };
                out.cells[i * self.cols + j] = self.cell(perm[i], src_col);
            }
        }
        out
    }
}

/// Admissible set of one parameter: a finite union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    intervals: Vec<(f64, f64)>,
}

impl ParamBounds {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::union(vec![(lo, hi)])
    }

    pub fn union(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidModel("bounds need at least one interval".into()));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidModel(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if intervals.windows(2).any(|w| w[1].0 <= w[0].1) {
            return Err(Error::InvalidModel("bound intervals must be disjoint".into()));
        }
        Ok(Self { intervals })
    }

    /// [-hi, -lo] ∪ [lo, hi]: a magnitude range with either sign.
    pub fn signed(lo: f64, hi: f64) -> Result<Self> {
        Self::union(vec![(-hi, -lo), (lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    /// Nearest admissible point to `x`; equidistant candidates resolve toward
    /// the sign of `current`.
    pub fn project(&self, x: f64, current: f64) -> f64 {
        if self.contains(x) {
            return x;
        }
        let mut best = f64::NAN;
        let mut best_dist = f64::INFINITY;
        for &(lo, hi) in &self.intervals {
            let cand = x.clamp(lo, hi);
            let dist = (cand - x).abs();
            let tie = (dist - best_dist).abs() <= 1e-15 * dist.max(1.0);
            if dist < best_dist && !tie {
                best = cand;
                best_dist = dist;
            } else if tie && cand.signum() == current.signum() {
                best = cand;
            }
        }
        best
    }

    /// Uniform draw over the admissible set (each interval weighted by its length).
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let total: f64 = self.intervals.iter().map(|(lo, hi)| hi - lo).sum();
        if total == 0.0 {
            return self.intervals[0].0;
        }
        let mut u = rng.random::<f64>() * total;
        for &(lo, hi) in &self.intervals {
            let len = hi - lo;
            if u <= len {
                return lo + u;
            }
            u -= len;
        }
        self.upper()
    }

    /// Whether `x` sits on an interval endpoint, and on which side: `-1` for
    /// a lower endpoint, `+1` for an upper one.
    pub fn at_endpoint(&self, x: f64) -> Option<i8> {
        for &(lo, hi) in &self.intervals {
            if x == lo {
                return Some(-1);
            }
            if x == hi {
                return Some(1);
            }
        }
        None
    }
}
