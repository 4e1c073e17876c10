use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before the input is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

/// A real symmetric matrix with exact mirror symmetry.
///
/// The lower triangle is authoritative: constructors copy it onto the upper
/// triangle so `m[(i, j)] == m[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry (relative tolerance 1e-10) and finiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        for j in 0..m.ncols() {
            for i in (j + 1)..m.nrows() {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_lower(m))
    }

    /// Mirrors the lower triangle of a square matrix without checking the upper one.
    pub fn from_lower(mut m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "from_lower needs a square matrix");
        assert!(m.nrows() > 0, "from_lower needs a non-empty matrix");
        for j in 0..m.ncols() {
            for i in (j + 1)..m.nrows() {
                m[(j, i)] = m[(i, j)];
            }
        }
        Self(m)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds from row-major nested rows; convenient for literals in tests and fixtures.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDimension("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn cholesky(&self) -> Option<Cholesky<f64, Dyn>> {
        Cholesky::new(self.0.clone())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_some()
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &SymMatrix, t: f64) -> SymMatrix {
        SymMatrix::from_lower(&self.0 * (1.0 - t) + &other.0 * t)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `vech` of a symmetric `p x p` matrix: column-major stacking of the lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfVec {
    dim: usize,
    data: DVector<f64>,
}

impl HalfVec {
    pub fn new(dim: usize, data: DVector<f64>) -> Result<Self> {
        if dim == 0 || data.len() != half_len(dim) {
            return Err(Error::InvalidDimension(format!(
                "half-vector of a {dim}x{dim} matrix needs {} entries, got {}",
                half_len(dim),
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// p̄ = p(p+1)/2.
pub fn half_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Position of entry (i, j) inside `vech`; the pair is swapped when i < j.
pub fn vech_index(p: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * p - j * j.saturating_sub(1) / 2 + (i - j)
}

/// The (row, col) pairs of the lower triangle in `vech` order.
pub fn vech_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(half_len(p));
    for j in 0..p {
        for i in j..p {
            out.push((i, j));
        }
    }
    out
}

pub fn vech(a: &SymMatrix) -> HalfVec {
    let p = a.dim();
    let data = DVector::from_iterator(
        half_len(p),
        vech_pairs(p).into_iter().map(|(i, j)| a.get(i, j)),
    );
    HalfVec { dim: p, data }
}

pub fn unvech(v: &HalfVec) -> SymMatrix {
    let p = v.dim;
    let mut m = DMatrix::zeros(p, p);
    for (k, (i, j)) in vech_pairs(p).into_iter().enumerate() {
        m[(i, j)] = v.data[k];
        m[(j, i)] = v.data[k];
    }
    SymMatrix(m)
}

/// Column-major `vec` of any matrix.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}
