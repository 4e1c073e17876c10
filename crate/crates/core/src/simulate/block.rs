use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Drift function b(x) of a general diffusion block.
pub type DriftFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Drift {
    /// b(x) = −(A x − μ).
    LinearOu { a: DMatrix<f64>, mu: DVector<f64> },
    General(DriftFn),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::LinearOu { a, mu } => f
                .debug_struct("LinearOu")
                .field("a", a)
                .field("mu", mu)
                .finish(),
            Drift::General(_) => f.write_str("General(<fn>)"),
        }
    }
}

/// One latent diffusion dX = b(X) dt + S dW, X₀ = c, with W of dimension r.
#[derive(Debug, Clone)]
pub struct SdeBlock {
    drift: Drift,
    diffusion: DMatrix<f64>,
    init: DVector<f64>,
}

impl SdeBlock {
    pub fn linear_ou(
        a: DMatrix<f64>,
        mu: DVector<f64>,
        diffusion: DMatrix<f64>,
        init: DVector<f64>,
    ) -> Result<Self> {
        let dim = diffusion.nrows();
        if a.shape() != (dim, dim) || mu.len() != dim {
            return Err(Error::InvalidDimension(format!(
                "OU block of dimension {dim} needs a {dim}x{dim} A and a length-{dim} mu"
            )));
        }
        if a.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("OU drift has non-finite entries".into()));
        }
        Self::new(Drift::LinearOu { a, mu }, diffusion, init)
    }

    pub fn general(drift: DriftFn, diffusion: DMatrix<f64>, init: DVector<f64>) -> Result<Self> {
        Self::new(Drift::General(drift), diffusion, init)
    }

    fn new(drift: Drift, diffusion: DMatrix<f64>, init: DVector<f64>) -> Result<Self> {
        let (dim, r) = diffusion.shape();
        if dim == 0 || r == 0 {
            return Err(Error::InvalidDimension(
                "diffusion matrix must be at least 1x1".into(),
            ));
        }
        if init.len() != dim {
            return Err(Error::InvalidDimension(format!(
                "initial value has length {}, block dimension is {dim}",
                init.len()
            )));
        }
        if diffusion.iter().chain(init.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericInput(
                "diffusion or initial value has non-finite entries".into(),
            ));
        }
        Ok(Self {
            drift,
            diffusion,
            init,
        })
    }

    pub fn dim(&self) -> usize {
        self.diffusion.nrows()
    }

    /// Dimension r of the driving Wiener process.
    pub fn noise_dim(&self) -> usize {
        self.diffusion.ncols()
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn init(&self) -> &DVector<f64> {
        &self.init
    }

    /// S Sᵀ, the instantaneous covariance of the block.
    pub fn instantaneous_cov(&self) -> DMatrix<f64> {
        &self.diffusion * self.diffusion.transpose()
    }

    fn drift_at(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.drift {
            Drift::LinearOu { a, mu } => mu - a * x,
            Drift::General(b) => b(x),
        }
    }
}

/// Uniform observation grid t_i = i h, i = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimGrid {
    n: usize,
    h: f64,
    substeps: usize,
}

impl SimGrid {
    /// Euler refinement defaults to 10 substeps per observation step.
    pub fn new(n: usize, h: f64) -> Result<Self> {
        Self::with_substeps(n, h, 10)
    }

    pub fn with_substeps(n: usize, h: f64, substeps: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("grid needs n >= 1".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("step h must be positive, got {h}")));
        }
        if substeps == 0 {
            return Err(Error::InvalidDimension("grid needs at least one substep".into()));
        }
        Ok(Self { n, h, substeps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Horizon T = n h.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// How a block is advanced between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Exact Gaussian transition for OU blocks, Euler–Maruyama otherwise.
    #[default]
    Auto,
    /// Euler–Maruyama with the grid's substeps for every block.
    Euler,
}

/// One-step exact transition of an OU block: X' = Φ X + g + L Z.
#[derive(Debug, Clone)]
pub struct OuTransition {
    pub phi: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl OuTransition {
    pub fn new(a: &DMatrix<f64>, mu: &DVector<f64>, ss: &DMatrix<f64>, h: f64) -> Self {
        let d = a.nrows();
        // exp([[−A, μ], [0, 0]] h) = [[Φ, g], [0, 1]]
        let mut aug = DMatrix::zeros(d + 1, d + 1);
        aug.view_mut((0, 0), (d, d)).copy_from(&(-a * h));
        aug.view_mut((0, d), (d, 1)).copy_from(&(mu * h));
        let e = aug.exp();
        let phi = e.view((0, 0), (d, d)).into_owned();
        let offset = e.view((0, d), (d, 1)).column(0).into_owned();

        // Van Loan: exp([[A, SSᵀ], [0, −Aᵀ]] h) = [[·, F₁₂], [0, F₂₂]], C = F₂₂ᵀ F₁₂.
        let mut vl = DMatrix::zeros(2 * d, 2 * d);
        vl.view_mut((0, 0), (d, d)).copy_from(&(a * h));
        vl.view_mut((0, d), (d, d)).copy_from(&(ss * h));
        vl.view_mut((d, d), (d, d)).copy_from(&(-a.transpose() * h));
        let f = vl.exp();
        let f12 = f.view((0, d), (d, d));
        let f22 = f.view((d, d), (d, d));
        let c = f22.transpose() * f12;
        let cov = (&c + c.transpose()) * 0.5;
        let factor = covariance_factor(&cov);
        Self {
            phi,
            offset,
            cov,
            factor,
        }
    }
}

/// L with L Lᵀ = C: Cholesky, or V √Λ₊ when C is only semidefinite.
pub(crate) fn covariance_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = c.clone().cholesky() {
        return ch.l();
    }
    let eig = c.clone().symmetric_eigen();
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

fn normals(rng: &mut impl Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.sample(StandardNormal))
}

/// Path of one block on the grid, (n+1) x dim with row i at t_i.
pub fn simulate_block(
    block: &SdeBlock,
    grid: &SimGrid,
    scheme: Scheme,
    label: &str,
    rng: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    let d = block.dim();
    let n = grid.n();
    let mut path = DMatrix::zeros(n + 1, d);
    path.row_mut(0).copy_from(&block.init().transpose());
    let mut x = block.init().clone();

    if let (Scheme::Auto, Drift::LinearOu { a, mu }) = (scheme, block.drift()) {
        let tr = OuTransition::new(a, mu, &block.instantaneous_cov(), grid.h());
        for i in 1..=n {
            let z = normals(rng, d);
            x = &tr.phi * &x + &tr.offset + &tr.factor * z;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(diverged(label, i));
            }
            path.row_mut(i).copy_from(&x.transpose());
        }
        return Ok(path);
    }

    let m = grid.substeps();
    let dt = grid.h() / m as f64;
    let sqdt = dt.sqrt();
    let r = block.noise_dim();
    for i in 1..=n {
        for _ in 0..m {
            let b = block.drift_at(&x);
            if b.iter().any(|v| !v.is_finite()) {
                return Err(diverged(label, i));
            }
            x += b * dt + block.diffusion() * normals(rng, r) * sqdt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(diverged(label, i));
        }
        path.row_mut(i).copy_from(&x.transpose());
    }
    Ok(path)
}

fn diverged(label: &str, step: usize) -> Error {
    Error::SimulationDiverged {
        block: label.to_string(),
        step,
    }
}
