//! Latent diffusion paths and the observed high-frequency series they induce.
//!
//! Each of the four latent blocks (ξ, δ, ε, ζ) is driven by its own Wiener
//! process. Randomness comes from one ChaCha20 stream per (replication, block)
//! pair, so a replication's paths do not depend on which thread produced them.

mod block;
mod io;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use block::{
    simulate_block, Drift, DriftFn, OuTransition, Scheme, SdeBlock, SimGrid,
};
pub use io::{read_observed_csv, write_paths_csv, ObservedSeries};

use crate::error::{Error, Result};
use crate::lisrel::{ModelMatrices, ModelSpec};

/// Relative tolerance for S Sᵀ against the variance blocks of θ.
pub const DIFFUSION_MATCH_TOL: f64 = 1e-10;

/// The four latent blocks of a LISREL diffusion model.
#[derive(Debug, Clone)]
pub struct SdeBlocks {
    pub xi: SdeBlock,
    pub delta: SdeBlock,
    pub eps: SdeBlock,
    pub zeta: SdeBlock,
}

impl SdeBlocks {
    fn iter(&self) -> [(&'static str, &SdeBlock); 4] {
        [
            ("xi", &self.xi),
            ("delta", &self.delta),
            ("eps", &self.eps),
            ("zeta", &self.zeta),
        ]
    }
}

/// Seed record of a simulated bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub replication: u64,
}

/// Stream of one Wiener block within one replication.
pub fn block_rng(seed: u64, replication: u64, block: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((replication << 2) | (block & 3));
    rng
}

/// Latent and observed paths on the grid; row i of every matrix is time t_i.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: SimGrid,
    pub xi: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub eps: DMatrix<f64>,
    pub zeta: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub seed: SeedRecord,
}

impl PathBundle {
    /// X = (X1, X2), (n+1) x p.
    pub fn observed(&self) -> DMatrix<f64> {
        let (rows, p1, p2) = (self.x1.nrows(), self.x1.ncols(), self.x2.ncols());
        let mut x = DMatrix::zeros(rows, p1 + p2);
        x.columns_mut(0, p1).copy_from(&self.x1);
        x.columns_mut(p1, p2).copy_from(&self.x2);
        x
    }
}

fn check_block(name: &str, block: &SdeBlock, target: &DMatrix<f64>) -> Result<()> {
    if block.dim() != target.nrows() {
        return Err(Error::ConfigInconsistency(format!(
            "{name} block has dimension {}, model expects {}",
            block.dim(),
            target.nrows()
        )));
    }
    let ss = block.instantaneous_cov();
    let scale = target.amax().max(1.0);
    let gap = (&ss - target).amax();
    if gap > DIFFUSION_MATCH_TOL * scale {
        return Err(Error::ConfigInconsistency(format!(
            "{name} block: S Sᵀ differs from the model's variance block by {gap:e}"
        )));
    }
    Ok(())
}

/// Checks that each block's S Sᵀ equals the matching variance block of θ.
pub fn check_consistency(spec: &ModelSpec, theta: &[f64], blocks: &SdeBlocks) -> Result<()> {
    let mm = ModelMatrices::evaluate(spec, theta)?;
    check_block("xi", &blocks.xi, &mm.sigma_xixi)?;
    check_block("delta", &blocks.delta, &mm.sigma_dd)?;
    check_block("eps", &blocks.eps, &mm.sigma_ee)?;
    check_block("zeta", &blocks.zeta, &mm.sigma_zz)
}

/// Simulates replication 0 of `seed`.
pub fn simulate_model(
    spec: &ModelSpec,
    theta: &[f64],
    blocks: &SdeBlocks,
    grid: &SimGrid,
    seed: u64,
) -> Result<PathBundle> {
    simulate_replication(spec, theta, blocks, grid, Scheme::Auto, seed, 0)
}

/// Simulates one replication: latent blocks on independent streams, then
/// X1 = ξΛ₁ᵀ + δ and X2 = (ξΓᵀ + ζ)(Λ₂Ψ⁻¹)ᵀ + ε row by row.
pub fn simulate_replication(
    spec: &ModelSpec,
    theta: &[f64],
    blocks: &SdeBlocks,
    grid: &SimGrid,
    scheme: Scheme,
    seed: u64,
    replication: u64,
) -> Result<PathBundle> {
    check_consistency(spec, theta, blocks)?;
    let mm = ModelMatrices::evaluate(spec, theta)?;
    let mut paths = Vec::with_capacity(4);
    for (k, (name, block)) in blocks.iter().into_iter().enumerate() {
        let mut rng = block_rng(seed, replication, k as u64);
        paths.push(simulate_block(block, grid, scheme, name, &mut rng)?);
    }
    let zeta = paths.pop().unwrap();
    let eps = paths.pop().unwrap();
    let delta = paths.pop().unwrap();
    let xi = paths.pop().unwrap();

    let x1 = &xi * mm.lambda_x1.transpose() + &delta;
    let l2_psi = &mm.lambda_x2 * &mm.psi_inv;
    let x2 = (&xi * mm.gamma.transpose() + &zeta) * l2_psi.transpose() + &eps;
    Ok(PathBundle {
        grid: *grid,
        xi,
        delta,
        eps,
        zeta,
        x1,
        x2,
        seed: SeedRecord { seed, replication },
    })
}
