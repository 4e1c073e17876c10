//! The simulation-study models: the true data-generating LISREL model, the
//! correctly specified fit M0 and the misspecified fits M1 and M2, together
//! with the Ornstein–Uhlenbeck blocks that drive the true model.

use nalgebra::{DMatrix, DVector};

use crate::lisrel::{Cell, MatrixTemplate, ModelSpec, ParamBounds, Templates};
use crate::simulate::{SdeBlock, SdeBlocks, SimGrid};

/// θ₀ in the parameter order of [`m0`].
pub const TRUE_THETA: [f64; 15] = [2., 3., 3., 1., 2., 2., 2., 4., 1., 4., 4., 1., 1., 9., 4.];

/// A parameter point of [`m1`] used for self-consistency checks.
pub const M1_THETA: [f64; 13] = [3., 2., 6., 3., 1.5, 2., 1., 4., 4., 1., 1., 9., 4.];

/// A parameter point of [`m2`]: θ₀ with the factor covariance dropped.
pub const M2_THETA: [f64; 14] = [2., 3., 3., 1., 2., 2., 4., 1., 4., 4., 1., 1., 9., 4.];

pub const STUDY_N: usize = 10_000;
pub const STUDY_H: f64 = 1e-3;

/// Observation grid of the study: n = 10⁴ increments of length 10⁻³ (T = 10).
pub fn study_grid() -> SimGrid {
    SimGrid::new(STUDY_N, STUDY_H).expect("valid study grid")
}

fn free(k: usize) -> Cell {
    Cell::Free(k)
}

fn one() -> Cell {
    Cell::Fixed(1.0)
}

fn signed() -> ParamBounds {
    ParamBounds::signed(0.1, 100.0).expect("valid bounds")
}

fn positive() -> ParamBounds {
    ParamBounds::interval(0.1, 100.0).expect("valid bounds")
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

// Diagonal Σ_δδ (4x4) and Σ_εε (2x2) starting at parameter `first`.
fn diagonal_uniques(t: &mut Templates, first: usize) {
    for i in 0..4 {
        t.sigma_dd.set(i, i, free(first + i)).unwrap();
    }
    for i in 0..2 {
        t.sigma_ee.set(i, i, free(first + 4 + i)).unwrap();
    }
}

/// Two correlated exogenous factors, each measured by two indicators of X1;
/// one endogenous factor measured by X2. With `xi_cov = false` Σ_ξξ is
/// diagonal (model M2).
fn two_factor(xi_cov: bool) -> Templates {
    let mut t = Templates::zeros(4, 2, 2, 1);
    t.lambda_x1 = MatrixTemplate::zeros(4, 2)
        .with(0, 0, one())
        .with(1, 0, free(0))
        .with(2, 1, one())
        .with(3, 1, free(1));
    t.lambda_x2 = MatrixTemplate::zeros(2, 1).with(0, 0, one()).with(1, 0, free(2));
    t.gamma = MatrixTemplate::zeros(1, 2).with(0, 0, free(3)).with(0, 1, free(4));
    t.sigma_xixi.set(0, 0, free(5)).unwrap();
    let next = if xi_cov {
        t.sigma_xixi.set(1, 0, free(6)).unwrap();
        t.sigma_xixi.set(1, 1, free(7)).unwrap();
        8
    } else {
        t.sigma_xixi.set(1, 1, free(6)).unwrap();
        7
    };
    diagonal_uniques(&mut t, next);
    t.sigma_zz.set(0, 0, free(next + 6)).unwrap();
    t
}

/// The correctly specified model (q = 15). Also the data-generating model
/// at θ₀ = [`TRUE_THETA`].
pub fn m0() -> ModelSpec {
    let mut bounds = vec![signed(); 5];
    bounds.push(positive());
    bounds.push(signed());
    bounds.extend(std::iter::repeat_n(positive(), 8));
    ModelSpec::new(
        two_factor(true),
        names(&[
            "l1_21", "l1_42", "l2_21", "g_11", "g_12", "sxi_11", "sxi_21", "sxi_22", "sd_11",
            "sd_22", "sd_33", "sd_44", "se_11", "se_22", "sz_11",
        ]),
        bounds,
    )
    .expect("M0 is a valid model")
}

/// The data-generating model; identical to [`m0`].
pub fn true_model() -> ModelSpec {
    m0()
}

/// One exogenous factor loading on all of X1 (q = 13).
pub fn m1() -> ModelSpec {
    let mut t = Templates::zeros(4, 2, 1, 1);
    t.lambda_x1 = MatrixTemplate::zeros(4, 1)
        .with(0, 0, one())
        .with(1, 0, free(0))
        .with(2, 0, free(1))
        .with(3, 0, free(2));
    t.lambda_x2 = MatrixTemplate::zeros(2, 1).with(0, 0, one()).with(1, 0, free(3));
    t.gamma = MatrixTemplate::zeros(1, 1).with(0, 0, free(4));
    t.sigma_xixi.set(0, 0, free(5)).unwrap();
    diagonal_uniques(&mut t, 6);
    t.sigma_zz.set(0, 0, free(12)).unwrap();
    let mut bounds = vec![signed(); 5];
    bounds.extend(std::iter::repeat_n(positive(), 8));
    ModelSpec::new(
        t,
        names(&[
            "l1_21", "l1_31", "l1_41", "l2_21", "g_11", "sxi_11", "sd_11", "sd_22", "sd_33",
            "sd_44", "se_11", "se_22", "sz_11",
        ]),
        bounds,
    )
    .expect("M1 is a valid model")
}

/// The two-factor model with uncorrelated exogenous factors (q = 14).
pub fn m2() -> ModelSpec {
    let mut bounds = vec![signed(); 5];
    bounds.extend(std::iter::repeat_n(positive(), 9));
    ModelSpec::new(
        two_factor(false),
        names(&[
            "l1_21", "l1_42", "l2_21", "g_11", "g_12", "sxi_11", "sxi_22", "sd_11", "sd_22",
            "sd_33", "sd_44", "se_11", "se_22", "sz_11",
        ]),
        bounds,
    )
    .expect("M2 is a valid model")
}

fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// OU blocks of the true model. S_i S_iᵀ reproduces the variance blocks of θ₀.
pub fn true_sde_blocks() -> SdeBlocks {
    SdeBlocks {
        xi: SdeBlock::linear_ou(
            mat(2, 2, &[0.5, 0.3, 0.2, 0.4]),
            DVector::from_vec(vec![2.0, 4.0]),
            mat(2, 2, &[1.0, 1.0, 0.0, 2.0]),
            DVector::from_vec(vec![3.0, 5.0]),
        )
        .expect("valid xi block"),
        delta: SdeBlock::linear_ou(
            DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 3.0, 2.0])),
            DVector::zeros(4),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 2.0, 1.0])),
            DVector::zeros(4),
        )
        .expect("valid delta block"),
        eps: SdeBlock::linear_ou(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])),
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])),
            DVector::zeros(2),
        )
        .expect("valid eps block"),
        zeta: SdeBlock::linear_ou(
            mat(1, 1, &[1.0]),
            DVector::zeros(1),
            mat(1, 1, &[2.0]),
            DVector::zeros(1),
        )
        .expect("valid zeta block"),
    }
}
