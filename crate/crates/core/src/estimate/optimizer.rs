//! Projected BFGS over a product of interval unions.
//!
//! Iterates stay feasible: every trial point is projected coordinate-wise
//! onto its admissible set. Coordinates sitting on an endpoint with the
//! gradient pointing outward are frozen for the step. Objective values of
//! +∞ act as a barrier and force backtracking.

use nalgebra::{DMatrix, DVector};

use crate::lisrel::ParamBounds;

pub(crate) trait Objective {
    /// f(x), or +∞ where undefined.
    fn value(&self, x: &[f64]) -> f64;
    /// (f(x), ∇f(x)), or `None` where undefined.
    fn value_grad(&self, x: &[f64]) -> Option<(f64, DVector<f64>)>;
    /// A positive definite curvature model at x, used to seed the Hessian
    /// approximation whenever the quasi-Newton memory is (re)started.
    fn curvature(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    /// Stop once |ΔF| stays below this for a few consecutive iterations.
    pub f_tol: f64,
    /// Stop once the projected gradient's max-norm falls below this.
    pub g_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected gradient norm above which a stopped run is not called converged.
const STATIONARITY: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const SMALL_DF_STREAK: usize = 3;
/// Upper limit on the width of the band around an endpoint treated as active.
const ACTIVE_BAND: f64 = 1e-6;

fn project(bounds: &[ParamBounds], x: &DVector<f64>, current: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| bounds[j].project(x[j], current[j]))
}

// Coordinates within `band` of an endpoint whose gradient points out of the set.
fn active_set(bounds: &[ParamBounds], x: &DVector<f64>, g: &DVector<f64>, band: f64) -> Vec<bool> {
    (0..x.len())
        .map(|j| {
            bounds[j].intervals().iter().any(|&(lo, hi)| {
                (x[j] - lo <= band && x[j] >= lo && g[j] > 0.0)
                    || (hi - x[j] <= band && x[j] <= hi && g[j] < 0.0)
            })
        })
        .collect()
}

// ‖x − P(x − g)‖∞, zero exactly at a stationary point of the constrained problem.
fn stationarity(bounds: &[ParamBounds], x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    (&project(bounds, &(x - g), x) - x).amax()
}

fn projected_gradient(g: &DVector<f64>, active: &[bool]) -> DVector<f64> {
    DVector::from_fn(g.len(), |j, _| if active[j] { 0.0 } else { g[j] })
}

// Solves B_FF d_F = −g_F on the free coordinates; active ones stay at 0.
fn reduced_step(b: &DMatrix<f64>, g: &DVector<f64>, active: &[bool]) -> Option<DVector<f64>> {
    let free: Vec<usize> = (0..g.len()).filter(|&j| !active[j]).collect();
    let bff = DMatrix::from_fn(free.len(), free.len(), |i, k| b[(free[i], free[k])]);
    let gf = DVector::from_fn(free.len(), |i, _| g[free[i]]);
    let df = bff.cholesky()?.solve(&gf);
    let mut d = DVector::zeros(g.len());
    for (i, &j) in free.iter().enumerate() {
        d[j] = -df[i];
    }
    Some(d)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Memory {
    /// BFGS-updated model.
    Learned,
    /// Freshly taken from the objective's curvature model.
    Curvature,
    /// Scaled identity, i.e. projected steepest descent.
    Identity,
}

pub(crate) fn minimize(
    objective: &impl Objective,
    bounds: &[ParamBounds],
    x0: &[f64],
    settings: Settings,
) -> Option<Outcome> {
    let q = x0.len();
    let start = DVector::from_column_slice(x0);
    let mut x = project(bounds, &start, &start);
    let (mut f, mut g) = objective.value_grad(x.as_slice())?;
    if !f.is_finite() {
        return None;
    }
    let curvature = |x: &DVector<f64>| {
        objective
            .curvature(x.as_slice())
            .filter(|c| c.clone().cholesky().is_some())
    };
    let (mut b, mut memory) = match curvature(&x) {
        Some(c) => (c, Memory::Curvature),
        None => (DMatrix::identity(q, q), Memory::Identity),
    };
    let mut small_df = 0;
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < settings.max_iter {
        let band = stationarity(bounds, &x, &g).min(ACTIVE_BAND);
        let active = active_set(bounds, &x, &g, band);
        let pg = projected_gradient(&g, &active);
        if pg.amax() <= settings.g_tol {
            break;
        }
        iterations += 1;

        let mut d = match reduced_step(&b, &g, &active) {
            Some(d) if g.dot(&d) < 0.0 => d,
            _ => {
                b = DMatrix::identity(q, q);
                memory = Memory::Identity;
                -pg.clone()
            }
        };
        if memory == Memory::Identity {
            // Unit step of the scaled steepest descent moves at most one unit.
            d /= d.amax().max(1.0);
        }

        // Backtracking along the projected path x(α) = P(x + αd).
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let trial = project(bounds, &(&x + &d * alpha), &x);
            let ft = objective.value(trial.as_slice());
            if ft.is_finite() && ft <= f + ARMIJO * g.dot(&(&trial - &x)) {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(x_new) = accepted else {
            match memory {
                Memory::Identity => {
                    stalled = true;
                    break;
                }
                Memory::Learned => match curvature(&x) {
                    Some(c) => {
                        b = c;
                        memory = Memory::Curvature;
                    }
                    None => {
                        b = DMatrix::identity(q, q);
                        memory = Memory::Identity;
                    }
                },
                Memory::Curvature => {
                    b = DMatrix::identity(q, q);
                    memory = Memory::Identity;
                }
            }
            continue;
        };
        let Some((f_new, g_new)) = objective.value_grad(x_new.as_slice()) else {
            stalled = true;
            break;
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if memory == Memory::Identity {
                b = DMatrix::identity(q, q) * (y.dot(&y) / sy);
            }
            // B⁺ = B − BssᵀB / sᵀBs + yyᵀ / sᵀy
            let bs = &b * &s;
            let sbs = s.dot(&bs);
            if sbs > 0.0 {
                b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
                b = (&b + b.transpose()) * 0.5;
                memory = Memory::Learned;
            }
        }

        let df = (f - f_new).abs();
        x = x_new;
        f = f_new;
        g = g_new;
        if df < settings.f_tol {
            small_df += 1;
            if small_df >= SMALL_DF_STREAK {
                break;
            }
        } else {
            small_df = 0;
        }
    }

    let band = stationarity(bounds, &x, &g).min(ACTIVE_BAND);
    let grad_norm = projected_gradient(&g, &active_set(bounds, &x, &g, band)).amax();
    let converged = grad_norm <= STATIONARITY || (grad_norm <= settings.g_tol && !stalled);
    Some(Outcome {
        x: x.iter().copied().collect(),
        f,
        grad_norm,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
        scale: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((x, c), s)| s * (x - c).powi(2))
                .sum()
        }
        fn value_grad(&self, x: &[f64]) -> Option<(f64, DVector<f64>)> {
            let g = DVector::from_fn(x.len(), |j, _| 2.0 * self.scale[j] * (x[j] - self.center[j]));
            Some((self.value(x), g))
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn value_grad(&self, x: &[f64]) -> Option<(f64, DVector<f64>)> {
            let g0 = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            let g1 = 200.0 * (x[1] - x[0] * x[0]);
            Some((self.value(x), DVector::from_vec(vec![g0, g1])))
        }
    }

    fn settings() -> Settings {
        Settings {
            f_tol: 1e-14,
            g_tol: 1e-10,
            max_iter: 500,
        }
    }

    #[test]
    fn interior_minimum() {
        let obj = Quadratic {
            center: vec![1.0, -2.0, 30.0],
            scale: vec![1.0, 10.0, 0.01],
        };
        let b = vec![ParamBounds::interval(-100.0, 100.0).unwrap(); 3];
        let out = minimize(&obj, &b, &[5.0, 5.0, 5.0], settings()).unwrap();
        assert!(out.converged);
        for (x, c) in out.x.iter().zip(&obj.center) {
            assert!((x - c).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock() {
        let b = vec![ParamBounds::interval(-5.0, 5.0).unwrap(); 2];
        let out = minimize(&Rosenbrock, &b, &[-1.2, 1.0], settings()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn minimum_on_the_box_edge() {
        let obj = Quadratic {
            center: vec![-3.0, 0.5],
            scale: vec![1.0, 1.0],
        };
        let b = vec![
            ParamBounds::interval(0.1, 10.0).unwrap(),
            ParamBounds::interval(0.0, 1.0).unwrap(),
        ];
        let out = minimize(&obj, &b, &[4.0, 0.9], settings()).unwrap();
        assert_eq!(out.x[0], 0.1);
        assert!((out.x[1] - 0.5).abs() < 1e-9);
        assert!(out.converged);
    }

    #[test]
    fn union_bounds_stay_on_sign_side() {
        // Minimum at 0 lies in the excluded gap; start on the negative side.
        let obj = Quadratic {
            center: vec![0.0],
            scale: vec![1.0],
        };
        let b = vec![ParamBounds::signed(0.1, 100.0).unwrap()];
        let out = minimize(&obj, &b, &[-40.0], settings()).unwrap();
        assert_eq!(out.x[0], -0.1);
        let out = minimize(&obj, &b, &[40.0], settings()).unwrap();
        assert_eq!(out.x[0], 0.1);
    }

    #[test]
    fn infeasible_start_is_none() {
        struct Nowhere;
        impl Objective for Nowhere {
            fn value(&self, _: &[f64]) -> f64 {
                f64::INFINITY
            }
            fn value_grad(&self, _: &[f64]) -> Option<(f64, DVector<f64>)> {
                None
            }
        }
        let b = vec![ParamBounds::interval(0.0, 1.0).unwrap()];
        assert!(minimize(&Nowhere, &b, &[0.5], settings()).is_none());
    }

    #[test]
    fn barrier_forces_backtracking() {
        // f = (x − 3)² but undefined beyond x = 2.
        struct Fenced;
        impl Objective for Fenced {
            fn value(&self, x: &[f64]) -> f64 {
                if x[0] > 2.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 3.0).powi(2)
                }
            }
            fn value_grad(&self, x: &[f64]) -> Option<(f64, DVector<f64>)> {
                (x[0] <= 2.0).then(|| (self.value(x), DVector::from_element(1, 2.0 * (x[0] - 3.0))))
            }
        }
        let b = vec![ParamBounds::interval(-10.0, 10.0).unwrap()];
        let out = minimize(&Fenced, &b, &[0.0], settings()).unwrap();
        assert!(out.x[0] <= 2.0 && out.x[0] > 1.99);
        assert!(!out.converged);
    }
}
