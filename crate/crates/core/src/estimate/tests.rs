use nalgebra::DMatrix;
use proptest::prelude::*;

use super::fit::ContrastObjective;
use super::optimizer::Objective;
use super::*;
use crate::error::Error;
use crate::lisrel::{implied_sigma, Cell, ModelSpec, ParamBounds, Templates};
use crate::matstat::SymMatrix;
use crate::reference::{m0, m1, m2, study_grid, true_sde_blocks, M1_THETA, M2_THETA, TRUE_THETA};
use crate::simulate::{simulate_model, simulate_replication, Scheme, SimGrid};

fn exact_q(spec: &ModelSpec, theta: &[f64]) -> RealizedCov {
    RealizedCov::from_matrix(implied_sigma(spec, theta).unwrap(), 10_000, 1e-3).unwrap()
}

fn study_q(seed: u64) -> RealizedCov {
    let b = simulate_model(&m0(), &TRUE_THETA, &true_sde_blocks(), &study_grid(), seed).unwrap();
    realized_cov(&b.observed(), study_grid().h()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn noiseless_recovery_from_perturbed_start() {
    let cases: [(ModelSpec, &[f64]); 3] = [(m0(), &TRUE_THETA), (m1(), &M1_THETA), (m2(), &M2_THETA)];
    for (spec, theta) in cases {
        let q = exact_q(&spec, theta);
        for gradient in [GradientMode::Numeric, GradientMode::Analytic] {
            let start: Vec<f64> = theta.iter().map(|t| t * 1.1).collect();
            let opts = FitOptions {
                gradient,
                ..FitOptions::from_init(&start)
            };
            let r = fit(&spec, &q, &opts).unwrap();
            let err = max_abs_diff(&r.theta_hat, theta);
            assert!(err < 1e-6, "q={} {gradient:?}: err {err:e}", spec.q());
            assert!(r.contrast < 1e-12);
            assert!(r.converged);
        }
    }
}

#[test]
fn exact_start_stays_put() {
    let q = exact_q(&m0(), &TRUE_THETA);
    let r = fit(&m0(), &q, &FitOptions::from_init(&TRUE_THETA)).unwrap();
    assert_eq!(r.theta_hat, TRUE_THETA.to_vec());
    assert_eq!(r.contrast, 0.0);
    assert_eq!(r.iterations, 0);
    let g = gof_test(&m0(), &r, &q, 0.05).unwrap();
    assert_eq!(g.t_stat, 0.0);
    assert_eq!(g.p_value, 1.0);
    assert!(!g.reject);
}

#[test]
fn random_starts_find_the_truth() {
    let q = exact_q(&m2(), &M2_THETA);
    let opts = FitOptions {
        n_starts: 50,
        seed: 11,
        gradient: GradientMode::Analytic,
        ..FitOptions::default()
    };
    let r = fit(&m2(), &q, &opts).unwrap();
    assert!(max_abs_diff(&r.theta_hat, &M2_THETA) < 1e-6, "{:?} F={:e} it={}", r.theta_hat, r.contrast, r.iterations);
    assert!(r.n_starts_used >= 1);
}

#[test]
fn multi_start_is_deterministic() {
    let q = study_q(3);
    let opts = FitOptions {
        n_starts: 4,
        seed: 5,
        init_override: Some(TRUE_THETA.to_vec()),
        gradient: GradientMode::Analytic,
        ..FitOptions::default()
    };
    let a = fit(&m0(), &q, &opts).unwrap();
    let b = fit(&m0(), &q, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gradients_agree_on_study_data() {
    let q = study_q(1);
    let spec = m0();
    let make = |gradient| ContrastObjective {
        spec: &spec,
        q: q.q_xx(),
        q_pd: true,
        gradient,
    };
    let theta: Vec<f64> = TRUE_THETA.iter().map(|t| t * 0.9 + 0.05).collect();
    let (fa, ga) = make(GradientMode::Analytic).value_grad(&theta).unwrap();
    let (fn_, gn) = make(GradientMode::Numeric).value_grad(&theta).unwrap();
    assert_eq!(fa, fn_);
    assert!((&ga - &gn).amax() <= 1e-6 * ga.amax());
}

#[test]
fn study_fit_close_to_truth_with_small_gradient() {
    let q = study_q(77);
    let r = fit(&m0(), &q, &FitOptions::from_init(&TRUE_THETA)).unwrap();
    assert!(r.converged);
    assert!(r.grad_norm < 1e-6);
    let se = r.se.clone().unwrap();
    for j in 0..15 {
        assert!(
            (r.theta_hat[j] - TRUE_THETA[j]).abs() < 5.0 * se[j],
            "{}: {} vs {}",
            r.names[j],
            r.theta_hat[j],
            TRUE_THETA[j]
        );
    }
    let g = gof_test(&m0(), &r, &q, 0.05).unwrap();
    assert_eq!(g.df, 6);
    assert!((g.t_stat - 1e4 * r.contrast).abs() < 1e-9 * g.t_stat.max(1.0));
    assert_eq!(g.reject, g.t_stat > g.critical_value);
    assert!((g.critical_value - 12.591587243743977).abs() < 1e-9);
}

#[test]
fn misspecified_models_have_positive_contrast() {
    let q = study_q(9);
    for (spec, df) in [(m1(), 8), (m2(), 7)] {
        let opts = FitOptions {
            n_starts: 20,
            seed: 1,
            gradient: GradientMode::Analytic,
            ..FitOptions::default()
        };
        let r = fit(&spec, &q, &opts).unwrap();
        let g = gof_test(&spec, &r, &q, 0.05).unwrap();
        assert_eq!(g.df, df);
        assert!(g.t_stat > 1000.0, "df {df}: T = {}", g.t_stat);
        assert!(g.reject);
    }
}

#[test]
fn equivariant_under_relabeling() {
    let q = study_q(21);
    let opts = FitOptions {
        tol: 0.0,
        grad_tol: 1e-13,
        gradient: GradientMode::Analytic,
        ..FitOptions::from_init(&TRUE_THETA)
    };
    let base = fit(&m0(), &q, &opts).unwrap();

    let perm1 = [2, 0, 3, 1];
    let perm2 = [1, 0];
    let spec = m0().permute_observed(&perm1, &perm2).unwrap();
    // Observed order: new index i holds old variable order[i].
    let order: Vec<usize> = perm1.iter().copied().chain(perm2.iter().map(|j| j + 4)).collect();
    let qm = q.q_xx();
    let permuted = SymMatrix::from_lower(DMatrix::from_fn(6, 6, |i, j| qm.get(order[i], order[j])));
    let qp = RealizedCov::from_matrix(permuted, q.n(), q.h()).unwrap();
    let other = fit(&spec, &qp, &opts).unwrap();
    let err = max_abs_diff(&base.theta_hat, &other.theta_hat);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn singular_q_is_estimable_but_not_testable() {
    let obs = DMatrix::from_fn(4, 6, |i, j| (i * j) as f64 * 0.1 + i as f64);
    let q = realized_cov(&obs, 0.01).unwrap();
    assert!(!q.is_pd());
    let r = fit(&m0(), &q, &FitOptions::from_init(&TRUE_THETA)).unwrap();
    assert!(r.contrast.is_finite());
    assert_eq!(gof_test(&m0(), &r, &q, 0.05), Err(Error::SingularQ));
}

#[test]
fn saturated_model_refused() {
    let mut t = Templates::zeros(1, 1, 1, 1);
    t.lambda_x1.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.lambda_x2.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.sigma_xixi.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.sigma_dd.set(0, 0, Cell::Free(0)).unwrap();
    t.gamma.set(0, 0, Cell::Free(1)).unwrap();
    t.sigma_ee.set(0, 0, Cell::Free(2)).unwrap();
    t.sigma_zz.set(0, 0, Cell::Fixed(1.0)).unwrap();
    let b = ParamBounds::interval(0.1, 10.0).unwrap();
    let spec = ModelSpec::new(t, vec!["d".into(), "g".into(), "e".into()], vec![b; 3]).unwrap();
    let theta = [1.0, 2.0, 0.5];
    let q = exact_q(&spec, &theta);
    let r = fit(&spec, &q, &FitOptions::from_init(&[2.0, 1.0, 1.0])).unwrap();
    assert!(max_abs_diff(&r.theta_hat, &theta) < 1e-6);
    assert_eq!(gof_test(&spec, &r, &q, 0.05), Err(Error::Saturated { df: 0 }));
}

#[test]
fn no_feasible_start() {
    // X2 carries no variance at all, so Σ(θ) is singular everywhere.
    let mut t = Templates::zeros(2, 1, 1, 1);
    t.lambda_x1.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.lambda_x1.set(1, 0, Cell::Free(0)).unwrap();
    t.lambda_x2.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.sigma_xixi.set(0, 0, Cell::Free(1)).unwrap();
    let b = ParamBounds::interval(0.1, 10.0).unwrap();
    let spec = ModelSpec::new(t, vec!["l".into(), "s".into()], vec![b; 2]).unwrap();
    let q = RealizedCov::from_matrix(SymMatrix::identity(3), 100, 0.1).unwrap();
    let opts = FitOptions {
        n_starts: 5,
        ..FitOptions::default()
    };
    assert_eq!(fit(&spec, &q, &opts), Err(Error::NoFeasibleStart));
}

#[test]
fn unidentified_fit_still_returns_estimate() {
    // Σ depends on θ only through a + b.
    let mut t = Templates::zeros(1, 1, 1, 1);
    t.lambda_x1.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.lambda_x2.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.sigma_xixi.set(0, 0, Cell::Free(0)).unwrap();
    t.sigma_dd.set(0, 0, Cell::Free(1)).unwrap();
    t.sigma_ee.set(0, 0, Cell::Fixed(1.0)).unwrap();
    t.sigma_zz.set(0, 0, Cell::Fixed(1.0)).unwrap();
    let b = ParamBounds::interval(0.1, 10.0).unwrap();
    let spec = ModelSpec::new(t, vec!["a".into(), "b".into()], vec![b; 2]).unwrap();
    let q = exact_q(&spec, &[2.0, 1.0]);
    let r = fit(&spec, &q, &FitOptions::from_init(&[1.0, 1.0])).unwrap();
    assert!(r.contrast < 1e-10);
    assert!(r.se.is_none() && r.vcov.is_none());
    assert!(r.identification.unwrap().contains("[H]"));
}

#[test]
fn report_fields() {
    let q = exact_q(&m0(), &TRUE_THETA);
    let r = fit(&m0(), &q, &FitOptions::from_init(&TRUE_THETA)).unwrap();
    let g = gof_test(&m0(), &r, &q, 0.05).unwrap();
    let json = serde_json::to_value(Report::new(&r, &q, Some(&g))).unwrap();
    for key in ["theta_hat", "se", "vcov", "contrast", "t_stat", "df", "p_value", "reject", "diagnostics"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["df"], 6);
    let back: FitResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn realized_cov_consistent_as_n_grows() {
    // Fixed T = 10: the median error of Q shrinks with n.
    let spec = m0();
    let blocks = true_sde_blocks();
    let sigma = implied_sigma(&spec, &TRUE_THETA).unwrap();
    let mut medians = Vec::new();
    for n in [100usize, 1_000, 10_000] {
        let grid = SimGrid::new(n, 10.0 / n as f64).unwrap();
        let mut errs: Vec<f64> = (0..100)
            .map(|r| {
                let b = simulate_replication(&spec, &TRUE_THETA, &blocks, &grid, Scheme::Auto, 31, r)
                    .unwrap();
                let q = realized_cov(&b.observed(), grid.h()).unwrap();
                (q.q_xx().as_matrix() - sigma.as_matrix()).norm()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push(0.5 * (errs[49] + errs[50]));
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn realized_cov_entry_is_asymptotically_normal() {
    let spec = m0();
    let blocks = true_sde_blocks();
    let sigma = implied_sigma(&spec, &TRUE_THETA).unwrap();
    let w11 = crate::matstat::w_matrix(&sigma).get(0, 0);
    let grid = study_grid();
    let n = grid.n();
    let z: Vec<f64> = (0..500)
        .map(|r| {
            let b = simulate_replication(&spec, &TRUE_THETA, &blocks, &grid, Scheme::Auto, 41, r)
                .unwrap();
            let q = realized_cov(&b.observed(), grid.h()).unwrap();
            (q.q_xx().get(0, 0) - sigma.get(0, 0)) * (n as f64).sqrt() / w11.sqrt()
        })
        .collect();
    let d = crate::matstat::ks_statistic(&z, crate::matstat::normal_cdf);
    assert!(crate::matstat::ks_pvalue(d, z.len()) > 0.01, "D = {d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contrast_nonnegative_and_zero_only_at_equality(
        a in proptest::collection::vec(-1.0f64..1.0, 9),
        b in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let pd = |v: &[f64]| {
            let m = DMatrix::from_row_slice(3, 3, v);
            SymMatrix::from_lower(&m * m.transpose() + DMatrix::identity(3, 3) * 0.5)
        };
        let (qm, s) = (pd(&a), pd(&b));
        let q = RealizedCov::from_matrix(qm.clone(), 10, 0.1).unwrap();
        let f = contrast(&q, &s).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert_eq!(contrast(&q, &qm).unwrap(), 0.0);
        if s != qm {
            prop_assert!(f > 0.0);
        }
    }

    #[test]
    fn analytic_and_numeric_gradients_agree(
        scale in proptest::collection::vec(0.7f64..1.3, 15),
    ) {
        let spec = m0();
        let q = exact_q(&spec, &TRUE_THETA);
        let theta: Vec<f64> = TRUE_THETA.iter().zip(&scale).map(|(t, s)| t * s).collect();
        let obj = |gradient| ContrastObjective { spec: &spec, q: q.q_xx(), q_pd: true, gradient };
        if let (Some((_, ga)), Some((_, gn))) = (
            obj(GradientMode::Analytic).value_grad(&theta),
            obj(GradientMode::Numeric).value_grad(&theta),
        ) {
            prop_assert!((&ga - &gn).amax() <= 1e-6 * ga.amax().max(1e-3));
        }
    }
}
