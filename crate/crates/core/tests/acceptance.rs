//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured values, and exits non-zero if any criterion fails.
//!
//! Runs with a custom harness so the report is always visible:
//! `cargo test -p hfsem-core --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hfsem_core::estimate::{contrast, fit, realized_cov, v_integral, FitOptions, GradientMode, RealizedCov};
use hfsem_core::lisrel::{implied_sigma, Cell, MatrixTemplate, ModelSpec, ParamBounds, Templates};
use hfsem_core::matstat::{
    chi2_cdf, chi2_quantile, duplication, ks_pvalue, ks_statistic, pinv, unvech, vec, vech, w_matrix,
    SymMatrix,
};
use hfsem_core::montecarlo::{emit_diagnostics, run_study, FittedModel, McConfig, McSummary, Quantity};
use hfsem_core::reference::{
    m0, m1, m2, study_grid, true_model, true_sde_blocks, M1_THETA, M2_THETA, TRUE_THETA,
};
use hfsem_core::simulate::{
    simulate_block, simulate_replication, OuTransition, Scheme, SdeBlock, SdeBlocks, SimGrid,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Replications for the correctly specified study.
const NULL_REPS: usize = 500;
/// Replications for the misspecified study.
const ALT_REPS: usize = 200;
const NULL_SEED: u64 = 20_240_501;
const ALT_SEED: u64 = 20_240_502;

/// Printed theoretical SDs of θ̂ at n = 10⁴, in parameter order.
const PRINTED_THETA_SE: [f64; 15] = [
    0.026, 0.336, 0.008, 0.036, 0.030, 0.044, 0.046, 0.100, 0.024, 0.096, 0.060, 0.182, 0.038,
    0.343, 0.109,
];

/// Outcome of one check inside a criterion.
struct Check {
    label: String,
    ok: bool,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, ok: bool, label: impl Into<String>) {
        self.checks.push(Check { label: label.into(), ok });
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.check(lo <= value && value <= hi, format!("{name} = {value:.6} in [{lo}, {hi}]"));
    }

    fn faster(&mut self, name: &str, elapsed: Duration, limit: Duration) {
        self.check(elapsed < limit, format!("{name} runtime {elapsed:.2?} < {limit:?}"));
    }
}

fn random_spd(rng: &mut impl Rng, p: usize) -> SymMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::new(&a * a.transpose() + DMatrix::identity(p, p) * 0.5).unwrap()
}

fn random_sym(rng: &mut impl Rng, p: usize) -> SymMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-10.0..10.0));
    SymMatrix::from_lower(a)
}

fn null_study() -> &'static McSummary {
    static STUDY: OnceLock<McSummary> = OnceLock::new();
    STUDY.get_or_init(|| {
        let options = FitOptions {
            gradient: GradientMode::Analytic,
            ..FitOptions::from_init(&TRUE_THETA)
        };
        let cfg = McConfig {
            replications: NULL_REPS,
            grid: study_grid(),
            scheme: Scheme::Auto,
            true_spec: true_model(),
            true_theta: TRUE_THETA.to_vec(),
            blocks: true_sde_blocks(),
            fitted: vec![FittedModel { name: "M0".into(), spec: m0(), options }],
            alpha: 0.05,
            seed: NULL_SEED,
            workers: None,
            outputs: None,
        };
        let t = Instant::now();
        let s = run_study(&cfg).expect("null study runs");
        println!("  (null study: {NULL_REPS} replications in {:.1?})", t.elapsed());
        s
    })
}

fn c1_implied_covariance(r: &mut Report) {
    let spec = m0();
    let t = Instant::now();
    let sigma = implied_sigma(&spec, &TRUE_THETA).unwrap();
    let elapsed = t.elapsed();
    let printed = [
        [3., 4., 2., 6., 6., 18.],
        [4., 12., 4., 12., 12., 36.],
        [2., 4., 8., 12., 10., 30.],
        [6., 12., 12., 37., 30., 90.],
        [6., 12., 10., 30., 31., 90.],
        [18., 36., 30., 90., 90., 279.],
    ];
    let err = (0..6)
        .flat_map(|i| (0..6).map(move |j| (i, j)))
        .map(|(i, j)| (sigma.get(i, j) - printed[i][j]).abs())
        .fold(0.0, f64::max);
    r.check(err == 0.0, format!("max |Σ(θ₀) − printed| = {err:e} (exact)"));
    r.faster("implied_sigma", elapsed, Duration::from_millis(1));
}

fn c2_contrast_quadratic_form(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(1..=6);
        let q = random_spd(&mut rng, p);
        let s = random_spd(&mut rng, p);
        let v = v_integral(&q, &s, 1e-8).unwrap();
        let d = vech(&q).data() - vech(&s).data();
        let quad = (d.transpose() * v.as_matrix() * &d)[(0, 0)];
        let f = contrast(&RealizedCov::from_matrix(q, 1, 1.0).unwrap(), &s).unwrap();
        worst = worst.max((quad - f).abs() / f.abs().max(f64::MIN_POSITIVE));
    }
    r.check(worst <= 1e-6, format!("max relative gap over 100 pairs = {worst:.2e} <= 1e-6"));
    r.faster("100 pairs", t.elapsed(), Duration::from_secs(30));
}

fn c3_realized_covariance_table(r: &mut Report) {
    let s = null_study();
    let q11 = &s.q[0];
    r.check(q11.n == NULL_REPS, format!("{} of {NULL_REPS} replications usable", q11.n));
    r.within("mean (Q_XX)11", q11.mean.unwrap(), 2.994, 3.006);
    r.within("SD (Q_XX)11", q11.sd.unwrap(), 0.032, 0.053);
    let theo = q11.theoretical_sd.unwrap();
    r.check(
        (theo * 1000.0).round() / 1000.0 == 0.042,
        format!("theoretical SD from W = {theo:.5} rounds to 0.042"),
    );
    let d = emit_diagnostics(s, &[Quantity::Q { i: 0, j: 0 }]).unwrap();
    println!("  info: QQ slope of standardized (Q_XX)11 vs N(0,1) = {:.4}", d[0].qq_slope.unwrap());
}

fn c4_estimator_table(r: &mut Report) {
    let s = null_study();
    let theta = &s.theta[0];
    r.within("mean θ̂(1)", theta[0].mean.unwrap(), 1.996, 2.004);
    r.within("SD θ̂(14)", theta[13].sd.unwrap(), 0.26, 0.43);
    let se = s.models[0].theta_se.as_ref().unwrap();
    for (k, (&ours, &printed)) in se.iter().zip(&PRINTED_THETA_SE).enumerate() {
        r.check(
            (ours - printed).abs() <= 0.005,
            format!("theoretical SE θ({}) = {ours:.4} vs printed {printed}", k + 1),
        );
    }
    println!(
        "  info: θ(2) SE {:.4} vs printed 0.336 / 10 = 0.0336; sample SD {:.4}",
        se[1],
        theta[1].sd.unwrap()
    );
}

fn c5_null_distribution(r: &mut Report) {
    let s = null_study();
    let t = &s.t[0];
    r.check(t.df == 6, format!("df = {}", t.df));
    r.within("mean T_M0", t.mean.unwrap(), 5.5, 6.5);
    r.within("SD T_M0", t.sd.unwrap(), 2.9, 4.1);
    r.within("rejection rate at 0.05", t.rejection_rate.unwrap(), 0.02, 0.08);
    let ts: Vec<f64> = s.records.iter().filter_map(|x| x.models[0].t_stat).collect();
    let d = ks_statistic(&ts, |x| chi2_cdf(x, 6));
    let p = ks_pvalue(d, ts.len());
    r.check(p >= 0.01, format!("KS vs χ²₆: D = {d:.4}, p = {p:.4} >= 0.01"));
    let qq = emit_diagnostics(s, &[Quantity::T { model: 0 }]).unwrap();
    println!("  info: QQ slope of T_M0 vs χ²₆ = {:.4}", qq[0].qq_slope.unwrap());
}

fn c6_misspecified_models(r: &mut Report) {
    let options = FitOptions {
        n_starts: 50,
        gradient: GradientMode::Analytic,
        ..FitOptions::default()
    };
    let cfg = McConfig {
        replications: ALT_REPS,
        grid: study_grid(),
        scheme: Scheme::Auto,
        true_spec: true_model(),
        true_theta: TRUE_THETA.to_vec(),
        blocks: true_sde_blocks(),
        fitted: vec![
            FittedModel { name: "M1".into(), spec: m1(), options: options.clone() },
            FittedModel { name: "M2".into(), spec: m2(), options },
        ],
        alpha: 0.05,
        seed: ALT_SEED,
        workers: None,
        outputs: None,
    };
    let t = Instant::now();
    let s = run_study(&cfg).unwrap();
    println!("  (alternative study: {ALT_REPS} replications in {:.1?})", t.elapsed());
    for stat in &s.t {
        println!(
            "  info: {} quartiles min {:.0} q1 {:.0} median {:.0} q3 {:.0} max {:.0} (n = {}, failed = {})",
            stat.model,
            stat.min.unwrap_or(f64::NAN),
            stat.q1.unwrap_or(f64::NAN),
            stat.median.unwrap_or(f64::NAN),
            stat.q3.unwrap_or(f64::NAN),
            stat.max.unwrap_or(f64::NAN),
            stat.n,
            stat.failed
        );
    }
    let (t1, t2) = (&s.t[0], &s.t[1]);
    r.check(
        t1.rejection_rate == Some(1.0) && t1.n == ALT_REPS,
        format!("M1 rejected in {:?} of {} usable replications", t1.rejection_rate, t1.n),
    );
    r.check(
        t2.rejection_rate == Some(1.0) && t2.n == ALT_REPS,
        format!("M2 rejected in {:?} of {} usable replications", t2.rejection_rate, t2.n),
    );
    let (med1, med2) = (t1.median.unwrap_or(f64::NAN), t2.median.unwrap_or(f64::NAN));
    r.within("median T_M1", med1, 5600.0, 6300.0);
    r.within("median T_M2", med2, 4600.0, 5300.0);
    r.check(med2 < med1, format!("median T_M2 {med2:.0} < median T_M1 {med1:.0}"));
}

fn c7_noiseless_recovery(r: &mut Report) {
    let t = Instant::now();
    for (name, spec, theta) in [
        ("M0", m0(), TRUE_THETA.to_vec()),
        ("M1", m1(), M1_THETA.to_vec()),
        ("M2", m2(), M2_THETA.to_vec()),
    ] {
        let sigma = implied_sigma(&spec, &theta).unwrap();
        let q = RealizedCov::from_matrix(sigma, 10_000, 1e-3).unwrap();
        // Default multi-start plus one start 10% away from the truth.
        let opts = FitOptions {
            init_override: Some(theta.iter().map(|x| 1.1 * x).collect()),
            ..FitOptions::default()
        };
        let res = fit(&spec, &q, &opts).unwrap();
        let err = res
            .theta_hat
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r.check(
            err < 1e-6 && res.contrast < 1e-12,
            format!("{name}: ‖θ̂ − θ‖∞ = {err:.2e}, F = {:.2e}", res.contrast),
        );
    }
    r.faster("three fits", t.elapsed(), Duration::from_secs(10));
}

fn matstat_identities(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut exact = true;
    let mut dplus_gap = 0.0f64;
    for _ in 0..1000 {
        let p = rng.random_range(1..=8);
        let a = random_sym(&mut rng, p);
        let v = vech(&a);
        let dup = duplication(p).unwrap();
        exact &= unvech(&v) == a && dup.d() * v.data() == vec(a.as_matrix());
        dplus_gap = dplus_gap.max((dup.dplus() * vec(a.as_matrix()) - v.data()).amax());
    }
    r.check(exact, "unvech∘vech and D·vech = vec exact on 1000 symmetric matrices");
    r.check(dplus_gap <= 1e-12, format!("max |D⁺vec A − vech A| = {dplus_gap:.1e}"));

    let mut w_pd = true;
    for _ in 0..200 {
        let p = rng.random_range(1..=6);
        w_pd &= w_matrix(&random_spd(&mut rng, p)).cholesky().is_some();
    }
    r.check(w_pd, "W(Σ) positive definite for 200 random SPD Σ");

    let mut chi_gap = 0.0f64;
    for alpha in [0.01, 0.05, 0.5, 0.95] {
        for df in 1..=30 {
            let x = chi2_quantile(alpha, df).unwrap();
            chi_gap = chi_gap.max((chi2_cdf(x, df) - (1.0 - alpha)).abs());
        }
    }
    r.check(chi_gap <= 1e-8, format!("χ² quantile round trip max gap {chi_gap:.1e}"));

    let mut penrose = 0.0f64;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let rank = rng.random_range(0..=m.min(n));
        let left = DMatrix::from_fn(m, rank, |_, _| rng.random_range(-1.0..1.0));
        let right = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
        let a = left * right;
        let g = pinv(&a, None).unwrap();
        let gaps = [
            (&a * &g * &a - &a).amax(),
            (&g * &a * &g - &g).amax(),
            ((&a * &g).transpose() - &a * &g).amax(),
            ((&g * &a).transpose() - &g * &a).amax(),
        ];
        penrose = gaps.iter().fold(penrose, |m, &x| m.max(x));
    }
    r.check(penrose <= 1e-9, format!("Penrose conditions max residual {penrose:.1e}"));
}

fn one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn ou(a: DMatrix<f64>, s: DMatrix<f64>) -> SdeBlock {
    let d = s.nrows();
    SdeBlock::linear_ou(a, DVector::zeros(d), s, DVector::zeros(d)).unwrap()
}

fn simulation_checks(r: &mut Report) {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.2, 0.4]);
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
    let block = ou(a.clone(), s.clone());
    let (n, h) = (100_000, 1e-3);
    let grid = SimGrid::new(n, h).unwrap();
    let tr = OuTransition::new(&a, &DVector::zeros(2), &(&s * s.transpose()), h);
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
    let path = simulate_block(&block, &grid, Scheme::Auto, "xi", &mut rng).unwrap();
    let resid = path.rows(1, n) - path.rows(0, n) * tr.phi.transpose();
    let cov = resid.transpose() * &resid / n as f64;
    let c = &tr.cov;
    let worst = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| {
            let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / n as f64).sqrt();
            (cov[(i, j)] - c[(i, j)]).abs() / se
        })
        .fold(0.0, f64::max);
    r.check(worst < 4.0, format!("exact OU one-step covariance within {worst:.2} SE (< 4)"));

    // Γ = 0, B₀ = 0: X1 and X2 increments are independent.
    let mut t = Templates::zeros(2, 1, 1, 1);
    t.lambda_x1 = MatrixTemplate::zeros(2, 1).with(0, 0, Cell::Fixed(1.0)).with(1, 0, Cell::Free(0));
    t.lambda_x2 = MatrixTemplate::zeros(1, 1).with(0, 0, Cell::Fixed(1.0));
    t.sigma_xixi.set(0, 0, Cell::Free(1)).unwrap();
    t.sigma_dd.set(0, 0, Cell::Free(2)).unwrap();
    t.sigma_dd.set(1, 1, Cell::Free(3)).unwrap();
    t.sigma_ee.set(0, 0, Cell::Free(4)).unwrap();
    t.sigma_zz.set(0, 0, Cell::Free(5)).unwrap();
    let names = ["l", "v", "d1", "d2", "e", "z"].map(String::from).to_vec();
    let spec = ModelSpec::new(t, names, vec![ParamBounds::interval(0.1, 10.0).unwrap(); 6]).unwrap();
    let theta = [2.0, 4.0, 1.0, 1.0, 1.0, 4.0];
    let blocks = SdeBlocks {
        xi: ou(one(1.0), one(2.0)),
        delta: ou(DMatrix::identity(2, 2), DMatrix::identity(2, 2)),
        eps: ou(one(1.0), one(1.0)),
        zeta: ou(one(1.0), one(2.0)),
    };
    let grid = study_grid();
    let bundle = simulate_replication(&spec, &theta, &blocks, &grid, Scheme::Auto, 3, 0).unwrap();
    let q = realized_cov(&bundle.observed(), grid.h()).unwrap();
    let sigma = implied_sigma(&spec, &theta).unwrap();
    let worst = (0..2)
        .map(|i| {
            let se = (sigma.get(i, i) * sigma.get(2, 2) / grid.n() as f64).sqrt();
            q.q_xx().get(i, 2).abs() / se
        })
        .fold(0.0, f64::max);
    r.check(worst < 4.0, format!("X1–X2 cross covariance within {worst:.2} SE (< 4)"));

    let again = simulate_replication(&spec, &theta, &blocks, &grid, Scheme::Auto, 3, 0).unwrap();
    r.check(again == bundle, "same seed gives a bit-identical bundle");
}

fn equivariance(r: &mut Report) {
    let grid = study_grid();
    let bundle =
        simulate_replication(&true_model(), &TRUE_THETA, &true_sde_blocks(), &grid, Scheme::Auto, 21, 0)
            .unwrap();
    let q = realized_cov(&bundle.observed(), grid.h()).unwrap();
    let opts = FitOptions {
        tol: 0.0,
        grad_tol: 1e-13,
        gradient: GradientMode::Analytic,
        ..FitOptions::from_init(&TRUE_THETA)
    };
    let base = fit(&m0(), &q, &opts).unwrap();
    let (perm1, perm2) = ([2, 0, 3, 1], [1, 0]);
    let spec = m0().permute_observed(&perm1, &perm2).unwrap();
    let order: Vec<usize> = perm1.iter().copied().chain(perm2.iter().map(|j| j + 4)).collect();
    let qm = q.q_xx();
    let permuted = SymMatrix::from_lower(DMatrix::from_fn(6, 6, |i, j| qm.get(order[i], order[j])));
    let other = fit(&spec, &RealizedCov::from_matrix(permuted, q.n(), q.h()).unwrap(), &opts).unwrap();
    let gap = base
        .theta_hat
        .iter()
        .zip(&other.theta_hat)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.check(gap < 1e-8, format!("relabeled fit differs by {gap:.1e} (< 1e-8)"));
}

fn scheduling(r: &mut Report) {
    let options = FitOptions {
        n_starts: 5,
        gradient: GradientMode::Analytic,
        ..FitOptions::default()
    };
    let cfg = |workers| McConfig {
        replications: 12,
        grid: SimGrid::new(2_000, 1e-3).unwrap(),
        scheme: Scheme::Auto,
        true_spec: true_model(),
        true_theta: TRUE_THETA.to_vec(),
        blocks: true_sde_blocks(),
        fitted: vec![
            FittedModel { name: "M0".into(), spec: m0(), options: FitOptions::from_init(&TRUE_THETA) },
            FittedModel { name: "M2".into(), spec: m2(), options: options.clone() },
        ],
        alpha: 0.05,
        seed: 5,
        workers: Some(workers),
        outputs: None,
    };
    let one = run_study(&cfg(1)).unwrap();
    let three = run_study(&cfg(3)).unwrap();
    r.check(one == three, "run_study with 1 and 3 workers gives identical summaries");
}

fn c8_property_suites(r: &mut Report) {
    matstat_identities(r);
    simulation_checks(r);
    equivariance(r);
    scheduling(r);
}

fn main() {
    let criteria: [(&str, fn(&mut Report)); 8] = [
        ("covariance structure exactness", c1_implied_covariance),
        ("closed-form contrast equals the V quadratic form", c2_contrast_quadratic_form),
        ("realized covariance at desk scale", c3_realized_covariance_table),
        ("estimator at desk scale", c4_estimator_table),
        ("null distribution of T_M0", c5_null_distribution),
        ("misspecified models rejected", c6_misspecified_models),
        ("noiseless recovery", c7_noiseless_recovery),
        ("property suites", c8_property_suites),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut report = Report::default();
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut report)));
        let pass = outcome.is_ok() && report.checks.iter().all(|c| c.ok);
        for c in &report.checks {
            println!("  [{}] {}", if c.ok { "ok" } else { "FAIL" }, c.label);
        }
        if outcome.is_err() {
            println!("  [FAIL] panicked");
        }
        println!(
            "criterion {} [PRIMARY] {name}: {} ({:.1?})",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed()
        );
        failed += usize::from(!pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
