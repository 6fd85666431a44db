//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed; exits non-zero if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gcalc_core::exprdsl::{eval, parse, ParseErrorKind};
use gcalc_core::gcore::{eval_g_matrix, nondegeneracy_delta};
use gcalc_core::gheat::{g_expectation, solve_terminal, Boundary, Grid1D};
use gcalc_core::harmonic::{build_example_spec, build_v0, example_coefficients, uniform_grid};
use gcalc_core::pathcheck::{
    aligned_bang_bang, convergence_order, decomposition_check, delta_n_norm, pde_residuals, product_grid, ItoIntegrands, StepSym, Verdict,
};
use gcalc_core::scenario::{default_family, estimate_over_family, Payoff, TimeGrid};
use gcalc_core::{AscentOptions, SymMatrix, VolatilityBand};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Named = (&'static str, fn(f64) -> f64);
type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn band12() -> VolatilityBand {
    VolatilityBand::scalar(1.0, 2.0).unwrap()
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

// ---------------------------------------------------------------- 1

fn random_sym(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::new(&m + m.transpose()).unwrap()
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize, floor: f64) -> SymMatrix {
    let r = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::new(&r * r.transpose() + DMatrix::identity(d, d) * floor).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let opts = AscentOptions::default();
    let g = |a: &SymMatrix, band: &VolatilityBand| eval_g_matrix(a, band, &opts).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_axiom = 0.0f64;
    for case in 0..1000 {
        let d = 1 + case % 4;
        let lower = random_psd(&mut rng, d, 0.3);
        let band = VolatilityBand::new(lower.clone(), &lower + &random_psd(&mut rng, d, 0.1)).unwrap();
        let (a, b) = (random_sym(&mut rng, d), random_sym(&mut rng, d));
        let lambda = rng.random_range(0.0..5.0);
        let (ga, gb) = (g(&a, &band), g(&b, &band));
        let homog = (g(&a.scale(lambda), &band) - lambda * ga).abs() - 1e-8 * (1.0 + lambda * ga.abs());
        let sub = g(&(&a + &b), &band) - ga - gb;
        let above = &a + &random_psd(&mut rng, d, 0.0);
        let g_above = g(&above, &band);
        let mono = ga - g_above;
        let nondeg = 0.5 * nondegeneracy_delta(&band) * (&above - &a).trace() - (g_above - ga);
        worst_axiom = worst_axiom.max(homog.max(sub).max(mono).max(nondeg));
    }
    // Commuting bands: closed form versus forced ascent.
    let mut worst_commuting = 0.0f64;
    for case in 0..100 {
        let d = 2 + case % 3;
        let q = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let conj =
            |diag: Vec<f64>| SymMatrix::new(&q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * q.transpose()).unwrap();
        let lo: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..1.2)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..1.0)).collect();
        let band = VolatilityBand::new(conj(lo), conj(hi)).unwrap();
        let a = conj((0..d).map(|_| rng.random_range(-2.0..2.0)).collect());
        let exact = eval_g_matrix(&a, &band, &opts).unwrap();
        let ascent = eval_g_matrix(&a, &band, &AscentOptions { force_ascent: true, ..opts }).unwrap();
        worst_commuting = worst_commuting.max((exact.value - ascent.value).abs());
    }
    let t = start.elapsed();
    outcome(
        worst_axiom <= 1e-8 && worst_commuting <= 1e-6 && within(t, 30),
        format!("worst axiom excess {worst_axiom:.2e}, commuting gap {worst_commuting:.2e}, {:.1} s", t.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let band = band12();
    let grid = Grid1D::with_cfl_dt(-8.0, 8.0, 801, &band, Boundary::ExtrapolateLinear).unwrap();
    let s = Instant::now();
    let upper = g_expectation(&|x: f64| x * x, &band, &grid, 1.0).unwrap();
    let t1 = s.elapsed();
    let s = Instant::now();
    let lower = g_expectation(&|x: f64| -x * x, &band, &grid, 1.0).unwrap();
    let t2 = s.elapsed();
    let ok = (upper - 4.0).abs() <= 0.08 && (lower + 1.0).abs() <= 0.02 && within(t1, 10) && within(t2, 10);
    outcome(ok, format!("E[x^2] = {upper:.6} (4), E[-x^2] = {lower:.6} (-1), {:.2} s / {:.2} s", t1.as_secs_f64(), t2.as_secs_f64()))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let band = band12();
    let grid = Grid1D::with_cfl_dt(-8.0, 8.0, 201, &band, Boundary::ExtrapolateLinear).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let (a, b, k, m) =
            (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0), rng.random_range(-3.0..3.0));
        let (lift, height, at, width) = (
            if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) },
            rng.random_range(0.0..2.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(0.1..3.0),
        );
        let phi = move |x: f64| a * (x - m).abs() + b * (k * x).sin();
        let psi = move |x: f64| phi(x) + lift + height * (1.0 - (x - at).abs() / width).max(0.0);
        let u = solve_terminal(&phi, &band, &grid, 1.0).unwrap();
        let v = solve_terminal(&psi, &band, &grid, 1.0).unwrap();
        for level in 0..u.times.len() {
            for (x, y) in u.level(level).iter().zip(v.level(level)) {
                worst = worst.max(x - y);
            }
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-12 && within(t, 60), format!("max(u_phi - u_psi) = {worst:.2e} over all nodes, {:.1} s", t.as_secs_f64()))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let band = band12();
    let time = TimeGrid::new(0.0, 1.0, 16).unwrap();
    let family = default_family(&band, &time, 5, 4).unwrap();
    let pde_grid = Grid1D::with_cfl_dt(-10.0, 10.0, 801, &band, Boundary::ExtrapolateLinear).unwrap();
    let cases: [Named; 3] = [("x^2", |x| x * x), ("x^4", |x| x.powi(4)), ("|x|", f64::abs)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, phi) in cases {
        let pde = g_expectation(&phi, &band, &pde_grid, 1.0).unwrap();
        let est = estimate_over_family(&Payoff::terminal(move |x| phi(x[0])), None, &[0.0], &family, 100_000, 44).unwrap();
        ok &= est.value <= pde + 3.0 * est.std_error && est.value >= 0.95 * pde;
        detail.push(format!("{name}: {:.4}±{:.4} vs {pde:.4}", est.value, est.std_error));
    }
    let t = start.elapsed();
    outcome(ok && within(t, 60), format!("{}, {:.1} s", detail.join("; "), t.as_secs_f64()))
}

// ---------------------------------------------------------------- 5, 6

/// The Gaussian harmonic setup: `h = x`, `σ = 1`, `φ = eᵗ`, `b = 0`.
fn gaussian_setup() -> (gcalc_core::harmonic::ExampleSetup, gcalc_core::scenario::CoefficientSet) {
    let profile = build_v0(Arc::new(|x| x), Arc::new(|_| 1.0), uniform_grid(-150.0, 150.0, 0.01).unwrap(), 0.0, 1.0).unwrap();
    let setup = build_example_spec(&profile, Arc::new(f64::exp), Arc::new(f64::exp), Arc::new(|_, _| 0.0), &band12()).unwrap();
    (setup, example_coefficients(&profile, Arc::new(|_, _| 0.0), 1.0))
}

fn dyadic_dts() -> Vec<f64> {
    (6..=10).map(|k| 0.5f64.powi(k)).collect()
}

fn convergence(f_shift: f64) -> gcalc_core::pathcheck::ConvergenceReport {
    let (setup, coeffs) = gaussian_setup();
    let spec = if f_shift != 0.0 { setup.spec.with_f_shift(f_shift) } else { setup.spec };
    convergence_order(&setup.value, &coeffs, &spec, &band12(), &[0.0], (0.0, 1.0), &dyadic_dts(), 256, 7).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let r = convergence(0.0);
    let t = start.elapsed();
    let finest = *r.ensemble_max.last().unwrap();
    outcome(
        r.slope >= 0.4 && finest <= 0.02 && within(t, 120),
        format!(
            "slope {:.3} (>= 0.4), finest ensemble max {finest:.4} (<= 0.02), levels {:?}, {:.1} s",
            r.slope,
            r.ensemble_max.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            t.as_secs_f64()
        ),
    )
}

fn example_verify_exit(f_perturbation: f64) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "band": {"sigma_lower": 1, "sigma_upper": 2},
        "example4_1": {"h": "x", "sigma": "1", "phi": "exp(t)", "phi_prime": "exp(t)", "b": "0"},
        "verify": {
            "dt_list": dyadic_dts(),
            "n_scenarios": 256,
            "pde_grid": {"t_min": 0, "t_max": 1, "nt": 21, "x_min": -2, "x_max": 2, "nx": 401},
            "f_perturbation": f_perturbation
        },
        "seed": 7
    });
    let path = dir.path().join("verify.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    run_gcalc("verify", &path, &dir.path().join("out"))
}

/// Runs the `gcalc` command line in-process and returns its exit code.
fn run_gcalc(cmd: &str, config: &Path, out: &Path) -> i32 {
    let args = ["gcalc".as_ref(), cmd.as_ref(), "--config".as_ref(), config.as_os_str(), "--out".as_ref(), out.as_os_str()];
    i32::from(gcalc_cli::run(args.map(std::ffi::OsStr::to_os_string)))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let base = *convergence(0.0).ensemble_max.last().unwrap();
    let r = convergence(0.1);
    let code = example_verify_exit(0.1);
    let t = start.elapsed();
    let finest = *r.ensemble_max.last().unwrap();
    outcome(
        finest >= 10.0 * base && r.slope <= 0.1 && code == 2 && within(t, 120),
        format!(
            "perturbed finest max {finest:.4} = {:.1}x unperturbed {base:.4} (>= 10x), slope {:.3} (<= 0.1), verify exit {code} (2), {:.1} s",
            finest / base,
            r.slope,
            t.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let band = band12();
    let grid = TimeGrid::new(0.0, 1.0, 1024).unwrap();
    let (aligned, flipped) = aligned_bang_bang(&band, &grid, 64).unwrap();
    let one: StepSym = Arc::new(|_, _| SymMatrix::scalar(1.0));
    let r = delta_n_norm(&one, &band, 64, &[aligned, flipped], 8, 7).unwrap();
    outcome(
        (r.estimate - 1.5).abs() <= 0.075 && r.c0 == 1.5 && r.big_c0 == 1.5,
        format!("estimate {:.4} (1.5 ± 5%), c0 = {}, C0 = {}, argmax {}", r.estimate, r.c0, r.big_c0, r.argmax_label),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let band = band12();
    let family = default_family(&band, &TimeGrid::new(0.0, 1.0, 64).unwrap(), 5, 8).unwrap();
    let zero = decomposition_check(&ItoIntegrands::zero(1, 1), &band, &family, 16, 0.0, 8).unwrap();
    let zeta = decomposition_check(&ItoIntegrands::scalar(0.0, 0.0, 1.0), &band, &family, 16, 1e-9, 8).unwrap();
    let cancel = decomposition_check(&ItoIntegrands::scalar(-1.0, 0.25, 0.0), &band, &family, 16, 1e-9, 8).unwrap();
    let zero_ok = zero.verdict == Verdict::AllZero;
    let zeta_ok = matches!(zeta.verdict, Verdict::Violated(_));
    let (cancel_ok, witness) = match &cancel.verdict {
        Verdict::Violated(w) => {
            (w.control == "constant_lower" && w.value.abs() >= 0.7, format!("{} |X| = {:.4}", w.control, w.value.abs()))
        }
        Verdict::AllZero => (false, "all_zero".into()),
    };
    outcome(
        zero_ok && zeta_ok && cancel_ok,
        format!("zero triple {:?}, zeta=1 violated: {zeta_ok}, cancellation witness {witness}", zero.verdict),
    )
}

// ---------------------------------------------------------------- 9

fn simpson_oracle(panels: usize) -> f64 {
    let h = 1.0 / panels as f64;
    let f = |u: f64| (-u * u).exp();
    let inner: f64 = (1..panels).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h)).sum();
    (f(0.0) + f(1.0) + inner) * h / 3.0
}

fn criterion_9() -> Outcome {
    let oracle = simpson_oracle(100_000);
    let profile = build_v0(Arc::new(|x| x), Arc::new(|_| 1.0), uniform_grid(-4.0, 4.0, 1e-3).unwrap(), 0.0, 1.0).unwrap();
    let increment = profile.v0(1.0).unwrap() - profile.v0(0.0).unwrap();
    let setup = build_example_spec(&profile, Arc::new(f64::exp), Arc::new(f64::exp), Arc::new(|_, _| 0.0), &band12()).unwrap();
    let coeffs = example_coefficients(&profile, Arc::new(|_, _| 0.0), 1.0);
    let points = product_grid(0.0, 1.0, 21, &[-2.0], &[2.0], 401);
    let r = pde_residuals(&setup.value, &coeffs, &setup.spec, &band12(), &points).unwrap();
    outcome(
        (increment - 0.746824).abs() <= 1e-6 && (increment - oracle).abs() <= 1e-6 && r.max() <= 1e-10,
        format!("V0(1)-V0(0) = {increment:.9} (oracle {oracle:.9}), PDE residual sups {:.1e} {:.1e} {:.1e}", r.sup_r1, r.sup_r2, r.sup_r3),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let precedence = [("2+3*4", 14.0), ("-x^2", -4.0), ("2^3^2", 512.0), ("2*x + t", 5.0), ("exp(-x^2)", (-4.0f64).exp())];
    let prec_ok = precedence.iter().all(|(s, v)| eval(&parse(s).unwrap(), 1.0, 2.0).unwrap() == *v);
    let offsets = [("x*(1-x", 6usize), ("(x))", 3), ("x + y", 4)];
    let off_ok = offsets.iter().all(|(s, o)| parse(s).unwrap_err().offset == *o)
        && parse("x*(1-x").unwrap_err().kind == ParseErrorKind::UnbalancedParenthesis;

    // Fuzz: random strings over the grammar's alphabet must parse or fail
    // with an in-range offset, never panic; successes must round-trip.
    let alphabet: Vec<char> = "0123456789.tx+-−*/^() expsincosqrtaberf,".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut crashes = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..32);
        let src: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let ok = catch_unwind(|| match parse(&src) {
            Ok(ast) => parse(&ast.to_string()).map(|again| again == ast).unwrap_or(false),
            Err(e) => e.offset <= src.len(),
        });
        if !matches!(ok, Ok(true)) {
            crashes += 1;
        }
    }

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/goldens/singleton");
    let dir = tempfile::tempdir().unwrap();
    let code = run_gcalc("simulate", &golden.join("config.json"), dir.path());
    let same = |name: &str| std::fs::read(dir.path().join(name)).ok() == std::fs::read(golden.join(name)).ok();
    let golden_ok = code == 0 && same("estimate.json") && same("paths.csv");
    outcome(
        prec_ok && off_ok && crashes == 0 && golden_ok,
        format!("precedence {prec_ok}, offsets {off_ok}, fuzz failures {crashes}/10000, singleton goldens bit-exact {golden_ok}"),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("G-function properties", criterion_1),
        ("defining moments", criterion_2),
        ("comparison principle", criterion_3),
        ("estimator domination", criterion_4),
        ("path independence of the harmonic example", criterion_5),
        ("falsification under a perturbed f", criterion_6),
        ("delta_n norm estimator", criterion_7),
        ("decomposition harness", criterion_8),
        ("harmonic quadrature and PDE residuals", criterion_9),
        ("parser suite and classical-collapse goldens", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.pass {
            failed += 1;
        }
        println!("criterion {n:>2} {}: {name} -- {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
