//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stdout so the verdicts show up even when output is captured.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use gklab_core::asymptotics::default_tau_grid;
use gklab_core::limit_laws::{ks_statistic, ks_threshold_1pct, DICKMAN_BURN_IN, EULER_GAMMA};
use gklab_core::{
    auto_complexity, condition_a, condition_b, condition_c, convolution_complexity, d_tau, dickman_sample,
    exact_complexity, gamma_tau, lemma1_verify, normal_quantile, normalization_plan, ComplexityResult, DickmanLaw,
    OmegaVector, SelfDecompTriplet, SigmaSequence, DEFAULT_CAPACITY,
};
use rand::Rng;

use common::{brute_force_complexity, brute_force_spectrum};

const BIN_WIDTH: f64 = 1e-3;

fn report(n: u32, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} ({:.2}s) {detail}\n", elapsed.as_secs_f64());
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
}

#[test]
fn criterion_1_exact_small_cases() {
    const BUDGET: Duration = Duration::from_secs(1);
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (sigmas, expected) in [(vec![1.0], 2u64), (vec![1.0, 1.0], 5)] {
        let v = OmegaVector::from_sigmas(&sigmas).unwrap();
        let n = exact_complexity(&v, 0.5, DEFAULT_CAPACITY).unwrap().exact_n().unwrap();
        let oracle = brute_force_complexity(&brute_force_spectrum(v.omegas(), 40), 0.5);
        pass &= n == expected && oracle == expected;
        detail.push(format!("d={}: n={n} oracle={oracle} expected={expected}", sigmas.len()));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < BUDGET;
    report(1, pass, elapsed, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_2_lemma1_identities() {
    const BUDGET: Duration = Duration::from_secs(5);
    const TOL: f64 = 1e-10;
    const X: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
    let t = Instant::now();
    let mut r = common::rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let d = r.random_range(1..=8);
        let w: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let c = lemma1_verify(&OmegaVector::from_omegas(&w).unwrap(), X[case % 4]).unwrap();
        worst = worst.max(c.max_residual());
    }
    let elapsed = t.elapsed();
    let pass = worst <= TOL && elapsed < BUDGET;
    report(2, pass, elapsed, &format!("200 cases, max residual {worst:.2e} (tol {TOL:e})"));
    assert!(pass);
}

fn power_omega(alpha: f64, d: usize) -> OmegaVector {
    OmegaVector::from_sequence(&SigmaSequence::Power { alpha, beta: 1.0 }, d).unwrap()
}

/// Whether `ln n` at `a` is certainly below `ln n` at `b`.
fn strictly_below(a: &ComplexityResult, b: &ComplexityResult) -> bool {
    match (a.exact_n(), b.exact_n()) {
        (Some(x), Some(y)) => x < y,
        _ => a.log_bracket().1 < b.log_bracket().0,
    }
}

fn describe(r: &ComplexityResult) -> String {
    match r.exact_n() {
        Some(n) => n.to_string(),
        None => {
            let (lo, hi) = r.log_bracket();
            format!("exp[{lo:.3}, {hi:.3}]")
        }
    }
}

#[test]
fn criterion_3_boundedness() {
    const BUDGET: Duration = Duration::from_secs(30);
    let t = Instant::now();
    let n40 = exact_complexity(&power_omega(1.5, 40), 0.5, DEFAULT_CAPACITY).unwrap();
    let n80 = exact_complexity(&power_omega(1.5, 80), 0.5, DEFAULT_CAPACITY).unwrap();
    let plateau = n40.exact_n() == n80.exact_n();
    let grow: Vec<ComplexityResult> = [10, 20, 40]
        .iter()
        .map(|&d| auto_complexity(&power_omega(0.6, d), 0.5, BIN_WIDTH, DEFAULT_CAPACITY).unwrap())
        .collect();
    let increasing = strictly_below(&grow[0], &grow[1]) && strictly_below(&grow[1], &grow[2]);
    let elapsed = t.elapsed();
    let pass = plateau && increasing && elapsed < BUDGET;
    report(
        3,
        pass,
        elapsed,
        &format!(
            "alpha=1.5: n(40)={} n(80)={} plateau={plateau}; alpha=0.6: n(10)={} n(20)={} n(40)={} increasing={increasing}",
            describe(&n40),
            describe(&n80),
            describe(&grow[0]),
            describe(&grow[1]),
            describe(&grow[2]),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_gaussian_limit() {
    const BUDGET: Duration = Duration::from_secs(60);
    const TOL: f64 = 0.15;
    let t = Instant::now();
    let plan = normalization_plan(&SigmaSequence::Constant { sigma: 1.0 }).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for eps in [0.3, 0.5, 0.7] {
        let q = normal_quantile(1.0 - eps * eps).unwrap();
        let errs: Vec<f64> = [50usize, 100, 200]
            .iter()
            .map(|&d| {
                let omega = plan.omega(d).unwrap();
                let ln_n = convolution_complexity(&omega, eps, BIN_WIDTH).unwrap().log_n();
                ((ln_n - plan.a_d(&omega)) / plan.b_d(d).unwrap() - q).abs()
            })
            .collect();
        let close = errs[2] <= TOL;
        let improving = errs[2] <= errs[0];
        pass &= close && improving;
        detail.push(format!(
            "eps={eps}: |err| d=50 {:.3}, d=100 {:.3}, d=200 {:.3} (i) {} (ii) {}",
            errs[0],
            errs[1],
            errs[2],
            if close { "ok" } else { "miss" },
            if improving { "ok" } else { "miss" },
        ));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < BUDGET;
    report(4, pass, elapsed, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_5_gaussian_conditions() {
    const BUDGET: Duration = Duration::from_secs(1);
    const TOL_C: f64 = 1e-12;
    let t = Instant::now();
    let plan = normalization_plan(&SigmaSequence::Constant { sigma: 1.0 }).unwrap();
    let d_max = 10_000;
    let omega = plan.omega(d_max).unwrap();
    let mut pass = true;
    let mut thresholds = Vec::new();
    for tau in default_tau_grid() {
        let Some(dt) = d_tau(&plan, &omega, tau, d_max).unwrap() else {
            pass = false;
            continue;
        };
        thresholds.push(format!("{tau}->{dt}"));
        for d in [dt, dt + 1, dt + 17, d_max] {
            let o = omega.truncate(d).unwrap();
            let b = plan.b_d(d).unwrap();
            pass &= condition_a(&o, b, tau).unwrap() == 0.0;
            pass &= condition_b(&o, b, tau, plan.hat_a(&o)).unwrap() == 0.0;
            pass &= (condition_c(&o, b, tau).unwrap() - 1.0).abs() <= TOL_C;
        }
    }
    let elapsed = t.elapsed();
    pass &= elapsed < BUDGET;
    report(5, pass, elapsed, &format!("A=0, B=0, |C-1|<={TOL_C:e} from d_tau on; d_tau: {}", thresholds.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_6_gamma_tau() {
    const BUDGET: Duration = Duration::from_secs(1);
    const TOL: f64 = 1e-8;
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        let tr = SelfDecompTriplet::dickman(1.0 / beta).unwrap();
        for tau in [0.25, 0.5, 1.0, 2.0] {
            let v = tr.c + gamma_tau(tr.levy.as_ref(), tau).unwrap();
            worst = worst.max((v - f64::min(tau, 1.0) / beta).abs());
        }
    }
    let elapsed = t.elapsed();
    let pass = worst <= TOL && elapsed < BUDGET;
    report(6, pass, elapsed, &format!("max |c + gamma_tau - min(tau,1)/beta| = {worst:.2e} (tol {TOL:e})"));
    assert!(pass);
}

#[test]
fn criterion_7_dickman_law() {
    const BUDGET: Duration = Duration::from_secs(60);
    const TOL_ONE: f64 = 1e-6;
    const TOL_MASS: f64 = 1e-8;
    let t = Instant::now();
    let law = DickmanLaw::new(1.0).unwrap();
    let at_one = (law.cdf(1.0) - (-EULER_GAMMA).exp()).abs();
    let mass = (1.0 - law.cdf(40.0)).abs().max(law.mass_defect());
    let n = 100_000;
    let samples = dickman_sample(1.0, n, 7, DICKMAN_BURN_IN).unwrap();
    let ks = ks_statistic(&samples, |x| law.cdf(x));
    let threshold = ks_threshold_1pct(n);
    let elapsed = t.elapsed();
    let pass = at_one <= TOL_ONE && mass <= TOL_MASS && ks < threshold && elapsed < BUDGET;
    report(
        7,
        pass,
        elapsed,
        &format!("|D1(1)-e^-g|={at_one:.2e}, mass defect at 40 {mass:.2e}, KS {ks:.5} < {threshold:.5}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_dickman_machinery() {
    const BUDGET: Duration = Duration::from_secs(30);
    const TOL_A: f64 = 0.10;
    const TOL_B: f64 = 0.10;
    const TOL_C: f64 = 0.20;
    const TOL_SUM: f64 = 0.15;
    let t = Instant::now();
    let beta = 1.0;
    let tau = 0.5;
    let d = 1_000_000;
    let plan = normalization_plan(&SigmaSequence::Jlogj { beta }).unwrap();
    let omega = plan.omega(d).unwrap();
    let b = plan.b_d(d).unwrap();
    let rel = |got: f64, target: f64| ((got - target) / target).abs();

    let a = condition_a(&omega, b, tau).unwrap();
    let a_target = 2f64.ln() / beta;
    let bb = condition_b(&omega, b, tau, 0.0).unwrap();
    let b_target = tau / beta;
    let c = condition_c(&omega, b, tau).unwrap();
    let c_target = tau * tau / (2.0 * beta);
    let sum: f64 = omega.omegas().iter().sum();
    let sum_target = (d as f64).ln().ln() / beta;

    let checks = [
        ("A", a, a_target, TOL_A),
        ("B", bb, b_target, TOL_B),
        ("C", c, c_target, TOL_C),
        ("sum omega", sum, sum_target, TOL_SUM),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, got, target, tol) in checks {
        let ok = rel(got, target) <= tol;
        pass &= ok;
        detail.push(format!(
            "{name} {got:.4} vs {target:.4} ({:.1}% of {:.0}%) {}",
            100.0 * rel(got, target),
            100.0 * tol,
            if ok { "ok" } else { "miss" }
        ));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < BUDGET;
    report(8, pass, elapsed, &format!("d=1e6, tau=0.5: {}", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_9_convolution_brackets_exact() {
    const BUDGET: Duration = Duration::from_secs(30);
    let t = Instant::now();
    let mut r = common::rng(9);
    let mut contained = 0;
    let mut widest: f64 = 0.0;
    for _ in 0..50 {
        let d = r.random_range(1..=3);
        let w: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.9)).collect();
        let eps = r.random_range(0.1..0.9);
        let v = OmegaVector::from_omegas(&w).unwrap();
        let n = exact_complexity(&v, eps, DEFAULT_CAPACITY).unwrap().exact_n().unwrap();
        let (lo, hi) = convolution_complexity(&v, eps, BIN_WIDTH).unwrap().log_bracket();
        let ln_n = (n as f64).ln();
        if lo <= ln_n && ln_n <= hi {
            contained += 1;
        }
        widest = widest.max(hi - lo);
    }
    let elapsed = t.elapsed();
    let pass = contained == 50 && elapsed < BUDGET;
    report(9, pass, elapsed, &format!("{contained}/50 brackets contain ln n; widest {widest:.3}"));
    assert!(pass);
}
