//! Self-check suites over seeded random inputs.
//!
//! Every suite compares a library result with an independent oracle or an
//! exact identity. Monte Carlo suites use bands wide enough that changing
//! the seed does not change the verdict in practice.

use std::path::Path;

use gklab_core::asymptotics::default_tau_grid;
use gklab_core::limit_laws::{ks_statistic, DICKMAN_BURN_IN};
use gklab_core::{
    condition_a, condition_b, condition_c, convolution_complexity, d_tau, dickman_sample, exact_complexity,
    gamma_tau, lemma1_verify, normal_cdf, normal_quantile, normalization_plan, omega_from_sigma, sample_gd,
    univariate_eigenvalue, univariate_tail, DickmanLaw, OmegaVector, SelfDecompTriplet, SigmaSequence,
    DEFAULT_BIN_WIDTH, DEFAULT_CAPACITY,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{config_hash, Format};
use crate::output::{render, write_out};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub config_hash: String,
    pub suite: &'static str,
    pub status: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

const HEADER: &[&str] = &["config_hash", "suite", "status", "cases", "worst", "tolerance", "detail"];

pub struct VerifyArgs {
    pub seed: u64,
    pub cases: usize,
    /// Extra ratios checked as an `OmegaVector` fixture.
    pub inject_omega: Vec<f64>,
}

struct Outcome {
    cases: usize,
    worst: f64,
    tolerance: f64,
    detail: String,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn rng(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(suite);
    r
}

fn random_omegas(r: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(lo..hi)).collect()
}

/// All products `Π(1-ω_j)ω_j^k_j` at least `cutoff`, by pruned recursion.
fn products_above(omegas: &[f64], cutoff: f64) -> Vec<f64> {
    fn rec(omegas: &[f64], j: usize, partial: f64, rest: &[f64], cutoff: f64, out: &mut Vec<f64>) {
        if j == omegas.len() {
            out.push(partial);
            return;
        }
        let w = omegas[j];
        let mut v = partial * (1.0 - w);
        while v * rest[j + 1] >= cutoff {
            rec(omegas, j + 1, v, rest, cutoff, out);
            v *= w;
        }
    }
    // rest[j] = Π_{i ≥ j} (1 - ω_i), the largest factor the remaining coordinates can contribute.
    let mut rest = vec![1.0; omegas.len() + 1];
    for j in (0..omegas.len()).rev() {
        rest[j] = rest[j + 1] * (1.0 - omegas[j]);
    }
    let mut out = Vec::new();
    rec(omegas, 0, 1.0, &rest, cutoff, &mut out);
    out
}

/// Exact `n(ε)` by materializing and sorting every large enough product.
fn brute_force_n(omegas: &[f64], eps: f64) -> u64 {
    let target = 1.0 - eps * eps;
    let mut cutoff = 1e-3;
    loop {
        let mut vals = products_above(omegas, cutoff);
        vals.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (i, v) in vals.iter().enumerate() {
            acc += v;
            if acc >= target {
                // Anything below the cutoff is smaller than every kept value.
                return i as u64 + 1;
            }
        }
        cutoff /= 10.0;
    }
}

fn kernel_spectrum(r: &mut ChaCha8Rng, cases: usize) -> Result<Outcome, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let sigma = r.random_range(0.05..20.0);
        let w = omega_from_sigma(sigma)?;
        let k = r.random_range(1..30u64);
        let step = univariate_tail(w, k - 1)? - univariate_tail(w, k)?;
        worst = worst.max((step - univariate_eigenvalue(w, k)?).abs());
        let head: f64 = (1..=k).map(|i| univariate_eigenvalue(w, i).unwrap()).sum();
        worst = worst.max((head + univariate_tail(w, k)? - 1.0).abs());
        let s2 = sigma * sigma;
        let closed = 2.0 / (2.0 + s2 + (s2 * s2 + 4.0 * s2).sqrt());
        worst = worst.max((w - closed).abs());
    }
    Ok(Outcome { cases, worst, tolerance: 1e-13, detail: "eigenvalues + tail = 1, closed-form omega".into() })
}

fn enumeration(r: &mut ChaCha8Rng, cases: usize) -> Result<Outcome, CliError> {
    let mut mismatches = 0usize;
    for _ in 0..cases {
        let d = r.random_range(1..=3);
        let w = random_omegas(r, d, 0.05, 0.8);
        let eps = r.random_range(0.1..0.9);
        let n = exact_complexity(&OmegaVector::from_omegas(&w)?, eps, DEFAULT_CAPACITY)?.exact_n().unwrap_or(0);
        if n != brute_force_n(&w, eps) {
            mismatches += 1;
        }
    }
    Ok(Outcome {
        cases,
        worst: mismatches as f64,
        tolerance: 0.0,
        detail: format!("{mismatches} mismatches against sorted brute force"),
    })
}

fn spectral(r: &mut ChaCha8Rng, cases: usize, seed: u64) -> Result<Outcome, CliError> {
    let mut misses = 0usize;
    for _ in 0..cases {
        let d = r.random_range(1..=3);
        let w = random_omegas(r, d, 0.05, 0.9);
        let eps = r.random_range(0.1..0.9);
        let v = OmegaVector::from_omegas(&w)?;
        let n = exact_complexity(&v, eps, DEFAULT_CAPACITY)?.exact_n().unwrap_or(0);
        let (lo, hi) = convolution_complexity(&v, eps, DEFAULT_BIN_WIDTH)?.log_bracket();
        let ln_n = (n as f64).ln();
        if !(lo <= ln_n && ln_n <= hi) {
            misses += 1;
        }
    }
    // Sample mean of Σ Û_j against its closed form, in standard errors.
    let w = random_omegas(r, 4, 0.1, 0.85);
    let samples = 50_000;
    let emp = sample_gd(&OmegaVector::from_omegas(&w)?, samples, seed)?;
    let mean: f64 = w.iter().map(|&o| -o.ln() * o / (1.0 - o)).sum();
    let var: f64 = w.iter().map(|&o| o.ln().powi(2) * o / (1.0 - o).powi(2)).sum();
    let z = (emp.mean() - mean).abs() / (var / samples as f64).sqrt();
    let worst = if misses > 0 { f64::INFINITY } else { z };
    Ok(Outcome {
        cases: cases + 1,
        worst,
        tolerance: 4.0,
        detail: format!("{misses} brackets miss ln n; sampler mean off by {z:.2} standard errors"),
    })
}

fn lemma1(r: &mut ChaCha8Rng, cases: usize) -> Result<Outcome, CliError> {
    const X: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
    let mut worst: f64 = 0.0;
    for i in 0..cases {
        let d = r.random_range(1..=8);
        let w = random_omegas(r, d, 0.05, 0.95);
        worst = worst.max(lemma1_verify(&OmegaVector::from_omegas(&w)?, X[i % 4])?.max_residual());
    }
    Ok(Outcome { cases, worst, tolerance: 1e-10, detail: "max residual of the three identities".into() })
}

fn gaussian_conditions() -> Result<Outcome, CliError> {
    let plan = normalization_plan(&SigmaSequence::Constant { sigma: 1.0 })?;
    let d_max = 5000;
    let omega = plan.omega(d_max)?;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for tau in default_tau_grid().into_iter().take(5) {
        let Some(dt) = d_tau(&plan, &omega, tau, d_max)? else {
            worst = f64::INFINITY;
            continue;
        };
        let o = omega.truncate(dt)?;
        let b = plan.b_d(dt)?;
        worst = worst
            .max(condition_a(&o, b, tau)?.abs())
            .max(condition_b(&o, b, tau, plan.hat_a(&o))?.abs())
            .max((condition_c(&o, b, tau)? - 1.0).abs());
        cases += 1;
    }
    Ok(Outcome { cases, worst, tolerance: 1e-12, detail: "|A|, |B|, |C - 1| at d_tau, constant sigma".into() })
}

fn limit_laws(r: &mut ChaCha8Rng, cases: usize, seed: u64) -> Result<Outcome, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let p = r.random_range(1e-6..1.0 - 1e-6);
        worst = worst.max((normal_cdf(normal_quantile(p)?) - p).abs());
    }
    for mu in [0.5, 1.0, 2.0] {
        worst = worst.max(DickmanLaw::new(mu)?.mass_defect());
        let t = SelfDecompTriplet::dickman(mu)?;
        for tau in [0.25, 0.5, 1.0, 2.0] {
            worst = worst.max((t.c + gamma_tau(t.levy.as_ref(), tau)? - mu * f64::min(tau, 1.0)).abs());
        }
    }
    // KS at the 0.1% level (λ = 1.95) so the verdict does not hinge on the seed.
    let n = 20_000;
    let law = DickmanLaw::new(1.0)?;
    let ks = ks_statistic(&dickman_sample(1.0, n, seed, DICKMAN_BURN_IN)?, |x| law.cdf(x));
    let ks_ratio = ks / (1.95 / (n as f64).sqrt());
    let tolerance = 1e-8;
    let worst = if ks_ratio >= 1.0 { f64::INFINITY } else { worst };
    Ok(Outcome {
        cases: cases + 13,
        worst,
        tolerance,
        detail: format!("Phi round trip, Dickman mass, gamma_tau; perpetuity KS {ks:.5} ({:.0}% of threshold)", 100.0 * ks_ratio),
    })
}

fn fixture(values: &[f64]) -> Outcome {
    match OmegaVector::from_omegas(values) {
        Ok(_) => Outcome { cases: 1, worst: 0.0, tolerance: 0.0, detail: format!("{values:?} accepted") },
        Err(e) => Outcome { cases: 1, worst: f64::INFINITY, tolerance: 0.0, detail: format!("OmegaVector invariant failure: {e}") },
    }
}

/// Runs every suite; returns whether all passed.
pub fn run(args: &VerifyArgs, format: Format, out: Option<&Path>) -> Result<bool, CliError> {
    let body = serde_json::json!({ "seed": args.seed, "cases": args.cases, "inject_omega": args.inject_omega });
    let hash = config_hash("verify", &body.to_string());
    let c = args.cases;
    let mut suites: Vec<(&'static str, Result<Outcome, CliError>)> = vec![
        ("kernel_spectrum", kernel_spectrum(&mut rng(args.seed, 1), c)),
        ("eigen_enumeration", enumeration(&mut rng(args.seed, 2), c)),
        ("spectral_distribution", spectral(&mut rng(args.seed, 3), c, args.seed)),
        ("lemma1", lemma1(&mut rng(args.seed, 4), c)),
        ("gaussian_conditions", gaussian_conditions()),
        ("limit_laws", limit_laws(&mut rng(args.seed, 5), c, args.seed)),
    ];
    if !args.inject_omega.is_empty() {
        suites.push(("fixture", Ok(fixture(&args.inject_omega))));
    }
    let mut all = true;
    let rows: Vec<SuiteRow> = suites
        .into_iter()
        .map(|(suite, outcome)| {
            let (status, o) = match outcome {
                Ok(o) if o.passed() => ("PASS", o),
                Ok(o) => ("FAIL", o),
                Err(e) => ("FAIL", Outcome { cases: 0, worst: f64::INFINITY, tolerance: 0.0, detail: e.to_string() }),
            };
            all &= status == "PASS";
            SuiteRow {
                config_hash: hash.clone(),
                suite,
                status,
                cases: o.cases,
                worst: o.worst,
                tolerance: o.tolerance,
                detail: o.detail,
            }
        })
        .collect();
    write_out(&render(&rows, HEADER, format)?, out)?;
    Ok(all)
}
