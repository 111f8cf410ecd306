//! Boundedness criteria, the three limit conditions on `ω`, Lemma 1
//! remainders and the `(a_d, b_d, q)` normalizations.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel_spectrum::{omega_from_sigma, OmegaVector, SigmaSequence};
use crate::limit_laws::{gamma_tau, LimitLaw, QuantileFn};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundednessVerdict {
    Bounded,
    Unbounded,
    InconclusiveNumeric,
}

/// Partial sums of `σ_j⁻²`, `ω_j` and `ω_j/(1-ω_j)` through `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSums {
    pub d: usize,
    pub inv_sigma_sq: f64,
    pub omega: f64,
    pub omega_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub verdict: BoundednessVerdict,
    /// Checkpoints at powers of two and at `probe_d`.
    pub partial_sums: Vec<PartialSums>,
    /// Increment of `Σ ω_j/(1-ω_j)` over the second half, `(probe_d/2, probe_d]`.
    pub trend: f64,
}

/// Whether `sup_d n(ε)` is finite, decided by `Σ σ_j⁻²`.
pub fn boundedness_criterion(spec: &SigmaSequence, probe_d: usize) -> Result<BoundednessReport> {
    if probe_d < 10 {
        return Err(Error::domain(format!("probe_d must be at least 10, got {probe_d}")));
    }
    spec.validate()?;
    let verdict = match spec {
        SigmaSequence::Constant { .. } => BoundednessVerdict::Unbounded,
        SigmaSequence::Power { alpha, .. } if *alpha > 1.0 => BoundednessVerdict::Bounded,
        SigmaSequence::Power { .. } => BoundednessVerdict::Unbounded,
        SigmaSequence::Jlogj { .. } => BoundednessVerdict::Unbounded,
        SigmaSequence::Explicit { .. } => BoundednessVerdict::InconclusiveNumeric,
    };
    let s2 = spec.sigma_squares(probe_d)?;
    let omega = OmegaVector::from_sigma_squares(&s2)?;
    let mut inv = CompensatedSum::new();
    let mut om = CompensatedSum::new();
    let mut ratio = CompensatedSum::new();
    let mut sums = Vec::new();
    let mut half_ratio = 0.0;
    for j in 0..probe_d {
        let w = omega.omegas()[j];
        inv.add(1.0 / s2[j]);
        om.add(w);
        ratio.add(w / (-omega.log_one_minus_abs()[j]).exp());
        let d = j + 1;
        if d.is_power_of_two() || d == probe_d {
            sums.push(PartialSums { d, inv_sigma_sq: inv.value(), omega: om.value(), omega_ratio: ratio.value() });
        }
        if d == probe_d / 2 {
            half_ratio = ratio.value();
        }
    }
    Ok(BoundednessReport { verdict, partial_sums: sums, trend: ratio.value() - half_ratio })
}

fn mean_term(omega: &OmegaVector, j: usize) -> f64 {
    let w = omega.omegas()[j];
    omega.log_omegas_abs()[j] * w / (-omega.log_one_minus_abs()[j]).exp()
}

fn var_term(omega: &OmegaVector, j: usize) -> f64 {
    let w = omega.omegas()[j];
    let l = omega.log_omegas_abs()[j];
    let om = (-omega.log_one_minus_abs()[j]).exp();
    l * l * w / (om * om)
}

/// `Σ_j |ln ω_j| ω_j/(1-ω_j)` over all `j`, or over `|ln ω_j| ≤ cut`.
fn mean_sum(omega: &OmegaVector, cut: Option<f64>) -> f64 {
    (0..omega.dim())
        .filter(|&j| cut.is_none_or(|c| omega.log_omegas_abs()[j] <= c))
        .map(|j| mean_term(omega, j))
        .collect::<CompensatedSum>()
        .value()
}

/// `â_d = a_d - Σ_j |ln(1-ω_j)|`.
pub fn hat_a_d(omega: &OmegaVector, a_d: f64) -> f64 {
    a_d - omega.top_log_magnitude()
}

/// `Σ_{|ln ω_j| > τ b_d} ω_j`.
pub fn condition_a(omega: &OmegaVector, b_d: f64, tau: f64) -> Result<f64> {
    check_tau_b(b_d, tau)?;
    let cut = tau * b_d;
    Ok((0..omega.dim())
        .filter(|&j| omega.log_omegas_abs()[j] > cut)
        .map(|j| omega.omegas()[j])
        .collect::<CompensatedSum>()
        .value())
}

/// `(Σ_{|ln ω_j| ≤ τ b_d} |ln ω_j| ω_j/(1-ω_j) - â_d) / b_d`.
pub fn condition_b(omega: &OmegaVector, b_d: f64, tau: f64, hat_a: f64) -> Result<f64> {
    check_tau_b(b_d, tau)?;
    Ok((mean_sum(omega, Some(tau * b_d)) - hat_a) / b_d)
}

/// `Σ_{|ln ω_j| ≤ τ b_d} |ln ω_j|² ω_j/(1-ω_j)² / b_d²`.
pub fn condition_c(omega: &OmegaVector, b_d: f64, tau: f64) -> Result<f64> {
    check_tau_b(b_d, tau)?;
    let cut = tau * b_d;
    let s = (0..omega.dim())
        .filter(|&j| omega.log_omegas_abs()[j] <= cut)
        .map(|j| var_term(omega, j))
        .collect::<CompensatedSum>()
        .value();
    Ok(s / (b_d * b_d))
}

fn check_tau_b(b_d: f64, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    if !(b_d.is_finite() && b_d > 0.0) {
        return Err(Error::domain(format!("b_d must be positive, got {b_d}")));
    }
    Ok(())
}

/// `min{k ≥ min_k : k |ln ω| > x}`.
///
/// `min_k = 2` is the cutoff of Lemma 1; `min_k = 0` the `ℕ₀` cutoff used for
/// the tails `P(Û_j > x) = ω^k`.
pub fn lattice_cutoff(omega: f64, x: f64, min_k: u64) -> u64 {
    let l = -omega.ln();
    let mut k = ((x / l).floor().max(0.0) as u64 + 1).max(min_k);
    while (k as f64) * l <= x {
        k += 1;
    }
    while k > min_k && ((k - 1) as f64) * l > x {
        k -= 1;
    }
    k
}

/// Left sides, right sides and absolute residuals of the three identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Check {
    pub lhs: [f64; 3],
    pub rhs: [f64; 3],
    pub remainders: [f64; 3],
}

impl Lemma1Check {
    pub fn residuals(&self) -> [f64; 3] {
        [
            (self.lhs[0] - self.rhs[0]).abs(),
            (self.lhs[1] - self.rhs[1]).abs(),
            (self.lhs[2] - self.rhs[2]).abs(),
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }
}

/// Evaluates both sides of the tail, mean and variance identities at `x`.
///
/// Left sides are summed term by term (the tail series until its remainder
/// drops below `1e-17`); right sides use the closed-form remainders
/// `R_0, R_1, R_2`.
pub fn lemma1_verify(omega: &OmegaVector, x: f64) -> Result<Lemma1Check> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain(format!("x must be positive, got {x}")));
    }
    let mut lhs = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let mut rhs = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let mut rem = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    for j in 0..omega.dim() {
        let w = omega.omegas()[j];
        let l = omega.log_omegas_abs()[j];
        let om = (-omega.log_one_minus_abs()[j]).exp();

        // Tail series Σ_{k ≥ 1, k l > x} (1-ω) ω^k.
        let k0 = lattice_cutoff(w, x, 1);
        let mut pw = w.powi(k0 as i32);
        let mut tail = CompensatedSum::new();
        while pw >= 1e-17 {
            tail.add(om * pw);
            pw *= w;
        }
        lhs[0].add(tail.value());

        // Mean and variance pieces: finitely many k with k l ≤ x.
        let mut m1 = CompensatedSum::new();
        let mut m2 = CompensatedSum::new();
        let mut k = 1u64;
        while (k as f64) * l <= x {
            let kl = k as f64 * l;
            let p = om * w.powi(k as i32);
            m1.add(kl * p);
            m2.add(kl * kl * p);
            k += 1;
        }
        lhs[1].add(m1.value());
        lhs[2].add(m2.value() - m1.value() * m1.value());

        if l > x {
            rhs[0].add(w);
            continue;
        }
        let kj = lattice_cutoff(w, x, 2);
        let kf = kj as f64;
        let wk = w.powi(kj as i32);
        let r0 = wk;
        let r1 = l * wk / om * (kf * om + w);
        let r2 = l * l * wk / (om * om)
            * (kf * kf * om * om * (1.0 + wk) + 2.0 * kf * om * wk * w + om * w + wk * w * w);
        rem[0].add(r0);
        rem[1].add(r1);
        rem[2].add(r2);
        rhs[1].add(mean_term(omega, j));
        rhs[2].add(var_term(omega, j));
    }
    let remainders = [rem[0].value(), rem[1].value(), rem[2].value()];
    Ok(Lemma1Check {
        lhs: [lhs[0].value(), lhs[1].value(), lhs[2].value()],
        rhs: [
            rhs[0].value() + remainders[0],
            rhs[1].value() - remainders[1],
            rhs[2].value() - remainders[2],
        ],
        remainders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SigmaToConst,
    PowerLaw,
    Jlogj,
}

/// Normalization `(a_d, b_d)` and limit law for a sequence kind.
#[derive(Debug, Clone)]
pub struct NormalizationPlan {
    pub scenario: Scenario,
    pub spec: SigmaSequence,
    pub law: LimitLaw,
    /// Limiting `ω` (sequences with a positive limit `σ`).
    pub omega_limit: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// Builds the plan for `spec`.
///
/// Explicit lists count as `σ_j → σ` and need a declared `limit`.
pub fn normalization_plan(spec: &SigmaSequence) -> Result<NormalizationPlan> {
    spec.validate()?;
    let base = |scenario, law| NormalizationPlan {
        scenario,
        spec: spec.clone(),
        law,
        omega_limit: None,
        rho: None,
        alpha: None,
        beta: None,
    };
    let const_plan = |sigma: f64| -> Result<NormalizationPlan> {
        let mut p = base(Scenario::SigmaToConst, LimitLaw::Normal);
        if sigma > 0.0 {
            let w = omega_from_sigma(sigma)?;
            p.omega_limit = Some(w);
            p.rho = Some(-w.ln() * w.sqrt() / (1.0 - w));
        } else {
            p.rho = Some(1.0);
        }
        Ok(p)
    };
    match spec {
        SigmaSequence::Constant { sigma } => const_plan(*sigma),
        SigmaSequence::Explicit { limit: Some(l), .. } => const_plan(*l),
        SigmaSequence::Explicit { limit: None, .. } => Err(Error::Config(
            "explicit sequences need a declared `limit` to select a normalization".into(),
        )),
        SigmaSequence::Power { alpha, .. } if *alpha > 1.0 => Err(Error::NotApplicable(format!(
            "complexity bounded; no normalization applies (alpha = {alpha} > 1)"
        ))),
        SigmaSequence::Power { alpha, beta } => {
            let mut p = base(Scenario::PowerLaw, LimitLaw::Normal);
            p.alpha = Some(*alpha);
            p.beta = Some(*beta);
            Ok(p)
        }
        SigmaSequence::Jlogj { beta } => {
            let mut p = base(Scenario::Jlogj, LimitLaw::dickman(1.0 / beta)?);
            p.beta = Some(*beta);
            Ok(p)
        }
    }
}

impl NormalizationPlan {
    pub fn omega(&self, d: usize) -> Result<OmegaVector> {
        OmegaVector::from_sequence(&self.spec, d)
    }

    /// `b_d`.
    pub fn b_d(&self, d: usize) -> Result<f64> {
        if d == 0 {
            return Err(Error::domain("d must be at least 1"));
        }
        let df = d as f64;
        Ok(match self.scenario {
            Scenario::SigmaToConst => self.rho.expect("set") * df.sqrt(),
            Scenario::PowerLaw => {
                let a = self.alpha.expect("set");
                let b = self.beta.expect("set");
                if a == 1.0 {
                    df.ln().powf(1.5) / (3.0 * b).sqrt()
                } else {
                    a / ((1.0 - a) * b).sqrt() * df.powf((1.0 - a) / 2.0) * df.ln()
                }
            }
            Scenario::Jlogj => df.ln().max(1.0),
        })
    }

    /// Exact `a_d` on the generated `ω`.
    pub fn a_d(&self, omega: &OmegaVector) -> f64 {
        match self.scenario {
            Scenario::Jlogj => 0.0,
            _ => mean_sum(omega, None) + omega.top_log_magnitude(),
        }
    }

    /// `â_d`, summed directly so the constant-σ condition (B) cancels exactly.
    pub fn hat_a(&self, omega: &OmegaVector) -> f64 {
        match self.scenario {
            Scenario::Jlogj => -omega.top_log_magnitude(),
            _ => mean_sum(omega, None),
        }
    }

    /// Leading-order `a_d` for reporting next to the exact sum.
    pub fn a_d_asymptotic(&self, d: usize) -> Option<f64> {
        let df = d as f64;
        match self.scenario {
            Scenario::SigmaToConst => {
                let w = self.omega_limit?;
                Some((-w.ln() * w / (1.0 - w) - (1.0 - w).ln()) * df)
            }
            Scenario::PowerLaw => {
                let a = self.alpha?;
                let b = self.beta?;
                if a == 1.0 {
                    Some(df.ln().powi(2) / (2.0 * b) + df.ln() / b)
                } else {
                    let p = df.powf(1.0 - a);
                    Some(a / ((1.0 - a) * b) * p * df.ln() + p / ((1.0 - a) * b))
                }
            }
            Scenario::Jlogj => None,
        }
    }

    pub fn quantile_fn(&self) -> QuantileFn {
        QuantileFn::new(self.law.clone())
    }

    /// Checks `b_d > 0` on `ds` and that it increases along the grid's tail.
    pub fn check_b_grid(&self, ds: &[usize]) -> Result<()> {
        let bs: Vec<f64> = ds.iter().map(|&d| self.b_d(d)).collect::<Result<_>>()?;
        if let Some(i) = bs.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Domain(format!("b_d = {} at d = {} is not positive", bs[i], ds[i])));
        }
        if bs.len() >= 2 && bs[bs.len() - 1] <= bs[0] {
            return Err(Error::Domain("b_d does not grow along the evaluation grid".into()));
        }
        Ok(())
    }
}

/// `a_d + q(ε) b_d`.
pub fn predicted_log_complexity(plan: &NormalizationPlan, d: usize, epsilon: f64) -> Result<f64> {
    let omega = plan.omega(d)?;
    let q = plan.quantile_fn().q(epsilon)?;
    Ok(plan.a_d(&omega) + q * plan.b_d(d)?)
}

/// Smallest `d ≤ d_max` with `max_{j ≤ d} |ln ω_j| ≤ τ b_d`, scanning prefixes of `omega`.
pub fn d_tau(plan: &NormalizationPlan, omega: &OmegaVector, tau: f64, d_max: usize) -> Result<Option<usize>> {
    let mut running = 0.0f64;
    for d in 1..=d_max.min(omega.dim()) {
        running = running.max(omega.log_omegas_abs()[d - 1]);
        if running <= tau * plan.b_d(d)? {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

/// One `(d, τ)` cell of a condition report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionRow {
    pub d: usize,
    pub tau: f64,
    pub sum_a: f64,
    pub target_a: f64,
    pub sum_b: f64,
    pub target_b: f64,
    pub sum_c: f64,
    pub target_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub tau: f64,
    pub d: usize,
    pub residuals: [f64; 3],
    pub within: [bool; 3],
}

/// Sums of conditions (A), (B), (C) over a `τ × d` grid with their targets
/// `-L(τ)`, `c + γ_τ` and `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub tau_grid: Vec<f64>,
    pub d_values: Vec<usize>,
    pub rows: Vec<ConditionRow>,
    pub tolerance: f64,
}

/// Default `τ` grid `2⁻¹, …, 2⁻⁶`.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=6).map(|k| 0.5f64.powi(k)).collect()
}

pub fn condition_report(
    plan: &NormalizationPlan,
    d_values: &[usize],
    tau_grid: &[f64],
    tolerance: f64,
) -> Result<ConditionReport> {
    let d_max = *d_values.iter().max().ok_or_else(|| Error::domain("empty d grid"))?;
    let full = plan.omega(d_max)?;
    let triplet = plan.law.triplet();
    let targets: Vec<(f64, f64, f64)> = tau_grid
        .iter()
        .map(|&t| Ok((-triplet.levy.value(t), triplet.c + gamma_tau(triplet.levy.as_ref(), t)?, triplet.v)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> =
        (0..d_values.len()).flat_map(|i| (0..tau_grid.len()).map(move |k| (i, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, k)| {
            let d = d_values[i];
            let tau = tau_grid[k];
            let omega = full.truncate(d)?;
            let b = plan.b_d(d)?;
            let (ta, tb, tc) = targets[k];
            Ok(ConditionRow {
                d,
                tau,
                sum_a: condition_a(&omega, b, tau)?,
                target_a: ta,
                sum_b: condition_b(&omega, b, tau, plan.hat_a(&omega))?,
                target_b: tb,
                sum_c: condition_c(&omega, b, tau)?,
                target_c: tc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { tau_grid: tau_grid.to_vec(), d_values: d_values.to_vec(), rows, tolerance })
}

impl ConditionReport {
    /// Residuals at the largest `d` for each `τ`, judged against `tolerance`.
    pub fn verdicts(&self) -> Vec<ConditionVerdict> {
        let d = self.d_values.iter().copied().max().unwrap_or(0);
        self.rows
            .iter()
            .filter(|r| r.d == d)
            .map(|r| {
                let res = [r.sum_a - r.target_a, r.sum_b - r.target_b, r.sum_c - r.target_c];
                ConditionVerdict { tau: r.tau, d, residuals: res, within: res.map(|x| x.abs() <= self.tolerance) }
            })
            .collect()
    }

    /// CSV with header `d,tau,sumA,targetA,sumB,targetB,sumC,targetC`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,tau,sumA,targetA,sumB,targetB,sumC,targetC\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.d, r.tau, r.sum_a, r.target_a, r.sum_b, r.target_b, r.sum_c, r.target_c
            ));
        }
        out
    }
}
