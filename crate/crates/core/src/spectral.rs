//! Binned spectral distribution on the log-eigenvalue axis `x = |ln λ|`.
//!
//! The product spectrum is the law of `Σ_j U_j` with independent
//! `P(U_j = |ln(1-ω_j)| + k|ln ω_j|) = (1-ω_j) ω_j^k`, `k ≥ 0`. The measure
//! is built by direct d-fold convolution on a grid of width `δ` anchored at
//! `origin = Σ_j |ln(1-ω_j)|`, so bin 0 holds the largest eigenvalue.
//!
//! Alongside eigenvalue mass each bin carries the eigenvalue *count*. Counts
//! grow like `e^x`, so they are convolved exponentially tilted: bin `i`
//! stores `count_i · e^{-(origin + iδ)}`, which stays within `e^{±dδ/2}` of
//! the bin mass. Tilts multiply along the convolution exactly, so the count
//! measure is exact up to rounding and is reported as `log_count`.
//!
//! Each lattice atom is rounded to the nearest bin, so an eigenvalue's bin
//! position differs from its true `|ln λ|` by at most `dδ/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::enumeration::{exact_complexity, ComplexityEstimate, ComplexityMode, ComplexityResult};
use crate::error::{Error, Result};
use crate::kernel_spectrum::OmegaVector;
use crate::sum::{log_add_exp, CompensatedSum};

/// Default bin width on the `|ln λ|` axis.
pub const DEFAULT_BIN_WIDTH: f64 = 1e-3;

/// Relative rounding allowance on convolved counts, applied in log space to
/// both ends of the `ln n` bracket.
const COUNT_ROUNDING: f64 = 1e-12;

/// Per-dimension truncation: `ω^(k_max+1) < TRUNCATION_BUDGET / d`.
const TRUNCATION_BUDGET: f64 = 1e-15;

const CHUNK: usize = 4096;

/// Law of `Û_j = U_j - |ln(1-ω_j)|` on its lattice `k |ln ω_j|`, truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredSummandLaw {
    pub lattice_step: f64,
    /// `p_k = (1-ω) ω^k`, `k = 0..=k_max`.
    pub probabilities: Vec<f64>,
    /// `ω^(k_max+1)`.
    pub truncation_tail: f64,
}

impl CenteredSummandLaw {
    /// Truncates once the remaining tail drops below `tail_budget`.
    pub fn new(omega: f64, tail_budget: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::domain(format!("omega must lie in (0,1), got {omega}")));
        }
        let ln_w = omega.ln();
        // Smallest k_max with ω^(k_max+1) < budget.
        let mut kmax = ((tail_budget.ln() / ln_w).ceil() as i64 - 1).max(0) as usize;
        while omega.powi(kmax as i32 + 1) >= tail_budget {
            kmax += 1;
        }
        while kmax > 0 && omega.powi(kmax as i32) < tail_budget {
            kmax -= 1;
        }
        let probabilities = (0..=kmax).map(|k| (1.0 - omega) * omega.powi(k as i32)).collect();
        Ok(Self {
            lattice_step: -ln_w,
            probabilities,
            truncation_tail: omega.powi(kmax as i32 + 1),
        })
    }

    pub fn k_max(&self) -> usize {
        self.probabilities.len() - 1
    }
}

/// Eigenvalue mass and count binned by `|ln λ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectralMeasure {
    origin: f64,
    bin_width: f64,
    dims: usize,
    mass: Vec<f64>,
    log_count: Vec<f64>,
    truncated_mass: f64,
    cum_mass: Vec<f64>,
    cum_log_count: Vec<f64>,
}

impl LogSpectralMeasure {
    /// Left edge of bin 0 (`Σ_j |ln(1-ω_j)|`).
    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Natural log of the eigenvalue count per bin (`-inf` when empty).
    pub fn log_count(&self) -> &[f64] {
        &self.log_count
    }

    /// Upper bound on eigenvalue mass missing from the bins.
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.cum_mass.last().copied().unwrap_or(0.0)
    }

    /// `|ln λ|` position of bin `i`.
    pub fn position(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.bin_width
    }

    /// Last index with position ≤ `x`, or `None` if `x < origin`.
    fn last_bin_at_or_below(&self, x: f64) -> Option<usize> {
        if x < self.origin {
            return None;
        }
        let i = ((x - self.origin) / self.bin_width).floor();
        if !i.is_finite() || i >= self.len() as f64 {
            return Some(self.len() - 1);
        }
        let mut idx = i as usize;
        // Guard the floor against rounding in the division.
        while idx + 1 < self.len() && self.position(idx + 1) <= x {
            idx += 1;
        }
        while idx > 0 && self.position(idx) > x {
            idx -= 1;
        }
        if self.position(idx) > x {
            return None;
        }
        Some(idx)
    }

    /// Mass of eigenvalues with binned `|ln λ| ≤ x`.
    pub fn cumulative_mass_at(&self, x: f64) -> f64 {
        self.last_bin_at_or_below(x).map_or(0.0, |i| self.cum_mass[i])
    }

    /// `ln` of the number of eigenvalues with binned `|ln λ| ≤ x` (`-inf` if none).
    pub fn cumulative_log_count_at(&self, x: f64) -> f64 {
        self.last_bin_at_or_below(x)
            .map_or(f64::NEG_INFINITY, |i| self.cum_log_count[i])
    }

    /// Cumulative mass through bin `i`.
    pub fn cumulative_mass(&self, i: usize) -> f64 {
        self.cum_mass[i]
    }

    /// `ln` cumulative count through bin `i`.
    pub fn cumulative_log_count(&self, i: usize) -> f64 {
        self.cum_log_count[i]
    }

    /// CSV with header `x_left,mass,log_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_left,mass,log_count\n");
        for i in 0..self.len() {
            if self.mass[i] == 0.0 && self.log_count[i] == f64::NEG_INFINITY {
                continue;
            }
            out.push_str(&format!("{},{},{}\n", self.position(i), self.mass[i], self.log_count[i]));
        }
        out
    }
}

struct Atom {
    shift: usize,
    mass: f64,
    tilted_count: f64,
}

/// Gather-form convolution of `(mass, tilted)` with `atoms` into the output
/// prefix `[0, out_len)`. Each output bin sums its atoms in a fixed order, so
/// the result does not depend on the thread count.
fn convolve(src_mass: &[f64], src_tilt: &[f64], src_hi: usize, atoms: &[Atom], out_len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mass = vec![0.0; out_len];
    let mut tilt = vec![0.0; out_len];
    mass.par_chunks_mut(CHUNK)
        .zip(tilt.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (m, t))| {
            let start = c * CHUNK;
            for (l, (mo, to)) in m.iter_mut().zip(t.iter_mut()).enumerate() {
                let i = start + l;
                let mut am = 0.0;
                let mut at = 0.0;
                for a in atoms {
                    if a.shift > i {
                        break;
                    }
                    let s = i - a.shift;
                    if s > src_hi {
                        continue;
                    }
                    am += src_mass[s] * a.mass;
                    at += src_tilt[s] * a.tilted_count;
                }
                *mo = am;
                *to = at;
            }
        });
    (mass, tilt)
}

/// Binned d-fold convolution of the per-dimension spectra up to `|ln λ| ≤ x_max`.
pub fn build_measure(omega: &OmegaVector, bin_width: f64, x_max: f64) -> Result<LogSpectralMeasure> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
    }
    let origin = omega.top_log_magnitude();
    if !(x_max.is_finite() && x_max > origin) {
        return Err(Error::Range(format!(
            "x_max = {x_max} must exceed the largest eigenvalue's |ln| = {origin}"
        )));
    }
    let nbins = ((x_max - origin) / bin_width).floor() as usize + 1;
    let d = omega.dim();
    let budget = TRUNCATION_BUDGET / d as f64;

    let mut mass = vec![1.0];
    let mut tilt = vec![1.0];
    let mut hi = 0usize;
    let mut truncated = CompensatedSum::new();

    for j in 0..d {
        let w = omega.omegas()[j];
        let law = CenteredSummandLaw::new(w, budget)?;
        truncated.add(law.truncation_tail);
        let one_minus = (-omega.log_one_minus_abs()[j]).exp();
        let atoms: Vec<Atom> = law
            .probabilities
            .iter()
            .enumerate()
            .filter_map(|(k, &p)| {
                let shift = (k as f64 * law.lattice_step / bin_width).round();
                if shift >= nbins as f64 {
                    return None;
                }
                let shift = shift as usize;
                Some(Atom {
                    shift,
                    mass: p,
                    tilted_count: one_minus * (-(shift as f64) * bin_width).exp(),
                })
            })
            .collect();
        let law_mass = crate::sum::compensated_sum(law.probabilities.iter().copied());
        let max_shift = atoms.last().map_or(0, |a| a.shift);
        let out_len = (hi + max_shift + 1).min(nbins);
        let before = crate::sum::compensated_sum(mass[..=hi].iter().copied());
        let (m, t) = convolve(&mass, &tilt, hi, &atoms, out_len);
        mass = m;
        tilt = t;
        hi = out_len - 1;
        let after = crate::sum::compensated_sum(mass.iter().copied());
        // Mass pushed past x_max at this step.
        let lost = before * law_mass - after;
        if lost > 0.0 {
            truncated.add(lost);
        }
    }

    let mut full_mass = vec![0.0; nbins];
    full_mass[..mass.len()].copy_from_slice(&mass);
    let mut log_count = vec![f64::NEG_INFINITY; nbins];
    for (i, &t) in tilt.iter().enumerate() {
        if t > 0.0 {
            log_count[i] = t.ln() + origin + i as f64 * bin_width;
        }
    }

    let mut cum_mass = Vec::with_capacity(nbins);
    let mut acc = CompensatedSum::new();
    for &m in &full_mass {
        acc.add(m);
        cum_mass.push(acc.value());
    }
    let mut cum_log_count = Vec::with_capacity(nbins);
    let mut lc = f64::NEG_INFINITY;
    for &c in &log_count {
        lc = log_add_exp(lc, c);
        cum_log_count.push(lc);
    }
    // Floating slack on the recorded bound.
    let truncated_mass = truncated.value() + 1e-15 * d as f64;

    Ok(LogSpectralMeasure {
        origin,
        bin_width,
        dims: d,
        mass: full_mass,
        log_count,
        truncated_mass,
        cum_mass,
        cum_log_count,
    })
}

/// `G_d(x)`: mass of eigenvalues with `|ln λ| ≤ a + b·x`, clamped to the grid.
pub fn gd_value(measure: &LogSpectralMeasure, a: f64, b: f64, x: f64) -> Result<f64> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::domain(format!("b_d must be positive, got {b}")));
    }
    Ok(measure.cumulative_mass_at(a + b * x))
}

/// Bracket on `ln n(ε)` from the binned mass and count measures.
///
/// With `T = 1 - ε²`, let `i*` be the first bin whose cumulative mass
/// reaches `T`. Positions are off by at most `dδ/2`, so
/// `n ≤ N(pos(i*) + dδ)` and `n > N(pos(j) - dδ)` for the last bin `j`
/// whose cumulative mass plus truncation stays below `T`.
pub fn log_complexity_estimate(measure: &LogSpectralMeasure, epsilon: f64) -> Result<ComplexityResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    let target = 1.0 - epsilon * epsilon;
    let n = measure.len();
    let istar = measure.cum_mass.partition_point(|&c| c < target);
    if istar >= n {
        return Err(Error::Range(format!(
            "measure holds mass {} < 1 - eps^2 = {target}; increase x_max",
            measure.total_mass()
        )));
    }
    let margin = measure.dims + 1;
    let hi_idx = istar + margin;
    if hi_idx >= n {
        return Err(Error::Range(format!(
            "upper count bracket needs bin {hi_idx} beyond the grid ({n} bins); increase x_max"
        )));
    }
    // Eigenvalues lost to truncation could still sit below the upper position.
    // Each carries mass above e^{-(pos + δ)}; work in logs, e^x overflows past x ≈ 709.
    let log_missing = measure.truncated_mass.ln() + measure.position(hi_idx) + measure.bin_width;
    let hi = log_add_exp(measure.cum_log_count[hi_idx], log_missing);

    let below = measure.cum_mass[..istar].partition_point(|&c| c + measure.truncated_mass < target);
    let lo = if below == 0 || below - 1 < margin {
        0.0
    } else {
        log_add_exp(measure.cum_log_count[below - 1 - margin], 0.0)
    };
    let lo = (lo - COUNT_ROUNDING).max(0.0);
    let hi = hi + COUNT_ROUNDING;
    Ok(ComplexityResult {
        estimate: ComplexityEstimate::LogBracket { lo, hi: hi.max(lo) },
        achieved_cumulative_mass: measure.cum_mass[istar],
        epsilon,
        mode: ComplexityMode::Convolution,
    })
}

/// Upper end of the `|ln λ|` axis that certainly holds mass `1 - ε²`.
///
/// By Cantelli's inequality, mean + `k`·sd with `k = 1/ε` leaves at most
/// `ε²/(1+ε²)` above; a few extra lattice steps cover the count bracket.
pub fn suggested_x_max(omega: &OmegaVector, epsilon: f64, bin_width: f64) -> f64 {
    let mut mean = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    let mut step: f64 = 0.0;
    for j in 0..omega.dim() {
        let w = omega.omegas()[j];
        let l = omega.log_omegas_abs()[j];
        mean.add(l * w / (1.0 - w));
        var.add(l * l * w / ((1.0 - w) * (1.0 - w)));
        step = step.max(l);
    }
    let sd = var.value().max(0.0).sqrt();
    let k = 1.0 / epsilon + 1.0;
    omega.top_log_magnitude() + mean.value() + k * sd + 2.0 * step + (omega.dim() as f64 + 4.0) * bin_width + 1.0
}

/// Bracket on `ln n(ε)` by convolution, widening `x_max` while the bracket
/// runs off the grid.
pub fn convolution_complexity(omega: &OmegaVector, epsilon: f64, bin_width: f64) -> Result<ComplexityResult> {
    let origin = omega.top_log_magnitude();
    let mut x_max = suggested_x_max(omega, epsilon, bin_width);
    let mut attempts = 0;
    loop {
        let measure = build_measure(omega, bin_width, x_max)?;
        match log_complexity_estimate(&measure, epsilon) {
            Err(Error::Range(_)) if attempts < 4 => {
                attempts += 1;
                x_max = origin + 1.5 * (x_max - origin) + 1.0;
            }
            other => return other,
        }
    }
}

/// Exact enumeration, or the convolution bracket once enumeration hits `capacity`.
pub fn auto_complexity(
    omega: &OmegaVector,
    epsilon: f64,
    bin_width: f64,
    capacity: usize,
) -> Result<ComplexityResult> {
    match exact_complexity(omega, epsilon, capacity) {
        Err(Error::Capacity { .. }) => convolution_complexity(omega, epsilon, bin_width),
        other => other,
    }
}

/// Sorted Monte Carlo sample of `Σ_j Û_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples ≤ `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    pub fn mean(&self) -> f64 {
        crate::sum::compensated_sum(self.samples.iter().copied()) / self.samples.len() as f64
    }
}

const SHARD: usize = 8192;

/// `n_samples` draws of `Σ_j k_j |ln ω_j|` with `k_j` geometric on `N_0`,
/// `P(k) = (1-ω_j) ω_j^k`. Shard `s` draws from ChaCha stream `s`.
pub fn sample_gd(omega: &OmegaVector, n_samples: usize, seed: u64) -> Result<EmpiricalCdf> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1"));
    }
    let shards = n_samples.div_ceil(SHARD);
    let samples: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let len = SHARD.min(n_samples - s * SHARD);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let mut acc = 0.0;
                for (&w, &l) in omega.omegas().iter().zip(omega.log_omegas_abs()) {
                    // Inversion: k = floor(ln U / ln ω), U uniform on (0,1].
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let k = (u.ln() / w.ln()).floor();
                    acc += k * l;
                }
                out.push(acc);
            }
            out
        })
        .collect();
    Ok(EmpiricalCdf::from_samples(samples))
}

/// Kolmogorov-type distance between an empirical sample of `Σ Û_j` and the
/// binned measure, allowing the bins a position slack of `slack`.
///
/// Computes `sup_x max(F_n(x) - G(x + s), G(x - s) - F_n(x))` where `G` is the
/// measure's CDF shifted to the centered axis. With `s ≥ dδ/2` the binned
/// CDF brackets the exact one, so this bounds the true Kolmogorov distance.
pub fn kolmogorov_distance_to_measure(emp: &EmpiricalCdf, measure: &LogSpectralMeasure, slack: f64) -> f64 {
    let n = emp.len() as f64;
    let g = |x: f64| measure.cumulative_mass_at(measure.origin() + x);
    let g_left = |x: f64| {
        // G(x-), using the grid: last bin strictly below x.
        let y = measure.origin() + x;
        let i = measure.last_bin_at_or_below(y);
        match i {
            None => 0.0,
            Some(i) if measure.position(i) < y => measure.cumulative_mass(i),
            Some(0) => 0.0,
            Some(i) => measure.cumulative_mass(i - 1),
        }
    };
    let s = emp.samples();
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let f_at = j as f64 / n;
        let f_before = i as f64 / n;
        worst = worst.max(f_at - g(v + slack));
        // Just left of v the empirical CDF is f_before.
        worst = worst.max(g_left(v - slack) - f_before);
        i = j;
    }
    worst.max(measure.total_mass() - 1.0)
}
