#![allow(dead_code)]

use std::f64::consts::PI;

/// All products `Π (1-ω_j) ω_j^(k_j-1)` with `k_j ≤ kmax`, sorted descending.
pub fn brute_force_spectrum(omegas: &[f64], kmax: u32) -> Vec<f64> {
    let mut vals = vec![1.0f64];
    for &w in omegas {
        let mut next = Vec::with_capacity(vals.len() * kmax as usize);
        for &v in &vals {
            let mut f = 1.0 - w;
            for _ in 0..kmax {
                next.push(v * f);
                f *= w;
            }
        }
        vals = next;
    }
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Every product `≥ cutoff`, sorted descending. Branches are cut with the
/// bound `partial · Π_{rest}(1-ω)`, so nothing above the cutoff is missed.
pub fn brute_force_above(omegas: &[f64], cutoff: f64) -> Vec<f64> {
    fn rec(w: &[f64], rest_max: &[f64], partial: f64, cutoff: f64, out: &mut Vec<f64>) {
        if w.is_empty() {
            out.push(partial);
            return;
        }
        let mut f = 1.0 - w[0];
        while partial * f * rest_max[1] >= cutoff {
            rec(&w[1..], &rest_max[1..], partial * f, cutoff, out);
            f *= w[0];
        }
    }
    let mut rest_max = vec![1.0; omegas.len() + 1];
    for j in (0..omegas.len()).rev() {
        rest_max[j] = rest_max[j + 1] * (1.0 - omegas[j]);
    }
    let mut out = Vec::new();
    rec(omegas, &rest_max, 1.0, cutoff, &mut out);
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Brute-force `n(ε)`: lowers the cutoff until the materialized mass covers `1 - ε²`.
pub fn brute_force_complexity_pruned(omegas: &[f64], eps: f64) -> u64 {
    let target = 1.0 - eps * eps;
    let mut cutoff = 1e-3;
    loop {
        let list = brute_force_above(omegas, cutoff);
        let total: f64 = list.iter().sum();
        if total >= target + 1e-9 {
            return brute_force_complexity(&list, eps);
        }
        cutoff /= 10.0;
    }
}

/// `k` such that the mass neglected by `k_j ≤ k` is below `budget`.
pub fn kmax_for(omegas: &[f64], budget: f64) -> u32 {
    let worst = omegas.iter().copied().fold(0.0, f64::max);
    // Neglected mass ≤ Σ_j ω_j^k ≤ d · worst^k.
    let k = ((budget / omegas.len() as f64).ln() / worst.ln()).ceil();
    k.max(1.0) as u32
}

/// Minimal `n` with top-`n` mass ≥ `1 - ε²`, by scanning a sorted spectrum.
pub fn brute_force_complexity(sorted: &[f64], eps: f64) -> u64 {
    let target = 1.0 - eps * eps;
    let mut acc = 0.0f64;
    let mut c = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let y = v - c;
        let t = acc + y;
        c = (t - acc) - y;
        acc = t;
        if acc >= target {
            return i as u64 + 1;
        }
    }
    panic!("brute-force spectrum too short");
}

/// `erf(x) = (2/√π) e^{-x²} Σ 2^n x^{2n+1}/(2n+1)!!`, all terms positive.
pub fn erf_series(x: f64) -> f64 {
    let ax = x.abs();
    let mut term = ax;
    let mut sum = ax;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * ax * ax / (2.0 * n + 1.0);
        sum += term;
    }
    let v = 2.0 / PI.sqrt() * (-ax * ax).exp() * sum;
    v.copysign(x)
}

/// `Φ` from the series, usable where `erfc` does not underflow relative accuracy.
pub fn normal_cdf_series(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Seeded generator for test grids.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
