use gklab_core::{omega_from_sigma, univariate_eigenvalue, univariate_tail, OmegaVector, SigmaSequence};
use proptest::prelude::*;

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

#[test]
fn omega_strictly_decreasing_in_sigma() {
    let ws: Vec<f64> = log_grid(1e-3, 1e3, 1000).map(|s| omega_from_sigma(s).unwrap()).collect();
    assert!(ws.windows(2).all(|p| p[0] > p[1]));
    assert!(ws.iter().all(|&w| w > 0.0 && w < 1.0));
}

#[test]
fn eigenvalues_plus_tail_sum_to_one() {
    for i in 1..200 {
        let w = i as f64 / 200.0;
        for k in [1u64, 2, 5, 20, 100] {
            let s: f64 = (1..=k).map(|m| univariate_eigenvalue(w, m).unwrap()).sum();
            assert!((s + univariate_tail(w, k).unwrap() - 1.0).abs() <= 1e-14, "w={w} k={k}");
        }
    }
}

/// Inverts `omega_from_sigma` by bisection on `ln σ`.
fn solve_sigma(target: f64) -> f64 {
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if omega_from_sigma(mid.exp()).unwrap() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[test]
fn numeric_inverse_recovers_sigma() {
    for i in 1..100 {
        let w = i as f64 / 100.0;
        let s = solve_sigma(w);
        // σ² = (1-ω)²/ω is the algebraic inverse.
        let exact = (1.0 - w) / w.sqrt();
        assert!((s - exact).abs() <= 1e-10 * exact, "w={w}: {s} vs {exact}");
    }
}

#[test]
fn spec_json_round_trip() {
    let json = r#"{"kind":"power","alpha":0.6,"beta":1.0}"#;
    let spec: SigmaSequence = serde_json::from_str(json).unwrap();
    assert_eq!(spec, SigmaSequence::Power { alpha: 0.6, beta: 1.0 });
    let back = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<SigmaSequence>(&back).unwrap(), spec);
    assert!(serde_json::from_str::<SigmaSequence>(r#"{"kind":"cubic"}"#).is_err());
}

proptest! {
    #[test]
    fn vector_invariants_hold(sig in prop::collection::vec(1e-3f64..1e3, 1..50)) {
        let v = OmegaVector::from_sigmas(&sig).unwrap();
        prop_assert!(v.check_invariants().is_ok());
        for (j, &s) in sig.iter().enumerate() {
            prop_assert_eq!(v.omegas()[j], omega_from_sigma(s).unwrap());
        }
    }

    #[test]
    fn one_minus_omega_accurate_for_small_sigma(s in 1e-8f64..1e-2) {
        let w = omega_from_sigma(s).unwrap();
        let v = OmegaVector::from_sigmas(&[s]).unwrap();
        // 1-ω ≈ σ - σ²/2 + ... for small σ.
        let one_minus = (-v.log_one_minus_abs()[0]).exp();
        prop_assert!((one_minus - (s - s * s / 2.0)).abs() <= 1e-2 * s * s + 1e-15);
        prop_assert!(w < 1.0);
    }
}
