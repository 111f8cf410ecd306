//! Limiting self-decomposable laws: the standard normal and the
//! μ-convolution powers `D_μ` of the Dickman law, with their triplets.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Acklam's rational approximation to `Φ⁻¹` on the lower half, `p ≤ 0.5`
/// (relative error about 1e-9).
fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `Φ⁻¹(p)`, polished by Halley steps on the CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("probability must lie in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail and reflect, so quantile(1-p) = -quantile(p).
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = acklam_lower(q);
    for _ in 0..4 {
        let e = normal_cdf(x) - q;
        let u = e / normal_pdf(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1], as tabulated.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One GK15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod 15 on `[a, b]` to absolute tolerance `tol`.
///
/// Panels are bisected in order of largest error estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4000;
    let (v, e) = gk15(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            return Ok(panels.iter().map(|p| p.2).sum());
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Numeric {
                message: format!("quadrature on [{a}, {b}] did not reach tolerance {tol:e}"),
                achieved: total_err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (pa + pb);
        let (v1, e1) = gk15(f, pa, m);
        let (v2, e2) = gk15(f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}

/// Lévy spectral function `L` of a law with no negative jumps, given by
/// the density of `dL` on `(0, ∞)`.
pub trait LevySpectral: Send + Sync {
    /// `L(x)`; zero for `x < 0`.
    fn value(&self, x: f64) -> f64;
    /// Density of `dL` at `y > 0`.
    fn density(&self, y: f64) -> f64;
    /// Right end of the support of `dL` (may be infinite).
    fn support_end(&self) -> f64;
    /// Points in `(0, support_end)` where the density is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    fn is_zero(&self) -> bool {
        false
    }
}

/// `L ≡ 0` (Gaussian laws).
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroLevy;

impl LevySpectral for ZeroLevy {
    fn value(&self, _x: f64) -> f64 {
        0.0
    }
    fn density(&self, _y: f64) -> f64 {
        0.0
    }
    fn support_end(&self) -> f64 {
        0.0
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `L(x) = μ ln x` on `(0, 1]`, zero elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct DickmanLevy {
    pub mu: f64,
}

impl LevySpectral for DickmanLevy {
    fn value(&self, x: f64) -> f64 {
        if x > 0.0 && x <= 1.0 {
            self.mu * x.ln()
        } else {
            0.0
        }
    }
    fn density(&self, y: f64) -> f64 {
        if y > 0.0 && y <= 1.0 {
            self.mu / y
        } else {
            0.0
        }
    }
    fn support_end(&self) -> f64 {
        1.0
    }
}

/// Triplet `(c, v, L)` of a self-decomposable law with `L = 0` on `(-∞, 0)`.
#[derive(Clone)]
pub struct SelfDecompTriplet {
    pub c: f64,
    pub v: f64,
    pub levy: Arc<dyn LevySpectral>,
}

impl std::fmt::Debug for SelfDecompTriplet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SelfDecompTriplet").field("c", &self.c).field("v", &self.v).finish_non_exhaustive()
    }
}

impl SelfDecompTriplet {
    pub fn gaussian() -> Self {
        Self { c: 0.0, v: 1.0, levy: Arc::new(ZeroLevy) }
    }

    pub fn dickman(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self { c: PI * mu / 4.0, v: 0.0, levy: Arc::new(DickmanLevy { mu }) })
    }
}

const GAMMA_TAU_TOL: f64 = 1e-10;

/// `γ_τ = ∫_0^τ y³/(1+y²) dL(y) - ∫_τ^∞ y/(1+y²) dL(y)`.
pub fn gamma_tau(levy: &dyn LevySpectral, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    if levy.is_zero() {
        return Ok(0.0);
    }
    let end = levy.support_end();
    let mut cuts = vec![0.0, tau.min(end)];
    cuts.extend(levy.breakpoints().into_iter().filter(|&p| p > 0.0 && p < end));
    cuts.push(end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let inner = |y: f64| y * y * y / (1.0 + y * y) * levy.density(y);
    let outer = |y: f64| y / (1.0 + y * y) * levy.density(y);
    let panels = (cuts.len() - 1) as f64;
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= tau {
            acc += integrate(&inner, a, b, GAMMA_TAU_TOL / panels)?;
        } else if a >= tau {
            if b.is_infinite() {
                // y = a + t/(1-t) maps [0,1) onto [a,∞).
                let g = |t: f64| {
                    let s = 1.0 - t;
                    outer(a + t / s) / (s * s)
                };
                acc -= integrate(&g, 0.0, 1.0, GAMMA_TAU_TOL / panels)?;
            } else {
                acc -= integrate(&outer, a, b, GAMMA_TAU_TOL / panels)?;
            }
        }
    }
    Ok(acc)
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("mu must be positive, got {mu}")));
    }
    Ok(())
}

/// Grid step for the delay-equation solver.
pub const DICKMAN_STEP: f64 = 1e-4;
const DICKMAN_MASS_TOL: f64 = 1e-8;

/// `D_μ` tabulated by stepping its delay equation.
///
/// On `(0,1]` the density is `C x^{μ-1}`, `C = e^{-μγ_E}/Γ(μ)`. Beyond 1 it
/// solves `x F'(x) = μ (F(x) - F(x-1))` in integrating-factor form
/// `(F x^{-μ})' = -μ x^{-μ-1} F(x-1)`.
#[derive(Debug, Clone)]
pub struct DickmanLaw {
    mu: f64,
    c: f64,
    /// `F(1 + i h)`, `i = 0..`.
    cdf: Vec<f64>,
    horizon: f64,
    mass_defect: f64,
}

impl DickmanLaw {
    pub fn new(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let c = (-mu * EULER_GAMMA).exp() / libm::tgamma(mu);
        let horizon = (20.0 * mu).max(40.0);
        let h = DICKMAN_STEP;
        let per_unit = (1.0 / h).round() as usize;
        let steps = ((horizon - 1.0) / h).round() as usize;
        let head = |x: f64| c * x.powf(mu) / mu;

        let mut cdf = Vec::with_capacity(steps + 1);
        cdf.push(head(1.0));
        let mut g = head(1.0);
        for i in 1..=steps {
            let x0 = 1.0 + (i - 1) as f64 * h;
            let x1 = 1.0 + i as f64 * h;
            let incr = if i <= per_unit {
                // F(y-1) is known in closed form on the first block.
                let f = |y: f64| y.powf(-mu - 1.0) * head(y - 1.0);
                integrate(&f, x0, x1, 1e-18)?
            } else {
                let f0 = cdf[i - 1 - per_unit];
                let f1 = cdf[i - per_unit];
                0.5 * h * (x0.powf(-mu - 1.0) * f0 + x1.powf(-mu - 1.0) * f1)
            };
            g -= mu * incr;
            // F is non-decreasing; keep rounding noise near 1 from breaking that.
            let prev = cdf[i - 1];
            cdf.push((g * x1.powf(mu)).max(prev));
        }
        let last = *cdf.last().expect("non-empty");
        let mass_defect = (last - 1.0).abs();
        if mass_defect > DICKMAN_MASS_TOL {
            return Err(Error::Numeric {
                message: format!("D_{mu} total mass at x = {horizon} is off by more than {DICKMAN_MASS_TOL:e}"),
                achieved: mass_defect,
            });
        }
        Ok(Self { mu, c, cdf, horizon, mass_defect })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Density constant on `(0, 1]`.
    pub fn head_constant(&self) -> f64 {
        self.c
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `|F(horizon) - 1|`.
    pub fn mass_defect(&self) -> f64 {
        self.mass_defect
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return 0.0;
        }
        if x <= 1.0 {
            return self.c * x.powf(self.mu) / self.mu;
        }
        if x >= self.horizon {
            return 1.0;
        }
        let t = (x - 1.0) / DICKMAN_STEP;
        let i = (t.floor() as usize).min(self.cdf.len() - 2);
        let frac = t - i as f64;
        let v = self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i]);
        v.min(1.0)
    }

    /// `inf{x : D_μ(x) ≥ p}`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0,1), got {p}")));
        }
        let at_one = self.c / self.mu;
        if p <= at_one {
            return Ok((p * self.mu / self.c).powf(1.0 / self.mu).min(1.0));
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        while self.cdf(hi) < p {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Triplet `(πμ/4, 0, μ ln x · 1(x ∈ (0,1]))`.
    pub fn triplet(&self) -> SelfDecompTriplet {
        SelfDecompTriplet::dickman(self.mu).expect("mu validated")
    }
}

/// Default burn-in of the perpetuity sampler.
pub const DICKMAN_BURN_IN: usize = 1000;

/// Draws from `D_μ` as the fixed point of `W = U^{1/μ}(1 + W)`.
pub fn dickman_sample(mu: f64, n: usize, seed: u64, burn_in: usize) -> Result<Vec<f64>> {
    check_mu(mu)?;
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    const SHARD: usize = 4096;
    let inv = 1.0 / mu;
    let out = (0..n.div_ceil(SHARD))
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let len = SHARD.min(n - s * SHARD);
            (0..len)
                .map(|_| {
                    let mut w = 0.0;
                    for _ in 0..burn_in {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        w = u.powf(inv) * (1.0 + w);
                    }
                    w
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(out)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS critical value at the 1% level, `1.63/√n`.
pub fn ks_threshold_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// The two limit families.
#[derive(Debug, Clone)]
pub enum LimitLaw {
    Normal,
    Dickman(Arc<DickmanLaw>),
}

impl LimitLaw {
    pub fn dickman(mu: f64) -> Result<Self> {
        Ok(LimitLaw::Dickman(Arc::new(DickmanLaw::new(mu)?)))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Normal => normal_cdf(x),
            LimitLaw::Dickman(d) => d.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            LimitLaw::Normal => normal_quantile(p),
            LimitLaw::Dickman(d) => d.quantile(p),
        }
    }

    pub fn triplet(&self) -> SelfDecompTriplet {
        match self {
            LimitLaw::Normal => SelfDecompTriplet::gaussian(),
            LimitLaw::Dickman(d) => d.triplet(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LimitLaw::Normal => "normal".into(),
            LimitLaw::Dickman(d) => format!("dickman(mu={})", d.mu()),
        }
    }

    /// CSV with header `x,F(x)`.
    pub fn cdf_table_csv(&self, xs: &[f64]) -> String {
        let mut out = String::from("x,F(x)\n");
        for &x in xs {
            out.push_str(&format!("{x},{}\n", self.cdf(x)));
        }
        out
    }
}

/// `q(ε) = G⁻¹(1 - ε²)`.
#[derive(Debug, Clone)]
pub struct QuantileFn {
    pub law: LimitLaw,
}

impl QuantileFn {
    pub fn new(law: LimitLaw) -> Self {
        Self { law }
    }

    pub fn q(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0,1), got {epsilon}")));
        }
        self.law.quantile(1.0 - epsilon * epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_integrate_polynomials() {
        let w: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((w - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((g - 2.0).abs() < 1e-15);
        // Degree 22 is exact for the Kronrod rule on one panel.
        let (v, _) = gk15(&|x: f64| x.powi(22), 0.0, 1.0);
        assert!((v - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let v = integrate(&|x: f64| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - PI / 4.0).abs() < 1e-13);
    }

    #[test]
    fn quadrature_reports_failure() {
        let r = integrate(&|x: f64| (1.0 / x).sin() / x, 1e-9, 1.0, 1e-14);
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }

    #[test]
    fn normal_quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.75).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn dickman_head_examples() {
        let d = DickmanLaw::new(1.0).unwrap();
        assert_eq!(d.cdf(0.0), 0.0);
        assert!((d.cdf(1.0) - (-EULER_GAMMA).exp()).abs() < 1e-15);
        assert!((d.quantile((-EULER_GAMMA).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.quantile(0.5).unwrap() - 0.5 * EULER_GAMMA.exp()).abs() < 1e-12);
        assert!(d.quantile(1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn dickman_at_two() {
        // ∫_0^2 ρ = 3 - 2 ln 2 for the Dickman ρ function.
        let d = DickmanLaw::new(1.0).unwrap();
        let expected = (-EULER_GAMMA).exp() * (3.0 - 2.0 * 2f64.ln());
        assert!((d.cdf(2.0) - expected).abs() < 1e-9, "{}", d.cdf(2.0));
    }

    #[test]
    fn dickman_mass_for_several_mu() {
        for mu in [0.25, 0.5, 1.0, 2.0, 3.0] {
            let d = DickmanLaw::new(mu).unwrap();
            assert!(d.mass_defect() <= 1e-8, "mu={mu}: {}", d.mass_defect());
        }
    }

    #[test]
    fn dickman_rejects_bad_mu() {
        assert!(DickmanLaw::new(0.0).is_err());
        assert!(DickmanLaw::new(-1.0).is_err());
        assert!(dickman_sample(0.0, 10, 1, 10).is_err());
    }

    #[test]
    fn gamma_tau_zero_levy() {
        assert_eq!(gamma_tau(&ZeroLevy, 0.3).unwrap(), 0.0);
        assert!(gamma_tau(&ZeroLevy, 0.0).is_err());
    }

    #[test]
    fn gamma_tau_large_tau_limit() {
        let mu = 1.5;
        let g = gamma_tau(&DickmanLevy { mu }, 1e6).unwrap();
        assert!((g - mu * (1.0 - PI / 4.0)).abs() < 1e-10);
    }

    #[test]
    fn perpetuity_samples_positive_and_reproducible() {
        let a = dickman_sample(1.0, 5000, 9, DICKMAN_BURN_IN).unwrap();
        assert!(a.iter().all(|&w| w > 0.0));
        assert_eq!(a, dickman_sample(1.0, 5000, 9, DICKMAN_BURN_IN).unwrap());
    }
}
