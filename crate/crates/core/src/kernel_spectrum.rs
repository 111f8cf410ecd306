//! Univariate spectrum of the Gaussian-kernel covariance operator on
//! `L2(R, N(0,1))` and the length-scale sequences that drive the
//! tensor-product field.
//!
//! For length scale `σ` the ranked eigenvalues are geometric,
//! `λ_k = (1 - ω) ω^(k-1)`, with ratio
//! `ω = 2 / (2 + σ² + sqrt(σ⁴ + 4σ²))`. Every quantity downstream is a
//! function of the per-dimension ratios only, so [`OmegaVector`] is the
//! currency of the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator of the length-scale parameters `σ_1, σ_2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SigmaSequence {
    /// `σ_j = sigma` for every `j`.
    Constant { sigma: f64 },
    /// `σ_j² = beta * j^alpha`.
    Power { alpha: f64, beta: f64 },
    /// `σ_j² = beta * j * ln(j + 1)`.
    Jlogj { beta: f64 },
    /// Explicit list of `σ_j`; `limit` optionally declares `lim σ_j`.
    Explicit {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<f64>,
    },
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive finite real, got {v}")))
    }
}

impl SigmaSequence {
    pub fn validate(&self) -> Result<()> {
        match self {
            SigmaSequence::Constant { sigma } => positive_finite("sigma", *sigma),
            SigmaSequence::Power { alpha, beta } => {
                positive_finite("alpha", *alpha)?;
                positive_finite("beta", *beta)
            }
            SigmaSequence::Jlogj { beta } => positive_finite("beta", *beta),
            SigmaSequence::Explicit { values, limit } => {
                if values.is_empty() {
                    return Err(Error::Config("explicit sigma list is empty".into()));
                }
                for (i, v) in values.iter().enumerate() {
                    positive_finite(&format!("values[{i}]"), *v)?;
                }
                if let Some(l) = limit {
                    if !(l.is_finite() && *l >= 0.0) {
                        return Err(Error::Config(format!(
                            "limit must be a non-negative finite real, got {l}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `σ_j²` for `j = 1..=d`, exactly as the kind's formula prescribes.
    pub fn sigma_squares(&self, d: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if d == 0 {
            return Err(Error::Config("dimension d must be at least 1".into()));
        }
        let out = match self {
            SigmaSequence::Constant { sigma } => vec![sigma * sigma; d],
            SigmaSequence::Power { alpha, beta } => {
                (1..=d).map(|j| beta * (j as f64).powf(*alpha)).collect()
            }
            SigmaSequence::Jlogj { beta } => (1..=d)
                .map(|j| {
                    let j = j as f64;
                    beta * j * j.ln_1p()
                })
                .collect(),
            SigmaSequence::Explicit { values, .. } => {
                if values.len() < d {
                    return Err(Error::Config(format!(
                        "explicit sigma list has {} entries but d = {d}",
                        values.len()
                    )));
                }
                values[..d].iter().map(|s| s * s).collect()
            }
        };
        Ok(out)
    }
}

/// The `d` length scales `σ_1..σ_d` of `spec`.
pub fn generate_sigmas(spec: &SigmaSequence, d: usize) -> Result<Vec<f64>> {
    if let SigmaSequence::Explicit { values, .. } = spec {
        spec.sigma_squares(d)?;
        return Ok(values[..d].to_vec());
    }
    Ok(spec.sigma_squares(d)?.into_iter().map(f64::sqrt).collect())
}

/// `ω` and `1 - ω` from `σ²`, both without cancellation.
fn omega_pair_from_sigma_sq(s2: f64) -> (f64, f64) {
    let root = (s2 * s2 + 4.0 * s2).sqrt();
    let denom = 2.0 + s2 + root;
    (2.0 / denom, (s2 + root) / denom)
}

/// Geometric ratio `ω ∈ (0,1)` of the univariate spectrum for length scale `sigma`.
pub fn omega_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(omega_pair_from_sigma_sq(sigma * sigma).0)
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("omega must lie in (0,1), got {omega}")))
    }
}

/// `k`-th largest eigenvalue `(1 - ω) ω^(k-1)`, `k ≥ 1`.
pub fn univariate_eigenvalue(omega: f64, k: u64) -> Result<f64> {
    check_omega(omega)?;
    if k == 0 {
        return Err(Error::domain("eigenvalue index k starts at 1"));
    }
    Ok((1.0 - omega) * omega.powf((k - 1) as f64))
}

/// Mass `Σ_{k>n} λ_k = ω^n` left after the `n` largest eigenvalues.
pub fn univariate_tail(omega: f64, n: u64) -> Result<f64> {
    check_omega(omega)?;
    Ok(omega.powf(n as f64))
}

/// Per-dimension ratios with their log magnitudes cached.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaVector {
    omegas: Vec<f64>,
    log_omegas_abs: Vec<f64>,
    log_one_minus_abs: Vec<f64>,
}

impl OmegaVector {
    /// Builds from explicit ratios; every entry must lie in `(0,1)`.
    pub fn from_omegas(omegas: &[f64]) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::domain("omega vector must have at least one entry"));
        }
        for (j, &w) in omegas.iter().enumerate() {
            check_omega(w).map_err(|_| {
                Error::domain(format!("omega[{j}] = {w} violates 0 < omega < 1"))
            })?;
        }
        Ok(Self {
            omegas: omegas.to_vec(),
            log_omegas_abs: omegas.iter().map(|w| -w.ln()).collect(),
            log_one_minus_abs: omegas.iter().map(|w| -(-w).ln_1p()).collect(),
        })
    }

    /// Builds from length scales `σ_j > 0`.
    pub fn from_sigmas(sigmas: &[f64]) -> Result<Self> {
        for &s in sigmas {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::domain(format!("sigma must be positive and finite, got {s}")));
            }
        }
        Self::from_sigma_squares(&sigmas.iter().map(|s| s * s).collect::<Vec<_>>())
    }

    /// Builds from `σ_j²`; `1 - ω_j` is formed directly so that `σ → 0`
    /// keeps full relative precision in `ln(1 - ω_j)`.
    pub fn from_sigma_squares(sigma_sq: &[f64]) -> Result<Self> {
        if sigma_sq.is_empty() {
            return Err(Error::domain("omega vector must have at least one entry"));
        }
        let mut omegas = Vec::with_capacity(sigma_sq.len());
        let mut log_one_minus_abs = Vec::with_capacity(sigma_sq.len());
        for &s2 in sigma_sq {
            if !(s2.is_finite() && s2 > 0.0) {
                return Err(Error::domain(format!("sigma^2 must be positive and finite, got {s2}")));
            }
            let (w, one_minus) = omega_pair_from_sigma_sq(s2);
            check_omega(w)?;
            omegas.push(w);
            log_one_minus_abs.push(-one_minus.ln());
        }
        Ok(Self {
            log_omegas_abs: omegas.iter().map(|w| -w.ln()).collect(),
            omegas,
            log_one_minus_abs,
        })
    }

    /// Ratios for the first `d` members of `spec`.
    pub fn from_sequence(spec: &SigmaSequence, d: usize) -> Result<Self> {
        Self::from_sigma_squares(&spec.sigma_squares(d)?)
    }

    pub fn dim(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// `|ln ω_j|`.
    pub fn log_omegas_abs(&self) -> &[f64] {
        &self.log_omegas_abs
    }

    /// `|ln(1 - ω_j)|`.
    pub fn log_one_minus_abs(&self) -> &[f64] {
        &self.log_one_minus_abs
    }

    /// First `d` coordinates.
    pub fn truncate(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.dim() {
            return Err(Error::domain(format!("cannot take {d} of {} dimensions", self.dim())));
        }
        Ok(Self {
            omegas: self.omegas[..d].to_vec(),
            log_omegas_abs: self.log_omegas_abs[..d].to_vec(),
            log_one_minus_abs: self.log_one_minus_abs[..d].to_vec(),
        })
    }

    /// Checks every stored invariant, naming the first violation.
    pub fn check_invariants(&self) -> Result<()> {
        for j in 0..self.dim() {
            let w = self.omegas[j];
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::domain(format!("omega[{j}] = {w} outside (0,1)")));
            }
            let l = self.log_omegas_abs[j];
            if (l + w.ln()).abs() > 1e-15 * l.abs().max(1.0) {
                return Err(Error::domain(format!("|ln omega[{j}]| cache is stale")));
            }
            if l <= 1.0 - w {
                return Err(Error::domain(format!("|ln omega[{j}]| <= 1 - omega[{j}]")));
            }
        }
        Ok(())
    }

    /// `Σ_j |ln(1 - ω_j)|`, the `|ln|` of the largest product eigenvalue.
    pub fn top_log_magnitude(&self) -> f64 {
        crate::sum::compensated_sum(self.log_one_minus_abs.iter().copied())
    }
}
