//! Run configuration: a single JSON document, validated field by field.

use std::path::Path;

use gklab_core::{SigmaSequence, DEFAULT_BIN_WIDTH, DEFAULT_CAPACITY};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Convolution,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_mode() -> Mode {
    Mode::Auto
}

fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: SigmaSequence,
    pub d: Vec<usize>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    /// Evaluation points for `gd` and `lemma1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Vec<f64>>,
    /// Monte Carlo sample size for `gd`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing)]
    pub out: Option<String>,
    #[serde(default, skip_serializing)]
    pub format: Option<Format>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            config_error(format!(
                "field `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => config_error(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sigma.validate().map_err(|e| config_error(format!("field `sigma`: {e}")))?;
        if self.d.is_empty() {
            return Err(config_error("field `d`: list of dimensions is empty"));
        }
        if let Some(i) = self.d.iter().position(|&d| d == 0) {
            return Err(config_error(format!("field `d[{i}]`: dimensions must be positive")));
        }
        if let SigmaSequence::Explicit { values, .. } = &self.sigma {
            if let Some(&d) = self.d.iter().find(|&&d| d > values.len()) {
                return Err(config_error(format!(
                    "field `d`: d = {d} exceeds the {} explicit sigma values",
                    values.len()
                )));
            }
        }
        for (i, &e) in self.epsilon.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(config_error(format!("field `epsilon[{i}]`: {e} is not strictly inside (0,1)")));
            }
        }
        check_bin_width(self.bin_width)?;
        if self.capacity == 0 {
            return Err(config_error("field `capacity`: must be positive"));
        }
        if self.samples == 0 {
            return Err(config_error("field `samples`: must be positive"));
        }
        if let Some(xs) = &self.x {
            if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
                return Err(config_error(format!("field `x[{i}]`: not a finite real")));
            }
        }
        if let Some(t) = &self.tau_grid {
            check_tau_grid(t)?;
        }
        Ok(())
    }

    pub fn require_epsilon(&self) -> Result<(), CliError> {
        if self.epsilon.is_empty() {
            Err(config_error("field `epsilon`: this command needs at least one value"))
        } else {
            Ok(())
        }
    }

    /// First 16 hex digits of SHA-256 over the command name and the
    /// canonical JSON of the effective configuration.
    pub fn hash(&self, command: &str) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        config_hash(command, &body)
    }
}

pub fn config_hash(command: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(body.as_bytes());
    format!("{:x}", h.finalize())[..16].to_string()
}

pub fn check_bin_width(w: f64) -> Result<(), CliError> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(config_error(format!("field `bin_width`: {w} is not a positive real")))
    }
}

pub fn check_tau_grid(t: &[f64]) -> Result<(), CliError> {
    if t.is_empty() {
        return Err(config_error("field `tau_grid`: empty"));
    }
    if let Some(i) = t.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(config_error(format!("field `tau_grid[{i}]`: {} is not a positive real", t[i])));
    }
    Ok(())
}
