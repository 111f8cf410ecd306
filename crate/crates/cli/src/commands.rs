//! The table-producing subcommands.

use std::path::Path;

use gklab_core::asymptotics::{default_tau_grid, ConditionRow};
use gklab_core::{
    auto_complexity, build_measure, condition_report, convolution_complexity, exact_complexity, gd_value,
    lemma1_verify, normalization_plan, sample_gd, suggested_x_max, ComplexityMode, ComplexityResult, LimitLaw,
    OmegaVector, QuantileFn,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_hash, Format, Mode, RunConfig};
use crate::output::{csv_table, json_table, render, write_out};
use crate::CliError;

fn omegas(cfg: &RunConfig) -> Result<Vec<OmegaVector>, CliError> {
    cfg.d.par_iter().map(|&d| Ok(OmegaVector::from_sequence(&cfg.sigma, d)?)).collect()
}

/// `(d index, ε index)` cells in config order.
fn cells(cfg: &RunConfig) -> Vec<(usize, usize)> {
    (0..cfg.d.len()).flat_map(|i| (0..cfg.epsilon.len()).map(move |k| (i, k))).collect()
}

struct Measured {
    result: ComplexityResult,
    note: String,
}

fn measure(omega: &OmegaVector, eps: f64, cfg: &RunConfig) -> Result<Measured, CliError> {
    let result = match cfg.mode {
        Mode::Exact => exact_complexity(omega, eps, cfg.capacity).map_err(|e| match e {
            gklab_core::Error::Capacity { .. } => CliError::Capacity(format!("d = {}, epsilon = {eps}: {e}", omega.dim())),
            other => other.into(),
        })?,
        Mode::Convolution => convolution_complexity(omega, eps, cfg.bin_width)?,
        Mode::Auto => auto_complexity(omega, eps, cfg.bin_width, cfg.capacity)?,
    };
    let note = if cfg.mode == Mode::Auto && result.mode == ComplexityMode::Convolution {
        format!("exact enumeration exceeded capacity {}; convolution bracket", cfg.capacity)
    } else {
        String::new()
    };
    Ok(Measured { result, note })
}

fn mode_name(m: ComplexityMode) -> &'static str {
    match m {
        ComplexityMode::Exact => "exact",
        ComplexityMode::Convolution => "convolution",
    }
}

#[derive(Serialize)]
struct ComplexityRow {
    config_hash: String,
    d: usize,
    epsilon: f64,
    mode: &'static str,
    n: Option<u64>,
    ln_n_lo: f64,
    ln_n_hi: f64,
    e_n: f64,
    note: String,
}

const COMPLEXITY_HEADER: &[&str] =
    &["config_hash", "d", "epsilon", "mode", "n", "ln_n_lo", "ln_n_hi", "e_n", "note"];

pub fn complexity(cfg: &RunConfig, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    cfg.require_epsilon()?;
    let hash = cfg.hash("complexity");
    let omegas = omegas(cfg)?;
    let rows = cells(cfg)
        .par_iter()
        .map(|&(i, k)| {
            let eps = cfg.epsilon[k];
            let m = measure(&omegas[i], eps, cfg)?;
            let (lo, hi) = m.result.log_bracket();
            Ok(ComplexityRow {
                config_hash: hash.clone(),
                d: cfg.d[i],
                epsilon: eps,
                mode: mode_name(m.result.mode),
                n: m.result.exact_n(),
                ln_n_lo: lo,
                ln_n_hi: hi,
                e_n: (1.0 - m.result.achieved_cumulative_mass).max(0.0).sqrt(),
                note: m.note,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_out(&render(&rows, COMPLEXITY_HEADER, format)?, out)
}

#[derive(Serialize)]
struct AsymptoticsRow {
    config_hash: String,
    d: usize,
    epsilon: f64,
    mode: &'static str,
    ln_n_lo: f64,
    ln_n_hi: f64,
    ln_n_measured: f64,
    a_d: f64,
    b_d: f64,
    normalized: f64,
    q: f64,
    predicted_ln_n: f64,
}

const ASYMPTOTICS_HEADER: &[&str] = &[
    "config_hash",
    "d",
    "epsilon",
    "mode",
    "ln_n_lo",
    "ln_n_hi",
    "ln_n_measured",
    "a_d",
    "b_d",
    "normalized",
    "q",
    "predicted_ln_n",
];

#[derive(Serialize)]
struct ConditionCsvRow {
    config_hash: String,
    d: usize,
    tau: f64,
    #[serde(rename = "sumA")]
    sum_a: f64,
    #[serde(rename = "targetA")]
    target_a: f64,
    #[serde(rename = "sumB")]
    sum_b: f64,
    #[serde(rename = "targetB")]
    target_b: f64,
    #[serde(rename = "sumC")]
    sum_c: f64,
    #[serde(rename = "targetC")]
    target_c: f64,
}

const CONDITIONS_HEADER: &[&str] =
    &["config_hash", "d", "tau", "sumA", "targetA", "sumB", "targetB", "sumC", "targetC"];

impl ConditionCsvRow {
    fn new(hash: &str, r: &ConditionRow) -> Self {
        ConditionCsvRow {
            config_hash: hash.to_string(),
            d: r.d,
            tau: r.tau,
            sum_a: r.sum_a,
            target_a: r.target_a,
            sum_b: r.sum_b,
            target_b: r.target_b,
            sum_c: r.sum_c,
            target_c: r.target_c,
        }
    }
}

/// Normalized complexity table plus the condition report.
///
/// CSV: the condition table goes to `conditions_out` when given, otherwise
/// it follows the main table after one blank line. JSON: one object with
/// `complexity` and `conditions` arrays.
pub fn asymptotics(
    cfg: &RunConfig,
    format: Format,
    out: Option<&Path>,
    conditions_out: Option<&Path>,
) -> Result<(), CliError> {
    cfg.require_epsilon()?;
    let plan = normalization_plan(&cfg.sigma)?;
    plan.check_b_grid(&cfg.d)?;
    let hash = cfg.hash("asymptotics");
    let omegas = omegas(cfg)?;
    let qf = plan.quantile_fn();
    let rows = cells(cfg)
        .par_iter()
        .map(|&(i, k)| {
            let (d, eps) = (cfg.d[i], cfg.epsilon[k]);
            let omega = &omegas[i];
            let m = measure(omega, eps, cfg)?;
            let (lo, hi) = m.result.log_bracket();
            let a = plan.a_d(omega);
            let b = plan.b_d(d)?;
            let q = qf.q(eps)?;
            let ln_n = m.result.log_n();
            Ok(AsymptoticsRow {
                config_hash: hash.clone(),
                d,
                epsilon: eps,
                mode: mode_name(m.result.mode),
                ln_n_lo: lo,
                ln_n_hi: hi,
                ln_n_measured: ln_n,
                a_d: a,
                b_d: b,
                normalized: (ln_n - a) / b,
                q,
                predicted_ln_n: a + q * b,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let tau = cfg.tau_grid.clone().unwrap_or_else(default_tau_grid);
    let report = condition_report(&plan, &cfg.d, &tau, 0.05)?;
    let cond: Vec<ConditionCsvRow> = report.rows.iter().map(|r| ConditionCsvRow::new(&hash, r)).collect();

    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Both<'a> {
                complexity: &'a [AsymptoticsRow],
                conditions: &'a [ConditionCsvRow],
            }
            write_out(&json_table(&Both { complexity: &rows, conditions: &cond })?, out)
        }
        Format::Csv => {
            let main = csv_table(&rows, ASYMPTOTICS_HEADER)?;
            let conditions = csv_table(&cond, CONDITIONS_HEADER)?;
            match conditions_out {
                Some(p) => {
                    write_out(&conditions, Some(p))?;
                    write_out(&main, out)
                }
                None => write_out(&format!("{main}\n{conditions}"), out),
            }
        }
    }
}

#[derive(Serialize)]
struct GdRow {
    config_hash: String,
    d: usize,
    x: f64,
    z: Option<f64>,
    gd_convolution: f64,
    gd_monte_carlo: f64,
}

const GD_HEADER: &[&str] = &["config_hash", "d", "x", "z", "gd_convolution", "gd_monte_carlo"];

/// Eigenvalue mass with `|ln λ| ≤ x`, by convolution and by seeded Monte
/// Carlo. `z = (x - a_d)/b_d` is filled in when the sequence has a
/// normalization, so the columns read as `G_d(z)`.
pub fn gd(cfg: &RunConfig, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let hash = cfg.hash("gd");
    let omegas = omegas(cfg)?;
    let plan = normalization_plan(&cfg.sigma).ok();
    let mut rows = Vec::new();
    for (i, omega) in omegas.iter().enumerate() {
        let norm = match &plan {
            Some(p) => Some((p.a_d(omega), p.b_d(cfg.d[i])?)),
            None => None,
        };
        let x_max = suggested_x_max(omega, 0.05, cfg.bin_width);
        let xs = match &cfg.x {
            Some(xs) => xs.clone(),
            None => {
                let x0 = omega.top_log_magnitude();
                (0..=100).map(|k| x0 + (x_max - x0) * k as f64 / 100.0).collect()
            }
        };
        let hi = xs.iter().copied().fold(x_max, f64::max) + cfg.bin_width;
        let measure = build_measure(omega, cfg.bin_width, hi)?;
        // Samples exclude the offset Σ_j |ln(1-ω_j)| of the largest eigenvalue.
        let emp = sample_gd(omega, cfg.samples, cfg.seed)?;
        let origin = omega.top_log_magnitude();
        for &x in &xs {
            rows.push(GdRow {
                config_hash: hash.clone(),
                d: cfg.d[i],
                x,
                z: norm.map(|(a, b)| (x - a) / b),
                gd_convolution: gd_value(&measure, 0.0, 1.0, x)?,
                gd_monte_carlo: emp.cdf(x - origin),
            });
        }
    }
    write_out(&render(&rows, GD_HEADER, format)?, out)
}

#[derive(Serialize)]
struct Lemma1Row {
    config_hash: String,
    d: usize,
    x: f64,
    lhs_tail: f64,
    rhs_tail: f64,
    residual_tail: f64,
    lhs_mean: f64,
    rhs_mean: f64,
    residual_mean: f64,
    lhs_var: f64,
    rhs_var: f64,
    residual_var: f64,
}

const LEMMA1_HEADER: &[&str] = &[
    "config_hash",
    "d",
    "x",
    "lhs_tail",
    "rhs_tail",
    "residual_tail",
    "lhs_mean",
    "rhs_mean",
    "residual_mean",
    "lhs_var",
    "rhs_var",
    "residual_var",
];

pub fn lemma1(cfg: &RunConfig, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let hash = cfg.hash("lemma1");
    let xs = cfg.x.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0]);
    if let Some(i) = xs.iter().position(|&x| x <= 0.0) {
        return Err(CliError::Config(format!("field `x[{i}]`: lemma1 needs x > 0")));
    }
    let omegas = omegas(cfg)?;
    let mut rows = Vec::new();
    for (i, omega) in omegas.iter().enumerate() {
        for &x in &xs {
            let c = lemma1_verify(omega, x)?;
            let r = c.residuals();
            rows.push(Lemma1Row {
                config_hash: hash.clone(),
                d: cfg.d[i],
                x,
                lhs_tail: c.lhs[0],
                rhs_tail: c.rhs[0],
                residual_tail: r[0],
                lhs_mean: c.lhs[1],
                rhs_mean: c.rhs[1],
                residual_mean: r[1],
                lhs_var: c.lhs[2],
                rhs_var: c.rhs[2],
                residual_var: r[2],
            });
        }
    }
    write_out(&render(&rows, LEMMA1_HEADER, format)?, out)
}

#[derive(Serialize)]
struct LimitRow {
    config_hash: String,
    law: String,
    quantity: &'static str,
    argument: f64,
    value: f64,
}

const LIMIT_HEADER: &[&str] = &["config_hash", "law", "quantity", "argument", "value"];

pub struct LimitArgs {
    pub law: LimitLaw,
    pub xs: Option<Vec<f64>>,
    pub epsilon: Vec<f64>,
}

/// CDF table and `q(ε) = F⁻¹(1 - ε²)` of a limit law.
pub fn limit(args: &LimitArgs, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let law = &args.law;
    let xs = args.xs.clone().unwrap_or_else(|| match law {
        LimitLaw::Normal => (0..=80).map(|k| -4.0 + 0.1 * k as f64).collect(),
        LimitLaw::Dickman(dl) => {
            let top = (5.0 * dl.mu() + 5.0).ceil() as usize * 10;
            (0..=top).map(|k| 0.1 * k as f64).collect()
        }
    });
    let body = serde_json::json!({ "law": law.name(), "x": xs, "epsilon": args.epsilon }).to_string();
    let hash = config_hash("limit", &body);
    let mut rows: Vec<LimitRow> = xs
        .iter()
        .map(|&x| LimitRow {
            config_hash: hash.clone(),
            law: law.name(),
            quantity: "cdf",
            argument: x,
            value: law.cdf(x),
        })
        .collect();
    let qf = QuantileFn::new(law.clone());
    for &eps in &args.epsilon {
        rows.push(LimitRow {
            config_hash: hash.clone(),
            law: law.name(),
            quantity: "q",
            argument: eps,
            value: qf.q(eps)?,
        });
    }
    write_out(&render(&rows, LIMIT_HEADER, format)?, out)
}
