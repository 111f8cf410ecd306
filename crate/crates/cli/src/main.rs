//! `gklab`: batch tables for the average-case complexity of Gaussian-kernel
//! tensor-product fields.
//!
//! Exit status: 0 success, 2 configuration error, 3 capacity exceeded in
//! exact mode, 4 verification failure, 1 anything else.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gklab_core::{normalization_plan, LimitLaw};

use config::{check_bin_width, check_tau_grid, Format, Mode, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Capacity(String),
    Io(String),
    Compute(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Capacity(m) => write!(f, "capacity error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Compute(m) => write!(f, "{m}"),
        }
    }
}

impl From<gklab_core::Error> for CliError {
    fn from(e: gklab_core::Error) -> Self {
        use gklab_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) | E::NotApplicable(_) => CliError::Config(e.to_string()),
            E::Capacity { .. } => CliError::Capacity(e.to_string()),
            E::Range(_) | E::Numeric { .. } => CliError::Compute(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Io(_) | CliError::Compute(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "gklab", version, about = "Average-case approximation complexity of Gaussian-kernel random fields")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Bin width on the |ln λ| axis for convolution.
    #[arg(long, global = true)]
    bin_width: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated τ values for condition reports.
    #[arg(long, global = true, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// n(ε) per (d, ε): exact count or a bracket on ln n.
    Complexity {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Measured vs predicted ln n, normalized, plus the condition report.
    Asymptotics {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Write the condition table here instead of after the main table.
        #[arg(long)]
        conditions_out: Option<PathBuf>,
    },
    /// G_d on the |ln λ| axis by convolution and Monte Carlo.
    Gd,
    /// CDF and quantiles of a limit law.
    Limit {
        /// Law to tabulate; defaults to the config's normalization plan.
        #[arg(long, value_enum)]
        law: Option<LawKind>,
        /// μ of the Dickman convolution power.
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
    },
    /// Runs the invariant suites; exit 4 if any fails.
    Verify {
        /// Random cases per suite.
        #[arg(long, default_value_t = 50)]
        cases: usize,
        /// Also check these ratios as an OmegaVector fixture.
        #[arg(long, value_delimiter = ',')]
        inject_omega: Option<Vec<f64>>,
    },
    /// Both sides of the Lemma 1 identities per (d, x).
    Lemma1,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LawKind {
    Normal,
    Dickman,
}

fn load_config(global: &Global, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config PATH".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(w) = global.bin_width {
        check_bin_width(w)?;
        cfg.bin_width = w;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = &global.tau_grid {
        check_tau_grid(t)?;
        cfg.tau_grid = Some(t.clone());
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn output_of(global: &Global, cfg: Option<&RunConfig>) -> (Format, Option<PathBuf>) {
    let format = global.format.or(cfg.and_then(|c| c.format)).unwrap_or(Format::Csv);
    let out = global.out.clone().or_else(|| cfg.and_then(|c| c.out.as_ref().map(PathBuf::from)));
    (format, out)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GKLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("GKLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Compute(e.to_string()))
}

/// `Ok(false)` means verification ran and failed.
fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let g = &cli.global;
    match &cli.command {
        Command::Complexity { mode } => {
            let cfg = load_config(g, *mode)?;
            let (format, out) = output_of(g, Some(&cfg));
            commands::complexity(&cfg, format, out.as_deref())?;
        }
        Command::Asymptotics { mode, conditions_out } => {
            let cfg = load_config(g, *mode)?;
            let (format, out) = output_of(g, Some(&cfg));
            commands::asymptotics(&cfg, format, out.as_deref(), conditions_out.as_deref())?;
        }
        Command::Gd => {
            let cfg = load_config(g, None)?;
            let (format, out) = output_of(g, Some(&cfg));
            commands::gd(&cfg, format, out.as_deref())?;
        }
        Command::Lemma1 => {
            let cfg = load_config(g, None)?;
            let (format, out) = output_of(g, Some(&cfg));
            commands::lemma1(&cfg, format, out.as_deref())?;
        }
        Command::Limit { law, mu, x, epsilon } => {
            let cfg = match &g.config {
                Some(_) => Some(load_config(g, None)?),
                None => None,
            };
            let law = match (law, &cfg) {
                (Some(LawKind::Normal), _) => LimitLaw::Normal,
                (Some(LawKind::Dickman), _) => LimitLaw::dickman(*mu)?,
                (None, Some(c)) => normalization_plan(&c.sigma)?.law,
                (None, None) => return Err(CliError::Config("limit needs --law or --config".into())),
            };
            let epsilon = epsilon.clone().or_else(|| cfg.as_ref().map(|c| c.epsilon.clone())).unwrap_or_default();
            if let Some(e) = epsilon.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                return Err(CliError::Config(format!("field `epsilon`: {e} is not strictly inside (0,1)")));
            }
            let x = x.clone().or_else(|| cfg.as_ref().and_then(|c| c.x.clone()));
            let (format, out) = output_of(g, cfg.as_ref());
            commands::limit(&commands::LimitArgs { law, xs: x, epsilon }, format, out.as_deref())?;
        }
        Command::Verify { cases, inject_omega } => {
            if *cases == 0 {
                return Err(CliError::Config("--cases must be positive".into()));
            }
            let args = verify::VerifyArgs {
                seed: g.seed.unwrap_or(0),
                cases: *cases,
                inject_omega: inject_omega.clone().unwrap_or_default(),
            };
            let (format, out) = output_of(g, None);
            return verify::run(&args, format, out.as_deref());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("gklab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
