//! TOML run configuration and its merge with command-line flags.
//!
//! Precedence, highest first: command-line flag, `QHA_LAB_WORKERS` (worker count only),
//! configuration file, built-in default.

use std::path::{Path, PathBuf};

use qha_lab::concentration::OptimizerBudget;
use qha_lab::experiments::ExperimentConfig;
use qha_lab::io::{RegionSource, SignalSpec, WindowSpec};
use qha_lab::operator_rep::{OperatorBudget, OperatorClass};
use qha_lab::phase_space::{GridMode, GridModel, RegionSpec};
use qha_lab::qha::Exponent;
use serde::Deserialize;

use crate::Failure;

pub const WORKERS_ENV: &str = "QHA_LAB_WORKERS";
pub const DEFAULT_OUT_DIR: &str = "qha-lab-out";
pub const DEFAULT_N: usize = 64;
pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_RADIUS: f64 = 1.0;
pub const DEFAULT_GAP_RADII: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_ORACLE_SIZES: [usize; 2] = [8, 16];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    pub mode: Option<GridMode>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub d: Option<Vec<u32>>,
    pub p: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    /// `Q_S f` for the window and signal.
    Cohen,
    /// `Af` for the signal.
    Ambiguity,
    /// Weyl symbol of the window.
    WeylSymbol,
    /// Fourier–Wigner transform of the window.
    FourierWigner,
}

/// Everything a run can read from the configuration file; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must name the subcommand being run.
    pub command: Option<String>,
    pub p: Option<f64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub transform: Option<TransformKind>,
    pub strict_gap: Option<bool>,
    pub class: Option<OperatorClass>,
    pub grid: Option<GridConfig>,
    pub window: Option<WindowSpec>,
    pub region: Option<RegionSource>,
    pub signal: Option<SignalSpec>,
    pub budget: Option<OptimizerBudget>,
    pub operator_budget: Option<OperatorBudget>,
    pub gap: Option<GapConfig>,
    pub experiment: Option<ExperimentConfig>,
    pub oracle: Option<OracleConfig>,
    pub output: Option<OutputConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::validation(format!("config `{}` is unreadable: {e}", path.display()))
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| {
            Failure::validation(format!(
                "config `{}`: {}",
                path.display(),
                e.to_string().trim_end()
            ))
        })?;
        if let Some(named) = &config.command {
            if named != command {
                return Err(Failure::validation(format!(
                    "config field `command` is `{named}` but the subcommand is `{command}`"
                )));
            }
        }
        Ok(config)
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides QHA_LAB_WORKERS and the config file.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Flags describing a concentration problem.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ProblemArgs {
    /// Signal dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid mode: `exact` or `continuum`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Lebesgue exponent; `inf` is accepted.
    #[arg(long)]
    pub p: Option<f64>,
    /// Ball of this radius about the origin; replaces the configured region.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Window kind (`wigner`, `zero`, …) or an inline JSON window spec.
    #[arg(long)]
    pub window: Option<String>,
    /// Inline JSON region spec.
    #[arg(long)]
    pub region: Option<String>,
    /// Signal kind (`gaussian`, …) or an inline JSON signal spec.
    #[arg(long)]
    pub signal: Option<String>,
}

/// Flags overriding the optimizer budget.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Random starts.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// Parses `kind` shorthand or an inline JSON object for a tagged spec.
pub fn parse_inline<T: for<'de> Deserialize<'de>>(field: &str, text: &str) -> Result<T, Failure> {
    let json = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        format!(r#"{{"kind": {text:?}}}"#)
    };
    serde_json::from_str(&json).map_err(|e| Failure::validation(format!("invalid `{field}`: {e}")))
}

pub fn parse_mode(text: &str) -> Result<GridMode, Failure> {
    match text {
        "exact" | "exact-cyclic" => Ok(GridMode::ExactCyclic),
        "continuum" | "continuum-emulation" => Ok(GridMode::ContinuumEmulation),
        other => Err(Failure::validation(format!(
            "invalid `mode`: `{other}` is not exact or continuum"
        ))),
    }
}

/// A concentration problem after merging file and flags.
pub struct Problem {
    pub grid: GridModel,
    pub p: Exponent,
    pub window: Option<WindowSpec>,
    pub region: RegionSource,
    pub signal: SignalSpec,
}

impl Problem {
    pub fn resolve(config: &RunConfig, flags: &ProblemArgs) -> Result<Self, Failure> {
        let grid_config = config.grid.clone().unwrap_or_default();
        let n = flags.n.or(grid_config.n).unwrap_or(DEFAULT_N);
        let mode = match &flags.mode {
            Some(text) => parse_mode(text)?,
            None => grid_config.mode.unwrap_or(GridMode::ContinuumEmulation),
        };
        let grid = GridModel::new(n, mode)?;
        let p = Exponent::new(flags.p.or(config.p).unwrap_or(DEFAULT_P))?;
        let window = match &flags.window {
            Some(text) => Some(parse_inline("window", text)?),
            None => config.window.clone(),
        };
        let region = match (&flags.region, flags.radius) {
            (Some(text), _) => parse_inline("region", text)?,
            (None, Some(radius)) => RegionSource::Spec(RegionSpec::Ball {
                center: [0.0, 0.0],
                radius,
            }),
            (None, None) => config
                .region
                .clone()
                .unwrap_or(RegionSource::Spec(RegionSpec::Ball {
                    center: [0.0, 0.0],
                    radius: DEFAULT_RADIUS,
                })),
        };
        let signal = match &flags.signal {
            Some(text) => parse_inline("signal", text)?,
            None => config.signal.clone().unwrap_or(SignalSpec::Gaussian {
                lambda: 1.0,
                x: 0.0,
                xi: 0.0,
            }),
        };
        Ok(Problem {
            grid,
            p,
            window,
            region,
            signal,
        })
    }

    pub fn window_or_default(&self) -> WindowSpec {
        self.window.clone().unwrap_or(WindowSpec::Wigner {})
    }
}

pub fn optimizer_budget(
    config: &RunConfig,
    common: &CommonArgs,
    flags: &BudgetArgs,
) -> OptimizerBudget {
    let mut budget = config.budget.clone().unwrap_or_default();
    if let Some(seed) = common.seed.or(config.seed) {
        budget.seed = seed;
    }
    if let Some(v) = flags.max_iterations {
        budget.max_iterations = v;
    }
    if let Some(v) = flags.restarts {
        budget.random_starts = v;
    }
    if let Some(v) = flags.tolerance {
        budget.tolerance = v;
    }
    budget
}

pub fn operator_budget(
    config: &RunConfig,
    common: &CommonArgs,
    flags: &BudgetArgs,
) -> OperatorBudget {
    let mut budget = config.operator_budget.clone().unwrap_or_default();
    if let Some(seed) = common.seed.or(config.seed) {
        budget.seed = seed;
    }
    if let Some(v) = flags.max_iterations {
        budget.max_iterations = v;
    }
    if let Some(v) = flags.restarts {
        budget.random_starts = v;
    }
    if let Some(v) = flags.tolerance {
        budget.tolerance = v;
    }
    budget
}

pub fn out_dir(config: &RunConfig, common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Flag, then environment, then file, then the number of available cores.
pub fn worker_count(config: &RunConfig, common: &CommonArgs) -> Result<usize, Failure> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(text) => Some(text.trim().parse::<usize>().map_err(|_| {
            Failure::validation(format!("invalid `{WORKERS_ENV}`: `{text}` is not a count"))
        })?),
        Err(_) => None,
    };
    let count = common
        .workers
        .or(from_env)
        .or(config.workers)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    if count == 0 {
        return Err(Failure::validation(
            "invalid `workers`: need at least one worker",
        ));
    }
    Ok(count)
}
