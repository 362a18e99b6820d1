//! File formats, configuration and the `wind-esn` command line.
//!
//! Every command takes `--config <file.toml>`; any key can be overridden with
//! `--set section.key=value`, and `--seed` / `--budget` mirror `seed` and
//! `cv.budget`. File paths default to `paths.work_dir` entries. The thread
//! count is read from `WIND_ESN_THREADS`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod demo;
pub mod error;
pub mod format;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{BaselineMethod, BaselinePaths, EvaluateArgs, ForecastPaths, PowerArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "WIND_ESN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "wind-esn", version, about = "Spatio-temporal echo state network forecasting")]
pub struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Persistence,
    Arima,
    Var,
    EofEsn,
}

impl From<BaselineArg> for BaselineMethod {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Persistence => BaselineMethod::Persistence,
            BaselineArg::Arima => BaselineMethod::Arima,
            BaselineArg::Var => BaselineMethod::Var,
            BaselineArg::EofEsn => BaselineMethod::EofEsn,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic demo dataset, a matching config, a power curve and
    /// a site registry into a directory.
    DemoData {
        #[arg(long, default_value = "demo")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        side: usize,
        #[arg(long, default_value_t = 2000)]
        times: usize,
    },
    /// Fit the harmonic mean on the training window and write residuals.
    FitMean {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Select grid and high-wind knots from the training window.
    SelectKnots {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the nonstationary Matérn mixture.
    FitCov {
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search cross-validation of the reservoir hyperparameters.
    Cv {
        /// Cap on evaluated grid points (deterministic subsample).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        knots: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the ensemble on the knot series.
    TrainEsn {
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        knots: Option<PathBuf>,
        /// Cross-validation table whose best spec is used.
        #[arg(long)]
        cv: Option<PathBuf>,
        /// Use the `[esn]` section instead of the cross-validation result.
        #[arg(long, conflicts_with = "cv")]
        no_cv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll the trained ensemble through validation and test windows and
    /// reconstruct the full field.
    Forecast {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        knots: Option<PathBuf>,
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical error quantiles on the validation window.
    Calibrate {
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MSE (and coverage with `--quantiles`) over the test window.
    Evaluate {
        /// Forecast directory or a single space-time file.
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        quantiles: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        /// Horizon assigned to a single forecast file.
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        /// Score target times `[from, to)` instead of the test window.
        #[arg(long, requires = "to")]
        from: Option<usize>,
        #[arg(long, requires = "from")]
        to: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline forecasts in the same directory layout as `forecast`.
    Baseline {
        method: BaselineArg,
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        knots: Option<PathBuf>,
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modified Lorenz 96 method comparison.
    LorenzStudy {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hub-height power and energy-error totals over the test window.
    Power {
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long)]
        mean: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        quantiles: Option<PathBuf>,
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Effective configuration: file (or defaults), then `--set`, then flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?.with_overrides(&cli.set)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Cv { budget: Some(b), .. } = cli.command {
        cfg.cv.budget = Some(b);
    }
    Ok(cfg)
}

/// Size the global thread pool from `WIND_ESN_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV}='{v}' is not a thread count")))?;
    // A second initialisation in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = resolve_config(&cli)?;
    let or = |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| cfg.work(name));
    let data = |p: &Option<PathBuf>| p.clone().unwrap_or_else(|| cfg.paths.data.clone());
    match &cli.command {
        Command::DemoData { out, side, times } => {
            let demo = demo::DemoConfig {
                side: *side,
                n_times: *times,
                ..Default::default()
            };
            commands::demo_data(&cfg, out, demo)
        }
        Command::FitMean { data: d, out, residuals } => {
            commands::fit_mean(&cfg, &data(d), &or(out, "mean.json"), &or(residuals, "residuals.wsf"))
        }
        Command::SelectKnots { data: d, out } => commands::select_knots_cmd(&cfg, &data(d), &or(out, "knots.json")),
        Command::FitCov { residuals, out } => commands::fit_cov(&cfg, &or(residuals, "residuals.wsf"), &or(out, "covariance.toml")),
        Command::Cv { residuals, knots, out, .. } => commands::cv(
            &cfg,
            &or(residuals, "residuals.wsf"),
            &or(knots, "knots.json"),
            &or(out, "cv.json"),
        ),
        Command::TrainEsn { residuals, knots, cv, no_cv, out } => {
            let cv_path = (!no_cv).then(|| or(cv, "cv.json"));
            commands::train_esn(
                &cfg,
                &or(residuals, "residuals.wsf"),
                &or(knots, "knots.json"),
                cv_path.as_deref(),
                &or(out, "model.json"),
            )
        }
        Command::Forecast { model, residuals, knots, covariance, out } => commands::forecast(
            &cfg,
            ForecastPaths {
                model: &or(model, "model.json"),
                residuals: &or(residuals, "residuals.wsf"),
                knots: &or(knots, "knots.json"),
                covariance: &or(covariance, "covariance.toml"),
                out: &or(out, "forecasts"),
            },
        ),
        Command::Calibrate { forecasts, residuals, out } => commands::calibrate_cmd(
            &cfg,
            &or(forecasts, "forecasts"),
            &or(residuals, "residuals.wsf"),
            &or(out, "quantiles.json"),
        ),
        Command::Evaluate { forecasts, truth, quantiles, method, horizon, from, to, out } => {
            let fc = or(forecasts, "forecasts");
            let method = method.clone().unwrap_or_else(|| method_name(&fc));
            let out = or(out, &format!("metrics_{method}.json"));
            commands::evaluate(
                &cfg,
                EvaluateArgs {
                    forecasts: &fc,
                    truth: &or(truth, "residuals.wsf"),
                    quantiles: quantiles.as_deref(),
                    method,
                    horizon: *horizon,
                    window: from.zip(*to),
                    out: &out,
                },
            )
            .map(|_| ())
        }
        Command::Baseline { method, residuals, knots, covariance, out } => {
            let m = BaselineMethod::from(*method);
            commands::baseline(
                &cfg,
                m,
                BaselinePaths {
                    residuals: &or(residuals, "residuals.wsf"),
                    knots: &or(knots, "knots.json"),
                    covariance: &or(covariance, "covariance.toml"),
                    out: &or(out, &format!("baseline_{}", m.name())),
                },
            )
        }
        Command::LorenzStudy { out } => commands::lorenz_study(&cfg, &or(out, "lorenz_study.csv")),
        Command::Power { forecasts, mean, data: d, quantiles, sites, out } => commands::power(
            &cfg,
            PowerArgs {
                forecasts: &or(forecasts, "forecasts"),
                mean: &or(mean, "mean.json"),
                data: &data(d),
                quantiles: quantiles.as_deref(),
                sites: &sites.clone().unwrap_or_else(|| cfg.power.sites.clone()),
                out: &or(out, "power.json"),
            },
        )
        .map(|_| ()),
    }
}

/// `forecasts` → "s-esn", `baseline_arima` → "arima", otherwise the file stem.
fn method_name(p: &Path) -> String {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem == "forecasts" {
        "s-esn".into()
    } else if let Some(m) = stem.strip_prefix("baseline_") {
        m.into()
    } else {
        stem
    }
}
