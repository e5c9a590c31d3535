//! Command-line pipelines around the `skewmsv` library: simulation study,
//! series ordering, posterior fits with an on-disk draw store, predictive
//! forecasts, recursive forecast archives, VaR backtests and the Geweke
//! sampler check.
//!
//! Every command writes into `--out`. On failure a JSON record
//! `{kind, command, message, path, line}` goes to stderr and to
//! `<out>/error.json`, and the process exits nonzero.

pub mod archive;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult, ErrorRecord};

#[derive(Debug, Parser)]
#[command(name = "skewmsv", version, about = "Multivariate stochastic volatility with skew-t errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `data` from the config.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Replicated skewness study and an optional simulated price panel.
    Simulate,
    /// Rank series by the posterior mean of their univariate skewness.
    Order,
    /// Fit one model and store its draws.
    Fit,
    /// Predict from the stored fit, or run the recursive refit schedule.
    Forecast,
    /// VaR backtest of the recursive forecast archive.
    Backtest,
    /// Joint-distribution test of the sampler.
    GewekeTest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Order => "order",
            Command::Fit => "fit",
            Command::Forecast => "forecast",
            Command::Backtest => "backtest",
            Command::GewekeTest => "geweke-test",
        }
    }
}

/// Resolves the run configuration from the config file and flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.data {
        cfg.data = Some(d.clone());
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Order => commands::order(&cfg, &cli.out),
        Command::Fit => commands::fit(&cfg, &cli.out),
        Command::Forecast => commands::forecast(&cfg, &cli.out),
        Command::Backtest => commands::run_backtest(&cli.out),
        Command::GewekeTest => commands::geweke(&cfg, &cli.out),
    }
}

/// Parses `args` and runs the command. Help and version requests print to
/// stdout and return 0; every failure is reported as an [`ErrorRecord`].
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: "));
            report(&err, None, None);
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            report(&err, Some(cli.command.name()), Some(&cli.out));
            err.exit_code()
        }
    }
}

fn report(err: &CliError, command: Option<&str>, out: Option<&std::path::Path>) {
    let json = serde_json::to_string(&err.record(command)).expect("error record serializes");
    eprintln!("{json}");
    if let Some(dir) = out {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), json + "\n");
        }
    }
}
