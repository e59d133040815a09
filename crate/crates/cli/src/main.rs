//! `fastthresh`: threshold tests for discrimination from the command line.
//!
//! Exit status is 0 on success, 1 for configuration or data errors and 2
//! when `--strict` is set and a fit fails its convergence checks.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use fastthresh::robustness::{with_worker_budget, ModelKind};

use commands::{Context, Manifest};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "fastthresh", version, about = "Bayesian threshold tests for discrimination in stop data")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set sampler.chains=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Exit with status 2 if any R-hat exceeds 1.1 or diagnostics are missing.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args, Debug, Default)]
struct DataArgs {
    /// Stop records, or aggregated counts with `--aggregated`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Census fractions by precinct and race.
    #[arg(long)]
    census: Option<PathBuf>,
    /// The input holds `race, precinct, stops, hits` rows.
    #[arg(long)]
    aggregated: bool,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "frisk" => Ok(ModelKind::Frisk),
        "stop" => Ok(ModelKind::Stop),
        _ => Err(format!("unknown model '{s}' (expected frisk or stop)")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the frisk model to stop records.
    FitFrisk {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit the stop model to stop counts and census shares.
    FitStop {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit discriminant distributions to a grid of beta and logit-normal targets.
    ApproxSweep {
        /// Grid file; the bundled grid by default.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Generate synthetic data from the configured design.
    Synth {
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
    },
    /// Posterior predictive check from saved draws.
    Ppc {
        #[command(flatten)]
        data: DataArgs,
        /// Draws written by a fit with `write_draws = true`.
        #[arg(long)]
        draws: Option<PathBuf>,
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
    },
    /// Refit synthetic data at increasing threshold noise.
    Heterogeneity,
    /// Fit with a non-race column in place of race.
    Placebo {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        column: Option<String>,
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
    },
    /// Fit each level of a column separately.
    Disaggregate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        column: Option<String>,
        /// Levels to fit; all observed levels by default. Repeatable.
        #[arg(long = "level")]
        levels: Vec<String>,
    },
    /// Refit the stop model with one race's census share rescaled.
    CensusSweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        race: Option<String>,
    },
    /// Tabulate a discriminant distribution.
    DistTable {
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FitFrisk { .. } => "fit-frisk",
            Command::FitStop { .. } => "fit-stop",
            Command::ApproxSweep { .. } => "approx-sweep",
            Command::Synth { .. } => "synth",
            Command::Ppc { .. } => "ppc",
            Command::Heterogeneity => "heterogeneity",
            Command::Placebo { .. } => "placebo",
            Command::Disaggregate { .. } => "disaggregate",
            Command::CensusSweep { .. } => "census-sweep",
            Command::DistTable { .. } => "dist-table",
        }
    }
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if d.input.is_some() {
        cfg.input.stops = d.input.clone();
    }
    if d.census.is_some() {
        cfg.input.census = d.census.clone();
    }
    if d.aggregated {
        cfg.input.aggregated = true;
    }
}

/// Folds command-line flags into the configuration. Flags win over `--set`,
/// which wins over the file.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    cfg.strict |= cli.strict;
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.sampler.seed = s;
    }
    match &cli.command {
        Some(Command::FitFrisk { data }) => {
            apply_data(&mut cfg, data);
            cfg.model = ModelKind::Frisk;
        }
        Some(Command::FitStop { data }) => {
            apply_data(&mut cfg, data);
            cfg.model = ModelKind::Stop;
        }
        Some(Command::ApproxSweep { grid }) => {
            if grid.is_some() {
                cfg.approx.grid = grid.clone();
            }
        }
        Some(Command::Synth { model }) => cfg.model = model.unwrap_or(cfg.model),
        Some(Command::Ppc { data, draws, model }) => {
            apply_data(&mut cfg, data);
            if draws.is_some() {
                cfg.input.draws = draws.clone();
            }
            cfg.model = model.unwrap_or(cfg.model);
        }
        Some(Command::Placebo { data, column, model }) => {
            apply_data(&mut cfg, data);
            if let Some(c) = column {
                cfg.robustness.column = c.clone();
            }
            cfg.model = model.unwrap_or(cfg.model);
        }
        Some(Command::Disaggregate { data, column, levels }) => {
            apply_data(&mut cfg, data);
            if let Some(c) = column {
                cfg.robustness.column = c.clone();
            }
            if !levels.is_empty() {
                cfg.robustness.levels = Some(levels.clone());
            }
        }
        Some(Command::CensusSweep { data, race }) => {
            apply_data(&mut cfg, data);
            cfg.model = ModelKind::Stop;
            if let Some(r) = race {
                cfg.robustness.census_race = r.clone();
            }
        }
        Some(Command::DistTable { phi, delta, points }) => {
            cfg.dist.phi = phi.unwrap_or(cfg.dist.phi);
            cfg.dist.delta = delta.unwrap_or(cfg.dist.delta);
            cfg.dist.points = points.unwrap_or(cfg.dist.points);
        }
        Some(Command::Heterogeneity) | None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: &Command, ctx: &mut Context) -> Result<()> {
    match command {
        Command::FitFrisk { .. } => commands::fit_frisk_cmd(ctx),
        Command::FitStop { .. } => commands::fit_stop_cmd(ctx),
        Command::ApproxSweep { .. } => commands::approx_sweep_cmd(ctx),
        Command::Synth { .. } => commands::synth_cmd(ctx),
        Command::Ppc { .. } => commands::ppc_cmd(ctx),
        Command::Heterogeneity => commands::heterogeneity_cmd(ctx),
        Command::Placebo { .. } => commands::placebo_cmd(ctx),
        Command::Disaggregate { .. } => commands::disaggregate_cmd(ctx),
        Command::CensusSweep { .. } => commands::census_sweep_cmd(ctx),
        Command::DistTable { .. } => commands::dist_table_cmd(ctx),
    }
}

fn worker_threads(requested: usize) -> usize {
    match requested {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
}

enum Outcome {
    Done,
    QualityFailure,
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(Outcome::Done);
    }
    let Some(command) = &cli.command else {
        bail!("no command given; see --help");
    };
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let threads = worker_threads(cfg.threads);
    let mut ctx = Context::new(cfg)?;
    let result = with_worker_budget(threads, || dispatch(command, &mut ctx))?;

    let config_toml = ctx.cfg.to_toml();
    let divergence_flag = ctx.fits.iter().any(|f| f.divergence_flag);
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: ctx.cfg.sampler.seed,
        config_hash: ctx.cfg.hash(),
        config: config_toml,
        inputs: &ctx.inputs,
        started_unix,
        wall_seconds: started.elapsed().as_secs_f64(),
        outputs: &ctx.out.written,
        fits: &ctx.fits,
        divergence_flag,
        error: result.as_ref().err().map(|e| format!("{e:#}")),
    };
    commands::write_manifest(&ctx.out.dir, &manifest)?;
    result?;

    if ctx.cfg.strict {
        let failing: Vec<&str> = ctx.fits.iter().filter(|f| f.fails_strict()).map(|f| f.label.as_str()).collect();
        if !failing.is_empty() {
            log::error!(
                "convergence check failed (R-hat above {} or no diagnostics) for: {}",
                commands::STRICT_RHAT,
                failing.join(", ")
            );
            return Ok(Outcome::QualityFailure);
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::QualityFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
