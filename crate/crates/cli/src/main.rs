mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use commands::Outcome;
use config::*;
use output::{fresh_dir, write_outputs, Format, RunRecord, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subcommand {
    Equilibrium,
    Body,
    Asymptotics,
    Constants,
    Gegenbauer,
    Pframe,
    TorusScan,
    Snake,
    Weights,
    Circulant,
    Chromatic,
    Figure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FigureKind {
    Fig1Heatmap,
    Fig2Pointcloud,
    Fig3Transitions,
    Fig4Snakes,
}

/// Numerical experiments on energy minimization and related extremal problems.
#[derive(Debug, Parser)]
#[command(name = "up24", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML config (JSON if the name ends in .json).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; an existing one gets a numeric suffix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Figure data to emit (figure subcommand only).
    #[arg(long, value_enum)]
    kind: Option<FigureKind>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

type Job = Box<dyn FnOnce() -> up24_core::Result<Outcome> + Send>;

fn load_checked<T>(path: &Path, validate: impl Fn(&T) -> Result<()>) -> Result<(T, Value)>
where
    T: DeserializeOwned + Serialize,
{
    let cfg: T = load(path)?;
    validate(&cfg)?;
    let echo = serde_json::to_value(&cfg)?;
    Ok((cfg, echo))
}

/// Parses and validates the config and binds it to the work to run.
fn prepare(cli: &Cli) -> Result<(Value, Job)> {
    let path = cli.config.as_path();
    let seed = cli.seed;
    if cli.kind.is_some() && cli.subcommand != Subcommand::Figure {
        anyhow::bail!("--kind only applies to the figure subcommand");
    }
    Ok(match cli.subcommand {
        Subcommand::Equilibrium => {
            let (c, e) = load_checked(path, EquilibriumConfig::validate)?;
            (e, Box::new(move || commands::equilibrium(&c, seed)))
        }
        Subcommand::Body => {
            let (c, e) = load_checked(path, BodyConfig::validate)?;
            (e, Box::new(move || commands::body(&c, seed)))
        }
        Subcommand::Asymptotics => {
            let (c, e) = load_checked(path, AsymptoticsConfig::validate)?;
            (e, Box::new(move || commands::asymptotics(&c, seed)))
        }
        Subcommand::Constants => {
            let (_, e) = load_checked(path, |_: &ConstantsConfig| Ok(()))?;
            (e, Box::new(commands::constants))
        }
        Subcommand::Gegenbauer => {
            let (c, e) = load_checked(path, GegenbauerConfig::validate)?;
            (e, Box::new(move || commands::gegenbauer(&c)))
        }
        Subcommand::Pframe => {
            let (c, e) = load_checked(path, PframeConfig::validate)?;
            (e, Box::new(move || commands::pframe(&c, seed)))
        }
        Subcommand::TorusScan => {
            let (c, e) = load_checked(path, TorusScanConfig::validate)?;
            (e, Box::new(move || commands::torus_scan(&c, seed)))
        }
        Subcommand::Snake => {
            let (c, e) = load_checked(path, SnakeConfig::validate)?;
            (e, Box::new(move || commands::snake(&c)))
        }
        Subcommand::Weights => {
            let (c, e) = load_checked(path, WeightsConfig::validate)?;
            (e, Box::new(move || commands::weights(&c, seed)))
        }
        Subcommand::Circulant => {
            let (c, e) = load_checked(path, CirculantConfig::validate)?;
            (e, Box::new(move || commands::circulant(&c, seed)))
        }
        Subcommand::Chromatic => {
            let (c, e) = load_checked(path, ChromaticConfig::validate)?;
            (e, Box::new(move || commands::chromatic(&c)))
        }
        Subcommand::Figure => {
            let kind = cli.kind.context("the figure subcommand needs --kind")?;
            match kind {
                FigureKind::Fig1Heatmap => {
                    let (c, e) = load_checked(path, HeatmapConfig::validate)?;
                    (e, Box::new(move || commands::fig1_heatmap(&c)))
                }
                FigureKind::Fig2Pointcloud => {
                    let (c, e) = load_checked(path, EquilibriumConfig::validate)?;
                    (e, Box::new(move || commands::fig2_pointcloud(&c, seed)))
                }
                FigureKind::Fig3Transitions => {
                    let (c, e) = load_checked(path, TransitionsConfig::validate)?;
                    (e, Box::new(move || commands::fig3_transitions(&c)))
                }
                FigureKind::Fig4Snakes => {
                    let (c, e) = load_checked(path, SnakeFigureConfig::validate)?;
                    (e, Box::new(move || commands::fig4_snakes(&c)))
                }
            }
        }
    })
}

fn name_of(cli: &Cli) -> String {
    let sub = cli.subcommand.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    match cli.kind {
        Some(k) => format!("{sub}-{}", k.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()),
        None => sub,
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn run(cli: Cli) -> std::result::Result<(), (u8, anyhow::Error)> {
    let (echo, job) = prepare(&cli).map_err(|e| (EXIT_CONFIG, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err((EXIT_CONFIG, anyhow::anyhow!("--workers must be at least 1")));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| (1, e.into()))?;
    let started = now();
    let outcome = pool.install(job);
    let finished = now();
    let name = name_of(&cli);
    let (results, tables, failure) = match outcome {
        Ok(o) => (o.results, o.tables, None),
        Err(e) => (serde_json::json!({ "error": e.to_string() }), Vec::new(), Some(e)),
    };
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        subcommand: name.clone(),
        config_echo: echo,
        seed: cli.seed,
        started,
        finished,
        results,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let target = cli.out.clone().unwrap_or_else(|| PathBuf::from("up24-runs").join(&name));
    let dir = fresh_dir(&target).map_err(|e| (1, e))?;
    write_outputs(&dir, &record, &tables, cli.format).map_err(|e| (1, e))?;
    eprintln!("wrote {}", dir.display());
    if let Some(e) = failure {
        return Err((EXIT_NUMERICAL, anyhow::Error::new(e).context("numerical failure")));
    }
    println!("{}", serde_json::to_string_pretty(&record.results).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
