//! Command line entry points and the HTTP service.

pub mod service;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use hedgecast_core::telemetry::{read_log, summarize_telemetry};
use hedgecast_core::trial_store::{
    self, generate_trials, parse_csv, select_trial, write_csv, Range, Selector, TrialSet,
};
use hedgecast_core::{build_bundle, validate_json, EngineConfig, TemplateSet};

/// Trial count used by `serve` when no data file is given.
pub const DEFAULT_SERVE_TRIALS: usize = 20;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "hedgecast",
    version,
    about = "Multimodal uncertainty forecasts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded forecast trials as a wide CSV.
    GenTrials {
        #[arg(long)]
        n: usize,
        #[arg(long, env = "SEED")]
        seed: u64,
        #[arg(long, value_parser = parse_range, default_value = "26,38")]
        mean_range: Range,
        #[arg(long, value_parser = parse_range, default_value = "1,4")]
        sd_range: Range,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the forecast bundle JSON for one trial.
    Bundle {
        #[arg(long, env = "DATA_PATH")]
        data: PathBuf,
        /// Trial id to render.
        #[arg(long, conflicts_with = "seed", required_unless_present = "seed")]
        trial: Option<u64>,
        /// Pick a trial at random with this seed.
        #[arg(long, env = "SEED")]
        seed: Option<u64>,
        #[arg(long, env = "TEMPLATE_PATH")]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a bundle JSON file against every bundle invariant.
    Validate {
        bundle: PathBuf,
        #[arg(long, env = "TEMPLATE_PATH")]
        templates: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "DATA_PATH")]
        data: Option<PathBuf>,
        #[arg(long, env = "TEMPLATE_PATH")]
        templates: Option<PathBuf>,
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "TELEMETRY_LOG", default_value = "telemetry.ndjson")]
        log: PathBuf,
        #[arg(long, env = "SEED")]
        seed: Option<u64>,
    },
    /// Summarize a telemetry NDJSON log.
    Report {
        #[arg(long, env = "TELEMETRY_LOG")]
        log: PathBuf,
    },
}

/// Parses `lo,hi`.
pub fn parse_range(s: &str) -> Result<Range, String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI but got {s:?}"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound: {e}"))?;
    Ok(Range::new(lo, hi))
}

fn load_templates(path: Option<&Path>) -> anyhow::Result<TemplateSet> {
    Ok(match path {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::default(),
    })
}

fn load_trials(path: &Path) -> anyhow::Result<TrialSet> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenTrials {
            n,
            seed,
            mean_range,
            sd_range,
            out,
        } => {
            let set = generate_trials(n, seed, mean_range, sd_range)?;
            emit(out.as_deref(), &write_csv(&set)?)?;
        }
        Command::Bundle {
            data,
            trial,
            seed,
            templates,
            out,
        } => {
            let set = load_trials(&data)?;
            let selector = match (trial, seed) {
                (Some(id), _) => Selector::ById(id),
                (None, Some(seed)) => Selector::RandomWithSeed(seed),
                (None, None) => bail!("either --trial or --seed is required"),
            };
            let trial = select_trial(&set, selector)?;
            let config = EngineConfig {
                templates: load_templates(templates.as_deref())?,
                ..EngineConfig::default()
            };
            let mut json = build_bundle(trial, &config)?.to_json();
            json.push('\n');
            emit(out.as_deref(), json.as_bytes())?;
        }
        Command::Validate { bundle, templates } => {
            let templates = load_templates(templates.as_deref())?;
            let json = fs::read_to_string(&bundle)
                .with_context(|| format!("reading {}", bundle.display()))?;
            let violations = validate_json(&json, &templates);
            if violations.is_empty() {
                println!("ok: {} satisfies all bundle invariants", bundle.display());
            } else {
                println!("{} violation(s) in {}", violations.len(), bundle.display());
                for v in &violations {
                    println!("  {v}");
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::Serve {
            data,
            templates,
            port,
            log,
            seed,
        } => {
            let trials = match &data {
                Some(path) => load_trials(path)?,
                None => generate_trials(
                    DEFAULT_SERVE_TRIALS,
                    seed.unwrap_or(DEFAULT_SEED),
                    trial_store::DEFAULT_MEAN_RANGE,
                    trial_store::DEFAULT_SD_RANGE,
                )?,
            };
            let config = EngineConfig {
                templates: load_templates(templates.as_deref())?,
                ..EngineConfig::default()
            };
            let state = service::AppState::new(trials, &config, &log, seed)?;
            let ui_dir = std::env::var_os("UI_DIR").map(PathBuf::from);
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, port, ui_dir))?;
        }
        Command::Report { log } => {
            let file =
                fs::File::open(&log).with_context(|| format!("opening {}", log.display()))?;
            let events = read_log(BufReader::new(file))?;
            let summary = summarize_telemetry(&events);
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
