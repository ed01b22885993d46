use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use slicesync_core::changeset_io::SequenceKey;
use slicesync_core::service::{register, Config, RunHooks, Service, StatsRow};

/// Keeps interest-based replicas of an RDF source in sync with its published changesets.
#[derive(Parser)]
#[command(name = "slicesync", version)]
struct Cli {
    /// Configuration file.
    #[arg(long, short, env = "SLICESYNC_CONFIG", default_value = "slicesync.toml", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default configuration file.
    InitConfig,
    /// Print the effective configuration, environment overrides applied.
    Config,
    /// Validate an interest file and add it to the registry.
    Register {
        file: PathBuf,
        /// Id to register under; defaults to the file's ID header, then its name.
        #[arg(long)]
        id: Option<String>,
    },
    /// Load an interest's replica from a dump (N-Triples, optionally gzipped).
    InitSlice {
        id: String,
        dump: PathBuf,
        /// Sequence key the dump corresponds to (YYYY-MM-DD-HH-NNNNNN).
        #[arg(long)]
        key: Option<SequenceKey>,
    },
    /// Propagate published changesets to every registered interest.
    Run(RunMode),
    /// Cumulative counts and store sizes per interest.
    Stats,
    /// Print the update documents published for an interest.
    ExportUpdates {
        id: String,
        /// Only changesets after this key.
        #[arg(long)]
        after: Option<SequenceKey>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RunMode {
    /// Process what is published now, then exit.
    #[arg(long)]
    once: bool,
    /// Keep polling for new changesets.
    #[arg(long)]
    daemon: bool,
}

fn load(cli: &Cli) -> anyhow::Result<Config> {
    Ok(Config::load(&cli.config)?)
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::InitConfig => {
            anyhow::ensure!(!cli.config.exists(), "{} already exists", cli.config.display());
            let dir = cli.config.parent().map(PathBuf::from).unwrap_or_default();
            std::fs::write(&cli.config, Config::under(&dir).to_toml())
                .with_context(|| format!("cannot write {}", cli.config.display()))?;
        }
        Command::Config => write!(out, "{}", load(cli)?.to_toml())?,
        Command::Register { file, id } => {
            let id = register(&load(cli)?, file, id.as_deref())?;
            writeln!(out, "{id}")?;
        }
        Command::InitSlice { id, dump, key } => {
            let mut svc = Service::open(load(cli)?)?;
            let (target, pi) = svc.init_slice(id, dump, *key)?;
            log::info!("{id}: {target} target triples, {pi} parked");
        }
        Command::Run(mode) => {
            let mut svc = Service::open(load(cli)?)?;
            let mut report = |r: &slicesync_core::evaluator::PropagationReport| {
                let mut o = std::io::stdout().lock();
                let _ = writeln!(o, "{}", r.line());
                let _ = o.flush();
            };
            if mode.daemon {
                static STOP: AtomicBool = AtomicBool::new(false);
                svc.run_daemon(&STOP, &mut report)?;
            } else {
                let summary = svc.run_once(&RunHooks::default(), &mut report)?;
                if !summary.failed.is_empty() {
                    log::error!("evaluation failed for {}", summary.failed.join(", "));
                    return Ok(false);
                }
            }
        }
        Command::Stats => {
            let svc = Service::open(load(cli)?)?;
            writeln!(out, "{}", StatsRow::HEADER)?;
            for row in svc.stats_rows() {
                writeln!(out, "{}", row.line())?;
            }
        }
        Command::ExportUpdates { id, after } => {
            let svc = Service::open(load(cli)?)?;
            write!(out, "{}", svc.export_updates(id, *after)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
