use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use driftburst::pipeline::{self, Model};
use driftburst::report::{self, write_regression_csv};
use driftburst::simulator::{simulate, write_simulation, SimScenario};
use driftburst::tables::{self, read_events_csv, write_events_csv};
use driftburst::{AnalysisConfig, DayTape, EventClass};

#[derive(Parser)]
#[command(name = "driftburst", version, about = "Drift-burst event studies on tick data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate event files and truth.csv from a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect and classify events in a directory of event files.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure flows, impact, pressure, P&L and inventories of detected events.
    Measure {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Estimate one model on one pool of events.
    Regress {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_parser = ["var", "var-aggr", "var-pass", "pnl", "cross", "ecm"])]
        model: String,
        #[arg(long, value_enum)]
        pool: Pool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble tables, curves and histograms with a JSON manifest.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long = "regress-dir")]
        regress_dir: Option<PathBuf>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pool {
    Systematic,
    Unsystematic,
}

impl From<Pool> for EventClass {
    fn from(p: Pool) -> Self {
        match p {
            Pool::Systematic => EventClass::Systematic,
            Pool::Unsystematic => EventClass::Unsystematic,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<AnalysisConfig> {
    match path {
        Some(p) => AnalysisConfig::from_file(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(AnalysisConfig::default()),
    }
}

fn load_tapes(dir: &Path, cfg: &AnalysisConfig) -> Result<Vec<DayTape>> {
    let loaded = driftburst::io::load_dir(dir, &cfg.session).with_context(|| format!("loading {}", dir.display()))?;
    let (mut trades, mut quotes, mut unknown) = (0, 0, 0);
    for (_, r) in &loaded {
        trades += r.trades;
        quotes += r.quotes;
        unknown += r.unknown_categories;
    }
    info!("{} stock-days, {trades} trades, {quotes} quotes", loaded.len());
    if unknown > 0 {
        warn!("{unknown} trade legs with unknown categories booked as OTHER");
    }
    Ok(loaded.into_iter().map(|(t, _)| t).collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate { scenario, out } => {
            let scn = SimScenario::from_file(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let days = simulate(&scn)?;
            write_simulation(&days, &out)?;
            info!("{} stock-days written to {}", days.len(), out.display());
        }
        Cmd::Detect { input, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let tapes = load_tapes(&input, &cfg)?;
            let barrier = pipeline::resolve_barrier(&cfg)?;
            info!("barrier {barrier:.4}");
            let seg = pipeline::detect_panel(&tapes, &cfg, barrier);
            for r in &seg.rejected {
                warn!("{} trough at {:.0}s rejected: {}", r.key, r.t_trough.as_secs_f64(), r.reason);
            }
            write_events_csv(&seg.events, &out)?;
            info!("{} events, {} rejected", seg.events.len(), seg.rejected.len());
        }
        Cmd::Measure {
            events,
            input,
            config,
            out_dir,
        } => {
            let cfg = load_config(config.as_deref())?;
            let evs = read_events_csv(&events)?;
            let tapes = load_tapes(&input, &cfg)?;
            let bundle = pipeline::measure_all(&tapes, &evs, &cfg)?;
            let files = tables::write_metrics(&out_dir, &bundle)?;
            info!("{} events measured, {} files in {}", bundle.events.len(), files.len(), out_dir.display());
        }
        Cmd::Regress {
            metrics,
            events,
            model,
            pool,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let model: Model = model.parse()?;
            let mut measured = tables::read_measured(&metrics)?;
            pipeline::reclassify(&mut measured, &read_events_csv(&events)?)?;
            let inventory = match model {
                Model::Ecm => tables::read_inventory(&metrics)?,
                _ => Vec::new(),
            };
            let rows = pipeline::regress(&measured, &inventory, model, pool.into(), &cfg)?;
            write_regression_csv(&rows, &out)?;
            info!("{} coefficient rows written to {}", rows.len(), out.display());
        }
        Cmd::Report {
            metrics,
            regress_dir,
            out_dir,
        } => {
            let m = report::write_report(&metrics, regress_dir.as_deref(), &out_dir)?;
            info!("{} artifacts written to {}", m.artifacts.len(), out_dir.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
