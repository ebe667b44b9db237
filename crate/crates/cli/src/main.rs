use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchorite::pipeline::{self, Manifest, ScatterMode, StageRecord};
use anchorite::{Error, Result, ScenarioConfig};
use clap::{Args, Parser, Subcommand};
use log::info;

/// Localize sensors from correlations of their binary observations.
#[derive(Parser)]
#[command(name = "anchorite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Deploy sensors and simulate observations.
    Generate(Common),
    /// Pairwise cumulants from observations.bin.
    Estimate(Common),
    /// Proximity graph and hop distances to beacons.
    Graph(Common),
    /// Position estimates from hop distances.
    Localize(Common),
    /// All four stages in order.
    Pipeline(Common),
    /// Cumulant against distance for all pairs or pairs with one node.
    Scatter {
        #[command(flatten)]
        common: Common,
        /// Only pairs containing this node.
        #[arg(long)]
        node: Option<usize>,
        /// Use the lagged cumulant.
        #[arg(long)]
        lagged: bool,
    },
    /// Covariance curve of the config's field model.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing separations.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        distances: Vec<f64>,
        /// Monte Carlo samples per distance.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate(c)
            | Command::Estimate(c)
            | Command::Graph(c)
            | Command::Localize(c)
            | Command::Pipeline(c) => c,
            Command::Scatter { common, .. } | Command::Oracle { common, .. } => common,
        }
    }
}

fn load(common: &Common) -> Result<(ScenarioConfig, PathBuf)> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = pipeline::output_dir(&cfg, common.out.as_deref());
    Ok((cfg, out))
}

fn record(cfg: &ScenarioConfig, out: &Path, rec: StageRecord) -> Result<()> {
    info!("{:?} finished in {:.3} s", rec.stage, rec.seconds);
    let mut m = Manifest::load_or_new(out, cfg);
    m.record(rec);
    m.write(out)
}

fn run(cmd: &Command) -> Result<()> {
    let (cfg, out) = load(cmd.common())?;
    let out = out.as_path();
    match cmd {
        Command::Generate(_) => record(&cfg, out, pipeline::generate(&cfg, out)?),
        Command::Estimate(_) => record(&cfg, out, pipeline::estimate(&cfg, out)?),
        Command::Graph(_) => record(&cfg, out, pipeline::graph(&cfg, out)?),
        Command::Localize(_) => {
            let (rec, report) = pipeline::localize(&cfg, out)?;
            info!("{:?} finished in {:.3} s; {report:?}", rec.stage, rec.seconds);
            let mut m = Manifest::load_or_new(out, &cfg);
            m.record(rec);
            m.localization = Some(report);
            m.write(out)
        }
        Command::Pipeline(_) => {
            let m = pipeline::run_pipeline(&cfg, out)?;
            for s in &m.stages {
                info!("{:?} finished in {:.3} s", s.stage, s.seconds);
            }
            Ok(())
        }
        Command::Scatter { node, lagged, .. } => {
            let mode = node.map_or(ScatterMode::AllPairs, ScatterMode::FixedNode);
            record(&cfg, out, pipeline::scatter(out, mode, *lagged)?)
        }
        Command::Oracle { distances, samples, .. } => {
            record(&cfg, out, pipeline::oracle(&cfg, out, distances, *samples)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli.command.common().threads;
    match pipeline::with_threads(threads, || run(&cli.command)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}
