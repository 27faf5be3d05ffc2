//! Command-line front end for the hot spot analysis pipeline.
//!
//! Subcommands map one-to-one onto pipeline stages plus `run`, which chains
//! them, and `synthetic`, which fabricates input data. Stages exchange files
//! through the output directory, so any stage can run in its own invocation
//! as long as its predecessors already wrote their artifacts.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
//! unparsable input data, 3 failure in a stage past ingest.

mod config;
mod error;
mod pipeline;
mod synth;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use config::{PipelineConfig, Steepness};
use error::CliError;
use pipeline::Pipeline;
use synth::{SynthKind, SynthSpec};

#[derive(Parser)]
#[command(
    name = "hotspot",
    version,
    about = "Variable-density hot spot analysis for geocoded incident data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw incident export into the pipeline's working format
    Ingest(CommonArgs),
    /// Sample, density-rescale, cluster, and label every incident
    Cluster(CommonArgs),
    /// Empty-space and nearest-neighbor curves with Poisson bands
    Ripley(RipleyArgs),
    /// Per-cluster distance autocorrelation curves
    Correlate(CommonArgs),
    /// Summary tables and composition shares from labeled incidents
    Report(ReportArgs),
    /// Every stage in order: ingest, cluster, ripley, correlate, report
    Run(CommonArgs),
    /// Generate a synthetic incident CSV
    Synthetic(SynthArgs),
}

/// Flags shared by every stage; unset ones fall back to the config file.
#[derive(Args)]
struct CommonArgs {
    /// Raw incident CSV
    #[arg(long, env = "HOTSPOT_INPUT")]
    input: Option<PathBuf>,
    /// TOML configuration file
    #[arg(long, env = "HOTSPOT_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; stages derive theirs from it
    #[arg(long, env = "HOTSPOT_SEED")]
    seed: Option<u64>,
    /// Neighborhood radius in rescaled meters
    #[arg(long, env = "HOTSPOT_EPSILON")]
    epsilon: Option<f64>,
    /// Minimum neighborhood size, the queried point included
    #[arg(long, env = "HOTSPOT_KAPPA")]
    kappa: Option<usize>,
    /// Logistic steepness: a number, or "adaptive"
    #[arg(long, env = "HOTSPOT_STEEPNESS", value_parser = Steepness::from_str)]
    steepness: Option<Steepness>,
    /// Points drawn for the clustering sample
    #[arg(long, env = "HOTSPOT_SAMPLE_SIZE")]
    sample_size: Option<usize>,
    /// Label propagation radius in meters
    #[arg(long, env = "HOTSPOT_ENVELOPE_RADIUS")]
    envelope_radius: Option<f64>,
    /// Curve histogram bin width in meters
    #[arg(long, env = "HOTSPOT_BIN_WIDTH")]
    bin_width: Option<f64>,
    /// Resampling runs per autocorrelation curve
    #[arg(long, env = "HOTSPOT_RUNS")]
    runs: Option<usize>,
    /// Output directory for stage artifacts
    #[arg(long, env = "HOTSPOT_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RipleyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Evaluate a generated pattern instead of ingested incidents
    #[arg(long, value_enum)]
    synthetic: Option<SynthKind>,
    /// Point count for the generated pattern
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Label file to use instead of the cluster stage's output
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Pattern family
    #[arg(long, value_enum, default_value = "csr")]
    kind: SynthKind,
    /// Total points
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, env = "HOTSPOT_SEED", default_value_t = 17)]
    seed: u64,
    /// Output CSV path
    #[arg(long, default_value = "synthetic.csv")]
    out: PathBuf,
    /// Window side length in meters
    #[arg(long, default_value_t = 10_000.0)]
    window: f64,
    /// Blob standard deviation in meters
    #[arg(long, default_value_t = 300.0)]
    sigma: f64,
    /// Blob count for --kind blobs
    #[arg(long, default_value_t = 5)]
    blobs: usize,
    /// Center distance for --kind two-blob, meters
    #[arg(long, default_value_t = 2_000.0)]
    separation: f64,
    #[arg(long, default_value_t = 2001)]
    year_min: i32,
    #[arg(long, default_value_t = 2022)]
    year_max: i32,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    init_logger();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(args) => {
            let mut p = Pipeline::new(effective_config(&args)?, "ingest")?;
            p.ingest()?;
            p.finish()?;
            Ok(())
        }
        Command::Cluster(args) => {
            let mut p = Pipeline::new(effective_config(&args)?, "cluster")?;
            p.cluster()?;
            p.finish()?;
            Ok(())
        }
        Command::Ripley(args) => {
            let cfg = effective_config(&args.common)?;
            let mut p = Pipeline::new(cfg.clone(), "ripley")?;
            match args.synthetic {
                Some(kind) => {
                    let spec = ripley_synth_spec(kind, args.n, cfg.seed);
                    p.ripley_synthetic(&spec)?;
                }
                None => p.ripley()?,
            }
            p.finish()?;
            Ok(())
        }
        Command::Correlate(args) => {
            let mut p = Pipeline::new(effective_config(&args)?, "correlate")?;
            p.correlate()?;
            p.finish()?;
            Ok(())
        }
        Command::Report(args) => {
            let mut p = Pipeline::new(effective_config(&args.common)?, "report")?;
            p.report(args.labels.as_deref())?;
            p.finish()?;
            Ok(())
        }
        Command::Run(args) => {
            let mut p = Pipeline::new(effective_config(&args)?, "run")?;
            p.ingest()?;
            p.cluster()?;
            p.ripley()?;
            p.correlate()?;
            p.report(None)?;
            let manifest = p.finish()?;
            println!("pipeline complete; manifest at {}", manifest.display());
            Ok(())
        }
        Command::Synthetic(args) => {
            let spec = synth_spec(&args)?;
            let n = synth::write_csv(&spec, &args.out)?;
            println!("wrote {n} synthetic incidents to {}", args.out.display());
            Ok(())
        }
    }
}

/// File config overlaid by flags, then validated.
fn effective_config(args: &CommonArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = args.steepness {
        cfg.steepness = v;
    }
    if let Some(v) = args.sample_size {
        cfg.sample_size = v;
    }
    if let Some(v) = args.envelope_radius {
        cfg.envelope_radius = v;
    }
    if let Some(v) = args.bin_width {
        cfg.bin_width = v;
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Small fixed geometry for quick uniformity checks.
fn ripley_synth_spec(kind: SynthKind, n: Option<usize>, seed: u64) -> SynthSpec {
    SynthSpec {
        kind,
        n: n.unwrap_or(2_000),
        seed,
        window_m: 1_000.0,
        sigma: 50.0,
        blobs: 3,
        separation: 400.0,
        year_min: 2001,
        year_max: 2022,
    }
}

fn synth_spec(args: &SynthArgs) -> Result<SynthSpec, CliError> {
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    for (name, v) in [("--window", args.window), ("--sigma", args.sigma), ("--separation", args.separation)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::usage(format!("{name} must be positive, got {v}")));
        }
    }
    if args.year_min > args.year_max {
        return Err(CliError::usage(format!(
            "--year-min {} exceeds --year-max {}",
            args.year_min, args.year_max
        )));
    }
    Ok(SynthSpec {
        kind: args.kind,
        n: args.n,
        seed: args.seed,
        window_m: args.window,
        sigma: args.sigma,
        blobs: args.blobs,
        separation: args.separation,
        year_min: args.year_min,
        year_max: args.year_max,
    })
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().to_string().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn init_logger() {
    let level = match std::env::var("HOTSPOT_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        Ok("off") => log::LevelFilter::Off,
        _ => log::LevelFilter::Warn,
    };
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(level);
    }
}
