//! `tbma`: exponent sweeps, Monte Carlo runs and figure recipes.
//!
//! Exit codes: 0 on success, 1 on configuration, I/O or check failures, 2 on
//! invalid arguments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tbma_core::{
    presets, run_exponent_sweep, run_simulation, validation_report, write_simulation_csv,
    write_simulation_trace, write_sweep_csv, ConfigFile, DetectionMode, MonteCarloSpec,
    SimulateSpec, SweepAxis, SweepMode, SweepSpec, SystemConfig,
};

#[derive(Parser)]
#[command(
    name = "tbma",
    version,
    about = "Edge vs cloud detection exponents over type-based multiple access"
)]
struct Cli {
    /// Worker threads for sweep points and Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exponents along a parameter grid, one CSV row per point.
    ExponentSweep(SweepArgs),
    /// Monte Carlo error probability per horizon L plus the fitted slope.
    Simulate(SimulateArgs),
    /// Check a config and compare simulated moments with the exact ones.
    Validate(ValidateArgs),
    /// Exponents versus cross-channel variance for several capacities.
    ReproduceFig2(FigureArgs),
    /// Exponents versus fronthaul capacity without cross-channel fading.
    ReproduceFig3(FigureArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// sigma2_G, C, rho, lambda or snr_db.
    #[arg(long)]
    axis: String,
    /// Comma-separated, strictly increasing values.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// Comma-separated subset of edge, cloud, montecarlo.
    #[arg(long, default_value = "edge,cloud")]
    modes: String,
    /// Capacity repeat list for sigma2_G sweeps (adds a C column).
    #[arg(long)]
    capacities: Option<String>,
    /// Horizons for montecarlo mode.
    #[arg(long = "L", default_value = "1,2,5,10,20")]
    collections: String,
    /// Trials per horizon in montecarlo mode.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated horizons.
    #[arg(long = "L", default_value = "1,2,5,10,20")]
    collections: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// edge or cloud.
    #[arg(long, default_value = "edge")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the raw received blocks of the first trials to this CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Number of trials in the trace.
    #[arg(long, default_value_t = 10)]
    trace_trials: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Simulated intervals per hypothesis for the moment checks.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FigureArgs {
    /// Base scenario (default: built-in figure setup).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run Monte Carlo slopes with this many trials per horizon.
    #[arg(long)]
    montecarlo_trials: Option<usize>,
    #[arg(long = "L", default_value = "1,2,5,10,20")]
    collections: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Raised for bad arguments; maps to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| usage(format!("cannot parse {what} value '{s}'")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr<Err = tbma_core::Error>>(text: &str) -> Result<T> {
    text.parse()
        .map_err(|e: tbma_core::Error| usage(e.to_string()))
}

fn read_config(path: &Path) -> Result<SystemConfig> {
    let cfg = ConfigFile::read(path)
        .with_context(|| format!("reading config {}", path.display()))?
        .to_config();
    cfg.check()?;
    Ok(cfg)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Core argument errors count as usage errors.
fn classify(err: tbma_core::Error) -> anyhow::Error {
    match err {
        tbma_core::Error::InvalidArgument(msg) => usage(msg),
        other => other.into(),
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let axis: SweepAxis = parse_one(&args.axis)?;
    let grid: Vec<f64> = parse_list(&args.grid, "grid")?;
    let modes = args
        .modes
        .split(',')
        .map(|m| parse_one::<SweepMode>(m.trim()))
        .collect::<Result<Vec<_>>>()?;
    let mut spec = SweepSpec::new(axis, grid, modes);
    if let Some(c) = &args.capacities {
        spec.capacities = parse_list(c, "capacity")?;
    }
    if spec.modes.contains(&SweepMode::MonteCarlo) {
        spec.montecarlo = Some(MonteCarloSpec {
            collections: parse_list(&args.collections, "L")?,
            trials: args.trials,
            seed: args.seed,
        });
    }
    spec.check().map_err(classify)?;
    let cfg = read_config(&args.config)?;
    let rows = run_exponent_sweep(&cfg, &spec).map_err(classify)?;
    let mut out = open_out(&args.out)?;
    write_sweep_csv(&mut out, &spec, &rows)?;
    out.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = SimulateSpec {
        collections: parse_list(&args.collections, "L")?,
        trials: args.trials,
        mode: parse_one::<DetectionMode>(&args.mode)?,
        seed: args.seed,
    };
    if spec.trials < tbma_core::MIN_TRIALS {
        return Err(usage(format!(
            "need at least {} trials, got {}",
            tbma_core::MIN_TRIALS,
            spec.trials
        )));
    }
    let cfg = read_config(&args.config)?;
    let report = run_simulation(&cfg, &spec).map_err(classify)?;
    let mut out = open_out(&args.out)?;
    write_simulation_csv(&mut out, &report)?;
    out.flush()?;
    if let Some(path) = &args.trace {
        let horizon = spec.collections.iter().copied().max().unwrap_or(1);
        let file = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        write_simulation_trace(file, &cfg, horizon, args.trace_trials, spec.seed)?;
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<bool> {
    let cfg = ConfigFile::read(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?
        .to_config();
    let lines = validation_report(&cfg, args.samples, args.seed).map_err(classify)?;
    let mut all = true;
    for l in &lines {
        println!(
            "{} {}: {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
        all &= l.passed;
    }
    Ok(all)
}

fn figure(args: FigureArgs, base: SystemConfig, mut spec: SweepSpec) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => base,
    };
    if let Some(trials) = args.montecarlo_trials {
        spec.modes.push(SweepMode::MonteCarlo);
        spec.montecarlo = Some(MonteCarloSpec {
            collections: parse_list(&args.collections, "L")?,
            trials,
            seed: args.seed,
        });
    }
    spec.check().map_err(classify)?;
    let rows = run_exponent_sweep(&cfg, &spec).map_err(classify)?;
    let mut out = open_out(&args.out)?;
    write_sweep_csv(&mut out, &spec, &rows)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let both = vec![SweepMode::Edge, SweepMode::Cloud];
    match cli.command {
        Command::ExponentSweep(a) => sweep(a).map(|_| true),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Validate(a) => validate(a),
        Command::ReproduceFig2(a) => {
            let mut spec = SweepSpec::new(
                SweepAxis::Sigma2G,
                presets::FIG2_SIGMA2_G_GRID.to_vec(),
                both,
            );
            spec.capacities = presets::FIG2_CAPACITIES.to_vec();
            figure(a, presets::fig2_config(0.0), spec).map(|_| true)
        }
        Command::ReproduceFig3(a) => {
            let spec = SweepSpec::new(
                SweepAxis::Capacity,
                presets::FIG3_CAPACITY_GRID.to_vec(),
                both,
            );
            figure(a, presets::fig3_config(1.0), spec).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
