use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crossing_bench::batch::write_csv;
use crossing_bench::sweeps::{prediction_error_probe, summarize, sweep_density, sweep_threshold, sweep_tradeoff};
use crossing_bench::{run_episode, BenchConfig, BenchError, ExperimentSpec, PolicyKind, StepRecord};
use crossing_core::Turn;

#[derive(Parser)]
#[command(name = "crossing-bench", about = "Closed-loop experiments for the T-junction crossing planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TurnArg {
    Left,
    Right,
}

impl From<TurnArg> for Turn {
    fn from(t: TurnArg) -> Self {
        match t {
            TurnArg::Left => Turn::Left,
            TurnArg::Right => Turn::Right,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, value_enum, default_value = "right")]
    turn: TurnArg,
    /// Overrides `sim.density` from the config.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, value_enum, default_value = "pomcp")]
    policy: PolicyKind,
    /// TTC threshold (s); overrides `ttc.threshold`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Episode seed, or the first seed of a batch.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    episodes: u32,
    /// TOML file; missing keys take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines file for per-step or per-episode details.
    #[arg(long)]
    detail: Option<PathBuf>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, BenchError> {
        let mut config = match &self.config {
            Some(path) => BenchConfig::load(path)?,
            None => BenchConfig::default(),
        };
        if let Some(d) = self.density {
            config.sim.density = d;
        }
        if let Some(t) = self.threshold {
            config.ttc.threshold = t;
        }
        let spec = ExperimentSpec {
            turn: self.turn.into(),
            policy: self.policy,
            episodes: self.episodes,
            base_seed: self.seed,
            config,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn output(&self) -> Result<Box<dyn Write>, BenchError> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its metrics as JSON.
    Episode(Common),
    /// Run seeds `seed .. seed + episodes` and write one CSV row.
    Batch(Common),
    /// TTC policy over a grid of thresholds.
    SweepThreshold {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3,3.5,4,4.5,5")]
        grid: Vec<f64>,
    },
    /// POMCP over action-cost scales against TTC over thresholds.
    SweepTradeoff {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.25,1,4,16,64")]
        scales: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,4.5,5")]
        thresholds: Vec<f64>,
    },
    /// POMCP and TTC over a grid of densities.
    SweepDensity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        grid: Vec<f64>,
    },
    /// Mean position error of the planner's model against the simulator.
    ProbePrediction {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        samples: u32,
    },
}

fn jsonl<T: serde::Serialize>(w: &mut impl Write, item: &T) -> Result<(), BenchError> {
    let line = serde_json::to_string(item).map_err(|e| BenchError::Io(e.to_string()))?;
    writeln!(w, "{line}")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Episode(c) => {
            let spec = c.spec()?;
            let metrics = match &c.detail {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    let mut failed = None;
                    let mut log = |r: StepRecord| {
                        if let Err(e) = jsonl(&mut w, &r) {
                            failed.get_or_insert(e);
                        }
                    };
                    let m = run_episode(&spec, c.seed, Some(&mut log))?;
                    if let Some(e) = failed {
                        return Err(e);
                    }
                    w.flush()?;
                    m
                }
                None => run_episode(&spec, c.seed, None)?,
            };
            let mut out = c.output()?;
            jsonl(&mut out, &metrics)?;
        }
        Command::Batch(c) => {
            let spec = c.spec()?;
            let (row, eps) = summarize(&spec, "none", 0.0)?;
            if let Some(path) = &c.detail {
                let mut w = BufWriter::new(File::create(path)?);
                for e in &eps {
                    jsonl(&mut w, e)?;
                }
                w.flush()?;
            }
            write_csv(c.output()?, &[row])?;
        }
        Command::SweepThreshold { common, grid } => {
            let rows = sweep_threshold(&grid, &common.spec()?)?;
            write_csv(common.output()?, &rows)?;
        }
        Command::SweepTradeoff {
            common,
            scales,
            thresholds,
        } => {
            let rows = sweep_tradeoff(&scales, &thresholds, &common.spec()?)?;
            write_csv(common.output()?, &rows)?;
        }
        Command::SweepDensity { common, grid } => {
            let rows = sweep_density(&grid, &[PolicyKind::Pomcp, PolicyKind::Ttc], &common.spec()?)?;
            write_csv(common.output()?, &rows)?;
        }
        Command::ProbePrediction { common, horizon, samples } => {
            let spec = common.spec()?;
            let errors = prediction_error_probe(&spec.config, spec.turn, horizon, samples, spec.base_seed)?;
            let mut w = csv::Writer::from_writer(common.output()?);
            w.write_record(["horizon_steps", "horizon_s", "mean_position_error_m"])?;
            for (k, e) in errors.iter().enumerate() {
                let t = k as f64 * spec.config.model.dt;
                w.write_record([k.to_string(), format!("{t:.2}"), format!("{e:.4}")])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
