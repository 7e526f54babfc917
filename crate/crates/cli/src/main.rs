use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use irsvel_core::harness::{convergence, convergence_csv, run_trial, sweep, sweep_csv, SweepAxis};
use irsvel_core::{Error, ExperimentConfig, Method};

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

/// Monte-Carlo driver for IRS-assisted true-velocity estimation.
#[derive(Parser)]
#[command(name = "irsvel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its record as JSON.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Trial index (selects the random stream).
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// NMSE versus SNR.
    SweepSnr {
        #[command(flatten)]
        common: Common,
        /// SNR points in dB, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        snr: Option<Vec<f64>>,
    },
    /// NMSE versus target speed.
    SweepSpeed {
        #[command(flatten)]
        common: Common,
        /// Speeds in m/s, comma separated.
        #[arg(long, value_delimiter = ',')]
        speeds: Option<Vec<f64>>,
    },
    /// Per-iteration MODE step sizes (median and 10/90% quantiles).
    Convergence {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; unspecified fields take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Estimator(s), comma separated: mode, music, esprit, no-irs.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stacking dimension P.
    #[arg(long)]
    p_stack: Option<usize>,
    /// Disable receiver noise.
    #[arg(long)]
    no_noise: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.base_seed = s;
        }
        if let Some(n) = self.trials {
            c.n_trials = n;
        }
        if let Some(m) = self.method.as_ref().and_then(|m| m.first()) {
            c.method = *m;
        }
        if let Some(p) = self.p_stack {
            c.system.stack_dim = p;
        }
        if self.no_noise {
            c.noise = false;
        }
        if self.out.is_some() {
            c.output = self.out.clone();
        }
        c.validate()?;
        Ok(c)
    }

    fn methods(&self, default: &[Method]) -> Vec<Method> {
        self.method.clone().unwrap_or_else(|| default.to_vec())
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_sweep(common: &Common, axis: SweepAxis, default_methods: &[Method], tweak: impl FnOnce(&mut ExperimentConfig)) -> anyhow::Result<ExitCode> {
    let mut config = common.load()?;
    tweak(&mut config);
    let axis = match axis {
        SweepAxis::None => config.sweep.clone(),
        a => a,
    };
    let rows = sweep(&config, &axis, &common.methods(default_methods))?;
    emit(&sweep_csv(&rows), config.output.as_ref())?;
    for r in rows.iter().filter(|r| r.n_fail > 0) {
        eprintln!("{} at {}: {} of {} trials failed and were excluded", r.method, r.axis_value, r.n_fail, r.n_fail + r.n_success);
    }
    if rows.iter().any(|r| r.n_success == 0) {
        eprintln!("error: every trial failed at one or more sweep points");
        return Ok(ExitCode::from(EXIT_ALL_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let common = match &cli.command {
        Command::Trial { common, .. }
        | Command::SweepSnr { common, .. }
        | Command::SweepSpeed { common, .. }
        | Command::Convergence { common } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            bail!(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    match &cli.command {
        Command::Trial { index, .. } => {
            let config = common.load()?;
            let record = run_trial(&config, *index)?;
            let mut text = serde_json::to_string_pretty(&record)?;
            text.push('\n');
            emit(&text, config.output.as_ref())?;
            Ok(if record.succeeded() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ALL_FAILED) })
        }
        Command::SweepSnr { snr, .. } => {
            let axis = match snr {
                Some(v) => SweepAxis::SnrDb(v.clone()),
                None => SweepAxis::None,
            };
            run_sweep(common, axis, &[Method::Mode, Method::RootMusic, Method::Esprit], |c| {
                if !matches!(c.sweep, SweepAxis::SnrDb(_)) {
                    c.sweep = SweepAxis::SnrDb(vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
                }
            })
        }
        Command::SweepSpeed { speeds, .. } => {
            let axis = match speeds {
                Some(v) => SweepAxis::Speed(v.clone()),
                None => SweepAxis::None,
            };
            run_sweep(common, axis, &[Method::Mode, Method::NoIrs], |c| {
                if !matches!(c.sweep, SweepAxis::Speed(_)) {
                    c.sweep = SweepAxis::Speed(vec![10.0, 20.0, 30.0, 40.0, 50.0]);
                }
            })
        }
        Command::Convergence { .. } => {
            let config = common.load()?;
            let (rows, records) = convergence(&config)?;
            emit(&convergence_csv(&rows), config.output.as_ref())?;
            let dropped = records.iter().filter(|r| r.d_trace.len() != config.mode.max_iter).count();
            if dropped > 0 {
                eprintln!("{dropped} of {} trials diverged and were excluded", records.len());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<Error>().is_some_and(|e| matches!(e, Error::Config(_) | Error::Input(_) | Error::DegenerateGeometry(_)));
            if config_error {
                ExitCode::from(EXIT_CONFIG)
            } else if matches!(e.downcast_ref::<Error>(), Some(Error::EmptyResult)) {
                ExitCode::from(EXIT_ALL_FAILED)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
