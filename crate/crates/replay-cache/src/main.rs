//! Experiment runner and benchmark harness.
//!
//! Subcommands: `memcalc`, `run`, `compare`, `bench`. Exit codes:
//! 0 success/equivalent, 1 usage error, 2 runtime error, 3 divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use replay_cache::config::RunConfig;
use replay_cache::error::Error;
use replay_cache::{memmodel, runner};

#[derive(Parser)]
#[command(name = "replay-cache", version, about = "Return-caching experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analytical cache memory table for both backends
    Memcalc {
        #[arg(long, default_value_t = 28_224)]
        state_bytes: u64,
        #[arg(long, default_value_t = 1)]
        action_bytes: u64,
        #[arg(long, default_value_t = 4)]
        return_bytes: u64,
        #[arg(long, default_value_t = 4)]
        index_bytes: u64,
        /// Cache size S
        #[arg(long = "S", default_value_t = 80_000)]
        cache_size: u64,
        /// Also write the table as CSV to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one seeded training run and write a CSV report
    Run(RunArgs),
    /// Run both backends with one seed and check for equivalence
    Compare {
        #[command(flatten)]
        args: RunArgs,
        /// Negative control: perturb the second backend's seed
        #[arg(long, hide = true)]
        mismatch_seeds: bool,
    },
    /// Measure median cache build time per backend across observation sizes
    Bench {
        /// Observation sizes in bytes
        #[arg(long, value_delimiter = ',', default_values_t = vec![64, 28_224])]
        sizes: Vec<usize>,
        #[arg(long = "S", default_value_t = 8_000)]
        cache_size: usize,
        #[arg(long = "B", default_value_t = 100)]
        block_size: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Shared run flags; every unset flag falls back to the config file, which
/// falls back to the defaults.
#[derive(Args)]
struct RunArgs {
    /// key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// virtual | physical
    #[arg(long)]
    backend: Option<String>,
    /// chain | gridworld | synthetic
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    obs_bytes: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Cache size
    #[arg(long = "S")]
    cache_size: Option<usize>,
    /// Block size
    #[arg(long = "B")]
    block_size: Option<usize>,
    /// Cache refresh period
    #[arg(long = "C")]
    refresh_period: Option<u64>,
    /// Effective training frequency
    #[arg(long = "F")]
    train_frequency: Option<u64>,
    /// Prepopulation count
    #[arg(long = "K")]
    prepopulation: Option<usize>,
    #[arg(long)]
    capacity: Option<usize>,
    /// Minibatch size
    #[arg(long)]
    batch: Option<usize>,
    /// Learning rate
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps_start: Option<f64>,
    #[arg(long)]
    eps_end: Option<f64>,
    #[arg(long)]
    eps_anneal: Option<u64>,
    #[arg(long)]
    total_steps: Option<u64>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn to_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        // flag overrides, applied through the same key=value channel the
        // config file uses
        let overrides: [(&str, Option<String>); 18] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("backend", self.backend.clone()),
            ("env", self.env.clone()),
            ("obs_bytes", self.obs_bytes.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("S", self.cache_size.map(|v| v.to_string())),
            ("B", self.block_size.map(|v| v.to_string())),
            ("C", self.refresh_period.map(|v| v.to_string())),
            ("F", self.train_frequency.map(|v| v.to_string())),
            ("K", self.prepopulation.map(|v| v.to_string())),
            ("capacity", self.capacity.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("eps_start", self.eps_start.map(|v| v.to_string())),
            ("eps_end", self.eps_end.map(|v| v.to_string())),
            ("eps_anneal", self.eps_anneal.map(|v| v.to_string())),
            ("total_steps", self.total_steps.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Memcalc {
            state_bytes,
            action_bytes,
            return_bytes,
            index_bytes,
            cache_size,
            out,
        } => {
            let layout =
                memmodel::MemoryLayout::new(state_bytes, action_bytes, return_bytes, index_bytes)?;
            print!("{}", memmodel::table(&layout, cache_size));
            if let Some(path) = out {
                std::fs::write(path, memmodel::csv(&layout, cache_size))?;
            }
            Ok(0)
        }
        Command::Run(args) => {
            let cfg = args.to_config()?;
            let report = runner::execute_run(&cfg)?;
            print!("{}", runner::report_summary(&report));
            if let Some(path) = &args.out {
                std::fs::write(path, runner::report_to_csv(&report))?;
            }
            Ok(0)
        }
        Command::Compare {
            args,
            mismatch_seeds,
        } => {
            let cfg = args.to_config()?;
            let outcome = runner::execute_compare(&cfg, mismatch_seeds)?;
            print!("{}", outcome.render());
            if let Some(path) = &args.out {
                let mut csv = String::from("backend,report\n");
                csv.push_str(&runner::report_to_csv(&outcome.virtual_report));
                csv.push('\n');
                csv.push_str(&runner::report_to_csv(&outcome.physical_report));
                std::fs::write(path, csv)?;
            }
            Ok(if outcome.equivalent { 0 } else { 3 })
        }
        Command::Bench {
            sizes,
            cache_size,
            block_size,
            repeats,
            seed,
            out,
        } => {
            let rows = runner::execute_bench(&sizes, cache_size, block_size, repeats, seed)?;
            let csv = runner::bench_to_csv(&rows);
            print!("{csv}");
            if let Some(path) = out {
                std::fs::write(path, csv)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
