use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rfs_fuse::{run_experiment, write_results, ExperimentConfig, Mode, RunOptions, SimResult};

#[derive(Parser)]
#[command(name = "rfs-fuse", version, about = "Multi-sensor PHD/MB/LMB fusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Noncooperative,
    Cc,
    Fit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    LinearHomogeneous,
    LinearHeterogeneous,
    Rangebearing,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write steps.csv and aggregate.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Fit iterations; replaces the configured sweep.
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        alpha1: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Write zero fusion times so that output is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print a built-in configuration as JSON.
    Preset {
        #[arg(value_enum)]
        name: Preset,
    },
}

fn run(cli: Cli) -> SimResult<()> {
    match cli.command {
        Command::Preset { name } => {
            let config = match name {
                Preset::LinearHomogeneous => ExperimentConfig::linear_homogeneous(),
                Preset::LinearHeterogeneous => ExperimentConfig::linear_heterogeneous(),
                Preset::Rangebearing => ExperimentConfig::rangebearing(),
            };
            println!("{}", config.to_json());
        }
        Command::Run {
            config,
            out,
            runs,
            seed,
            mode,
            t_max,
            alpha1,
            beta,
            no_timing,
        } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(r) = runs {
                c.scenario.runs = r;
            }
            if let Some(s) = seed {
                c.scenario.seed = s;
            }
            if let Some(m) = mode {
                c.mode = match m {
                    ModeArg::Noncooperative => Mode::Noncooperative,
                    ModeArg::Cc => Mode::CcOnly,
                    ModeArg::Fit => Mode::Fit,
                };
            }
            if let Some(t) = t_max {
                c.fusion.t_max = t;
                c.fit_iteration_sweep = vec![t];
            }
            if let Some(a) = alpha1 {
                c.fusion.alpha1 = a;
            }
            if let Some(b) = beta {
                c.fusion.beta = b;
            }
            let table = run_experiment(&c, RunOptions { timing: !no_timing })?;
            let (steps, agg) = write_results(&table, &out)?;
            eprintln!("wrote {} and {}", steps.display(), agg.display());
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
