use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairfl::experiment::{cmd_ablate, cmd_run, cmd_sweep, Ablation, ExperimentConfig, LambdaGrid, Trainer};

#[derive(Parser)]
#[command(name = "fairfl", version, about = "Fairness-regularized federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output root; one subdirectory is created per run.
    #[arg(long, env = "FAIRFL_OUT", default_value = "runs")]
    out: PathBuf,
    /// Override the trainer named in the config.
    #[arg(long)]
    trainer: Option<Trainer>,
}

#[derive(Subcommand)]
enum Command {
    /// Train once.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep lambda over a log grid and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// lo:hi:n
        #[arg(long, default_value = "1e-5:100:50")]
        lambda_grid: LambdaGrid,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// set_size | heterogeneity | convergence
    Ablate {
        which: Ablation,
        #[command(flatten)]
        common: Common,
        /// lo:hi:n, used by set_size
        #[arg(long, default_value = "1e-5:10:8")]
        lambda_grid: LambdaGrid,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn load(common: &Common) -> fairfl::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(t) = common.trainer {
        config.trainer = t;
        config.validate()?;
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, seed } => load(&common).and_then(|mut c| {
            if let Some(s) = seed {
                c.seed = s;
            }
            let dir = cmd_run(&c, &common.out)?;
            println!("{}", dir.display());
            Ok(0)
        }),
        Command::Sweep {
            common,
            lambda_grid,
            seeds,
            workers,
        } => load(&common).and_then(|c| {
            let report = cmd_sweep(&c, &lambda_grid, &seeds, workers, &common.out)?;
            println!("{}", report.dir.display());
            Ok(report.result.failures)
        }),
        Command::Ablate {
            which,
            common,
            lambda_grid,
            seeds,
            workers,
        } => load(&common).and_then(|c| {
            let (dir, failures) = cmd_ablate(which, &c, &lambda_grid, &seeds, workers, &common.out)?;
            println!("{}", dir.display());
            Ok(failures)
        }),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("error: {failures} run(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
