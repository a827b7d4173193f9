use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limited_supply::experiment::{self, RunOptions};
use limited_supply::Error;

#[derive(Parser)]
#[command(version, about = "Limited-supply contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a config and list every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the small-scale demo (or the given config) with traces and allocation shares.
    Demo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Output directory [env: LIMITED_SUPPLY_OUT]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [env: LIMITED_SUPPLY_JOBS]
    #[arg(long)]
    jobs: Option<usize>,
    /// Base seed, replacing `seeds.base`
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn options(self) -> Result<RunOptions, Error> {
        if self.jobs == Some(0) {
            return Err(Error::InvalidParameter { name: "jobs", reason: "must be at least 1".into() });
        }
        Ok(RunOptions::from_env()?.overridden_by(RunOptions { out_dir: self.out, jobs: self.jobs, seed: self.seed }))
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    let report = match command {
        Command::Validate { config } => {
            let diagnostics = experiment::validate_config(&config)?;
            if diagnostics.is_empty() {
                println!("{}: ok", config.display());
                return Ok(ExitCode::SUCCESS);
            }
            for d in &diagnostics {
                println!("{d}");
            }
            return Ok(ExitCode::from(2));
        }
        Command::Run { config, run } => {
            let config = experiment::load_config(&config)?;
            experiment::run_experiment(&config, &run.options()?)?
        }
        Command::Demo { config, run } => match config {
            Some(path) => experiment::run_experiment(&experiment::load_config(&path)?, &run.options()?)?,
            None => experiment::run_small_scale_demo(&run.options()?)?,
        },
    };
    println!("wrote {} ({} summary rows)", report.out_dir.display(), report.summary_rows);
    for file in &report.files {
        println!("  {file}");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(Error::Config(diagnostics)) => {
            eprintln!("invalid configuration:");
            for d in &diagnostics {
                eprintln!("  {d}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
