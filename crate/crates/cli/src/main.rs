use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssvep_itr::eval::{execute, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "ssvep-itr", version, about = "ITR-maximising threshold classifier for SSVEP recordings")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset at the configured manifest path.
    Synth(Common),
    /// Write the raw features of every trial.
    Extract(Common),
    /// Fit LDA, skew-normal models and thresholds on every trial.
    Train(Common),
    /// Score the manifest trials with a trained model.
    Eval(Common),
    /// Cross-validate the full pipeline.
    Run(Common),
    /// Cross-validate and compare abstaining with forced-choice decisions.
    Compare(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl Cmd {
    fn split(&self) -> (Command, &Common) {
        match self {
            Cmd::Synth(c) => (Command::Synth, c),
            Cmd::Extract(c) => (Command::Extract, c),
            Cmd::Train(c) => (Command::Train, c),
            Cmd::Eval(c) => (Command::Eval, c),
            Cmd::Run(c) => (Command::Run, c),
            Cmd::Compare(c) => (Command::Compare, c),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = cli.command.split();

    let result = ExperimentConfig::load(&common.config).and_then(|cfg| {
        let cfg = match common.seed {
            Some(seed) => cfg.with_seed(seed),
            None => cfg,
        };
        execute(command, &cfg)
    });
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error[{}]: {err}", err.category());
            ExitCode::FAILURE
        }
    }
}
