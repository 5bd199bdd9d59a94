use std::fmt::Write as _;

use super::config::ExperimentConfig;
use super::experiment::{
    compare_abstain, evaluate_model, extract_features, generate_fixture, run_experiment, train_model,
    ExperimentReport, Rule, TestMetrics,
};
use super::report::fmt6;
use crate::error::Result;

/// The tasks the command line exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Extract,
    Train,
    Eval,
    Run,
    Compare,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Synth,
        Command::Extract,
        Command::Train,
        Command::Eval,
        Command::Run,
        Command::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Extract => "extract",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Run => "run",
            Command::Compare => "compare",
        }
    }
}

/// Runs one task and returns a short human-readable summary.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<String> {
    let mut out = String::new();
    match command {
        Command::Synth => {
            let entries = generate_fixture(cfg)?;
            let _ = writeln!(out, "wrote {} trials to {}", entries.len(), cfg.manifest.display());
        }
        Command::Extract => {
            let path = extract_features(cfg)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        Command::Train => {
            let trained = train_model(cfg)?;
            let t: Vec<String> = trained.thresholds().as_slice().iter().map(|v| fmt6(*v)).collect();
            let _ = writeln!(out, "thresholds {}", t.join(" "));
            let _ = writeln!(out, "model itr {} bit/min", fmt6(trained.ascent.best_itr));
            let _ = writeln!(out, "wrote {}", cfg.model_dir().display());
        }
        Command::Eval => {
            let (abstain, forced) = evaluate_model(cfg)?;
            summary_line(&mut out, "abstain", &abstain);
            summary_line(&mut out, "forced", &forced);
        }
        Command::Run | Command::Compare => {
            let report = if command == Command::Run {
                run_experiment(cfg)?
            } else {
                compare_abstain(cfg)?
            };
            fold_summary(&mut out, &report);
        }
    }
    Ok(out)
}

fn summary_line(out: &mut String, label: &str, m: &TestMetrics) {
    let _ = writeln!(
        out,
        "{label}: accuracy {} p_made {} mdt {} s standard itr {} proposed itr {} bit/min",
        fmt6(m.accuracy),
        fmt6(m.p_made),
        fmt6(m.mdt_s),
        fmt6(m.standard_itr),
        fmt6(m.proposed_itr)
    );
}

fn fold_summary(out: &mut String, report: &ExperimentReport) {
    for f in &report.folds {
        summary_line(out, &format!("fold {} abstain", f.fold), &f.abstain);
    }
    for rule in Rule::ALL {
        summary_line(out, &format!("mean {}", rule.name()), &report.mean(rule));
    }
}
