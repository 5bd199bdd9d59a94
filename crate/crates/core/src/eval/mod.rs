//! Cross-validated experiments: feature extraction over trials, per-fold
//! training and held-out scoring, and the files they produce.

mod command;
mod config;
mod experiment;
mod report;

pub use command::{execute, Command};
pub use config::{ExperimentConfig, SynthConfig};
pub use experiment::{
    assign_folds, compare_abstain, cross_validate, evaluate, evaluate_model, extract_dataset, extract_features,
    generate_fixture, run_experiment, train, train_model, write_report, Dataset, ExperimentReport, FoldReport,
    Rule, TestMetrics, TrainedModel,
};
pub use report::{fmt6, load_thresholds, save_thresholds};
