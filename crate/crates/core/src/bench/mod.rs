//! Cross-validated benchmarking: splitters, the experiment runner, built-in suites and report output.

pub mod cv;
pub mod experiment;
pub mod report;
pub mod suites;

pub use cv::{kfold_split, stratified_kfold_split, Fold, StratifiedFolds};
pub use experiment::{
    prepare_fold, run_experiment, run_experiment_outcome, BenchmarkReport, Cell, CvSpec, DatasetSource,
    ExperimentOutcome, ExperimentSpec, FoldResult, ModelKind, ModelSpec,
};
pub use report::{emit_report, ReportFormat};
pub use suites::{builtin_suite, SUITE_NAMES};
