//! Experiment configuration, orchestration and output files.

mod config;
mod run;

pub use config::{
    parse_config, ConfigErrors, ConfigIssue, ExperimentConfig, ProblemKind, ProblemSpec, TargetSpec,
};
pub use run::{
    aggregate_series, build_problem, read_trace_csv, run_experiment, run_trial, trace_metric,
    trial_csv_path, trial_stream, EncodingResult, ExperimentReport, TrialOutcome, AGGREGATE_STATS,
    TRACE_HEADER,
};
