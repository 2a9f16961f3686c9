//! Overlap metrics and the experiment harness.

pub mod experiment;
pub mod metrics;
pub mod report;
pub mod split;

pub use experiment::{
    evaluate_model, fit_transforms, mean_std, random_baseline, run_experiment, ExperimentConfig,
    ExperimentReport, RunResult, TestSummary, VideoScore,
};
pub use metrics::{eval_multi_user, overlap_prf, Aggregation, EvalReport, Prf};
pub use split::{Setting, SplitSpec, VideoRef};
