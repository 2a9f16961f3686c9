//! The summarization models, their training loops and budgeted summary
//! generation.

pub mod nets;
pub mod summary;
pub mod train;

pub use nets::{
    quality_diversity_kernel, BaselineVariant, DppLstmModel, DppLstmSingle, MlpBaseline, Model, ModelConfig,
    ModelKind, VsLstmModel,
};
pub use summary::{summaries_checked, summarize_dpp, summarize_scores, summary_budget, Summary};
pub use train::{dpp_stage, train_model, TrainOptions, TrainReport, TrainingVideo};
