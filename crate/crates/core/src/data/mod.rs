//! Datasets on disk, checkpoints, frame-rate subsampling, training-target
//! preparation and the synthetic teacher-labelled corpus.

pub mod checkpoint;
pub mod features;
pub mod io;
pub mod prepare;
pub mod records;
pub mod subsample;
pub mod synth;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointInfo, ModelCheckpoint};
pub use features::{read_features, write_features};
pub use io::write_atomic;
pub use prepare::{consensus_keyframes, prepare_video, segment_record, PrepareOptions};
pub use records::{
    load_dataset, read_annotation, write_annotation, write_dataset, AnnotationTrack, Dataset,
    DatasetManifest, VideoRecord,
};
pub use subsample::subsample;
pub use synth::{generate_synthetic, synthetic_teacher, SyntheticConfig, SyntheticCorpus};
