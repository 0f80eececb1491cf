//! End-to-end orchestration: synthetic data with known ground truth, the
//! artifact formats, configuration, and the cross-validated stages.

mod checkpoint;
mod config;
mod folds;
mod stages;
mod store;
mod synth;
mod tensor;
mod wav;

pub use checkpoint::{CheckpointManifest, FoldModel, TensorEntry};
pub use config::{ModelConfig, PipelineConfig, PreprocessConfig, SyntheticSpec};
pub use folds::FoldAssignment;
pub use stages::{score_trial, trial_name, DataManifest, FoldSummary, Pipeline, PreprocessReport, VocodeSummary, MODELS, VOCODERS};
pub use store::Store;
pub use synth::{expected_pac, generate_trial, Articulation, SyntheticTrial, TrialMetadata};
pub use tensor::{decode_tensor, encode_tensor, read_tensor, write_tensor, DTYPE_F32, MAGIC, VERSION};
pub use wav::{read_wav, write_wav};
