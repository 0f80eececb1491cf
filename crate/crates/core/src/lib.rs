//! Reconstruction of audible speech from multi-channel neural recordings.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`dsp`]: windows, STFT/ISTFT, mel filterbanks, analytic signal
//! * [`preprocess`]: zero-phase filtering, z-scoring, voice activity detection, alignment
//! * [`features`]: db4 wavelet pyramid, band energies, phase-amplitude coupling, prosody tracks
//! * [`model`]: autoencoder, prosody embedding, transformer encoder, linear baseline
//! * [`vocoder`]: mel inversion, Griffin-Lim and iterative harmonic phase reconstruction
//! * [`metrics`]: Pearson correlation, mel cepstral distortion, simplified STOI, HNR
//! * [`pipeline`]: synthetic data, file formats, configuration and cross-validation stages

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod vocoder;

pub use dsp::{ComplexSpectrogram, MelSpectrogram, StftConfig, Waveform};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, NormalizationStats};
pub use metrics::MetricReport;


pub use preprocess::MultiChannelRecording;
