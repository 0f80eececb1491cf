//! Neural feature extraction: db4 wavelet pyramid and band energies,
//! phase-amplitude coupling, prosody tracks, normalization and the framed
//! feature matrix.

mod bands;
mod matrix;
mod normalize;
mod pac;
mod pitch;
mod prosody;
mod wavelet;

pub use bands::{
    band_energy, coefficient_energy, level_range_hz, prosody_embedding_inputs, BandAssignment, ProsodyInputs, BETA,
    HIGH_GAMMA, NAMED_BANDS, THETA,
};
pub use matrix::{extract_features, FeatureConfig, FeatureMatrix, FeatureSet};
pub use normalize::{normalize_features, NormalizationStats};
pub use pac::{pac, pac_bands, pac_broadband, GAMMA_BAND, THETA_BAND};
pub use pitch::{f0_estimate, frame_f0, PitchParams};
pub use prosody::{prosody_track, ProsodyFrame};
pub use wavelet::{dwt_decompose, dwt_reconstruct, pad_to_block, Boundary, Wavelet, WaveletPyramid, DB4_LOWPASS};
