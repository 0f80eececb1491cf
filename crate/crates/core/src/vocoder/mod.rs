//! Waveform synthesis from magnitude or mel spectrograms: mel inversion,
//! Griffin-Lim, and iterative harmonic phase reconstruction, which refines
//! Griffin-Lim phases at the harmonics of a per-frame F0 track.

mod config;
mod griffin_lim;
mod grid;
mod ihpr;
mod mel_inverse;

pub use config::{FrequencyWeighting, VocoderConfig};
pub use griffin_lim::{griffin_lim, griffin_lim_iterations, spectral_convergence, GriffinLimOutput};
pub use grid::{HarmonicGrid, PhaseState};
pub use ihpr::{
    bootstrap_f0, circular_mean, ihpr_harmonic_update, ihpr_smooth, ihpr_vocode, perceptual_loss, perceptual_loss_terms,
    IhprOutput,
};
pub use mel_inverse::mel_to_magnitude;
