//! Signal primitives shared by every stage: windows, STFT/ISTFT, mel
//! filterbanks, the analytic signal and the common 100 Hz frame grid.

mod framing;
mod hilbert;
mod mel;
pub(crate) mod stft;
mod window;

pub use framing::FrameGrid;
pub use hilbert::{analytic_signal, unwrap_phase, wrap_phase, AnalyticSignal};
pub use mel::{hz_to_mel, mel_centers_hz, mel_filterbank, mel_spectrogram, mel_to_hz, MelConfig, MelScale, MelSpectrogram, LOG_FLOOR};
pub use stft::{istft, stft, ComplexSpectrogram, StftConfig};
pub use window::hann_window;

use crate::{Error, Result};

/// A mono signal with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("waveform contains non-finite samples"));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}
