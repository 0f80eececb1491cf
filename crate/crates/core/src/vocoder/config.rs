use std::f64::consts::PI;

use crate::dsp::StftConfig;
use crate::error::{Error, Result};

/// Raised-cosine frequency emphasis: weight 1 inside the band and tapering
/// to `edge_weight` at 0 Hz and at Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyWeighting {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub edge_weight: f64,
}

impl Default for FrequencyWeighting {
    fn default() -> Self {
        Self { band_lo_hz: 300.0, band_hi_hz: 3400.0, edge_weight: 0.5 }
    }
}

impl FrequencyWeighting {
    pub fn weight(&self, f_hz: f64, nyquist_hz: f64) -> f64 {
        let taper = |u: f64| self.edge_weight + (1.0 - self.edge_weight) * 0.5 * (1.0 - (PI * u.clamp(0.0, 1.0)).cos());
        if f_hz < self.band_lo_hz {
            taper(f_hz / self.band_lo_hz)
        } else if f_hz > self.band_hi_hz {
            taper((nyquist_hz - f_hz) / (nyquist_hz - self.band_hi_hz))
        } else {
            1.0
        }
    }

    /// Weight of every one-sided STFT bin.
    pub fn bin_weights(&self, stft: &StftConfig, sample_rate_hz: u32) -> Vec<f64> {
        let fs = f64::from(sample_rate_hz);
        (0..stft.bins()).map(|k| self.weight(k as f64 * fs / stft.fft_size as f64, fs / 2.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocoderConfig {
    pub stft: StftConfig,
    pub sample_rate_hz: u32,
    pub gl_iterations: usize,
    pub ihpr_iterations: usize,
    /// Griffin-Lim iterations run before harmonic refinement starts.
    pub warmup_iterations: usize,
    pub max_harmonics: usize,
    /// Phase-gradient smoothing step.
    pub lambda: f64,
    /// Phase-stability weight; also shrinks per-harmonic phase deviations.
    pub gamma: f64,
    pub weighting: FrequencyWeighting,
    /// Stop when the relative change of the refinement loss drops below this.
    pub convergence_tol: f64,
}

impl Default for VocoderConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            sample_rate_hz: 16000,
            gl_iterations: 60,
            ihpr_iterations: 32,
            warmup_iterations: 8,
            max_harmonics: 20,
            lambda: 0.1,
            gamma: 0.01,
            weighting: FrequencyWeighting::default(),
            convergence_tol: 1e-4,
        }
    }
}

impl VocoderConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.sample_rate_hz == 0 || self.max_harmonics == 0 {
            return Err(Error::Config("sample rate and harmonic cap must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("need lambda >= 0 and gamma in [0, 1], got {} and {}", self.lambda, self.gamma)));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence tolerance must be non-negative".into()));
        }
        let w = &self.weighting;
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        if !(0.0 < w.band_lo_hz && w.band_lo_hz < w.band_hi_hz && w.band_hi_hz < nyquist && w.edge_weight >= 0.0) {
            return Err(Error::Config("frequency weighting band must satisfy 0 < lo < hi < Nyquist".into()));
        }
        Ok(())
    }
}
