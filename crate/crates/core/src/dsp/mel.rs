use ndarray::Array2;

use super::{stft, StftConfig, Waveform};
use crate::{Error, Result};

/// Floor added before taking the natural log of mel power.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub mel_bins: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { mel_bins: 40, fmin_hz: 50.0, fmax_hz: 7600.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelScale {
    /// Linear power, every entry >= 0.
    Power,
    /// Natural log of power plus [`LOG_FLOOR`].
    LogPower,
}

/// Frames x mel-bins spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub data: Array2<f64>,
    pub scale: MelScale,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub sample_rate_hz: u32,
}

impl MelSpectrogram {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn mel_bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn to_log(&self) -> MelSpectrogram {
        match self.scale {
            MelScale::LogPower => self.clone(),
            MelScale::Power => MelSpectrogram {
                data: self.data.mapv(|v| (v + LOG_FLOOR).ln()),
                scale: MelScale::LogPower,
                ..*self
            },
        }
    }

    pub fn to_power(&self) -> MelSpectrogram {
        match self.scale {
            MelScale::Power => self.clone(),
            MelScale::LogPower => MelSpectrogram {
                data: self.data.mapv(|v| (v.exp() - LOG_FLOOR).max(0.0)),
                scale: MelScale::Power,
                ..*self
            },
        }
    }
}

/// Center frequencies (Hz) of the `mel_bins` triangular filters.
pub fn mel_centers_hz(cfg: &MelConfig) -> Vec<f64> {
    mel_edges_hz(cfg)[1..=cfg.mel_bins].to_vec()
}

fn mel_edges_hz(cfg: &MelConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin_hz);
    let hi = hz_to_mel(cfg.fmax_hz);
    let step = (hi - lo) / (cfg.mel_bins + 1) as f64;
    (0..cfg.mel_bins + 2).map(|i| mel_to_hz(lo + step * i as f64)).collect()
}

/// Triangular filters equally spaced on the mel scale, `mel_bins x (fft_size/2+1)`,
/// unit peak height.
pub fn mel_filterbank(sample_rate_hz: u32, fft_size: usize, cfg: &MelConfig) -> Result<Array2<f64>> {
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    if !(cfg.fmin_hz >= 0.0 && cfg.fmin_hz < cfg.fmax_hz && cfg.fmax_hz <= nyquist) {
        return Err(Error::invalid(format!(
            "mel range [{}, {}] must satisfy 0 <= fmin < fmax <= {nyquist}",
            cfg.fmin_hz, cfg.fmax_hz
        )));
    }
    if cfg.mel_bins < 2 || fft_size < 2 {
        return Err(Error::invalid("need at least 2 mel bins and fft size >= 2"));
    }
    let bins = fft_size / 2 + 1;
    let bin_hz = f64::from(sample_rate_hz) / fft_size as f64;
    let edges = mel_edges_hz(cfg);
    let mut fb = Array2::<f64>::zeros((cfg.mel_bins, bins));
    for b in 0..cfg.mel_bins {
        let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
        for f in 0..bins {
            let hz = f as f64 * bin_hz;
            let w = if hz > left && hz <= center {
                (hz - left) / (center - left)
            } else if hz > center && hz < right {
                (right - hz) / (right - center)
            } else {
                0.0
            };
            fb[[b, f]] = w;
        }
        if fb.row(b).sum() <= 0.0 {
            return Err(Error::invalid(format!(
                "mel filter {b} covers no FFT bin; use fewer mel bins or a larger FFT"
            )));
        }
    }
    Ok(fb)
}

/// Mel power spectrogram `filterbank x |STFT|^2`, optionally log-compressed.
pub fn mel_spectrogram(x: &Waveform, stft_cfg: &StftConfig, mel_cfg: &MelConfig, scale: MelScale) -> Result<MelSpectrogram> {
    let spec = stft(x, stft_cfg)?;
    let fb = mel_filterbank(x.sample_rate_hz, stft_cfg.fft_size, mel_cfg)?;
    let power = spec.data.mapv(|c| c.norm_sqr());
    let mel = power.dot(&fb.t());
    let out = MelSpectrogram {
        data: mel,
        scale: MelScale::Power,
        fmin_hz: mel_cfg.fmin_hz,
        fmax_hz: mel_cfg.fmax_hz,
        sample_rate_hz: x.sample_rate_hz,
    };
    Ok(match scale {
        MelScale::Power => out,
        MelScale::LogPower => out.to_log(),
    })
}
