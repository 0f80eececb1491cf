use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{hann_window, Waveform};
use crate::{Error, Result};

/// Framing parameters of the short-time Fourier transform. The analysis
/// window is always a symmetric Hann window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Default for StftConfig {
    /// 50 ms / 10 ms framing at 16 kHz with a 1024-point FFT.
    fn default() -> Self {
        Self { window_len: 800, hop: 160, fft_size: 1024 }
    }
}

impl StftConfig {
    pub fn new(window_len: usize, hop: usize, fft_size: usize) -> Result<Self> {
        let cfg = Self { window_len, hop, fft_size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.hop == 0 {
            return Err(Error::invalid("stft window must be >= 2 samples and hop > 0"));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.window_len {
            return Err(Error::invalid(format!(
                "fft size {} must be a power of two >= window length {}",
                self.fft_size, self.window_len
            )));
        }
        if self.window_len % self.hop != 0 || self.window_len / self.hop < 2 {
            return Err(Error::invalid(format!(
                "hop {} must split window {} into >= 2 equal parts",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frame_count(&self, n: usize) -> usize {
        if n <= self.window_len {
            1
        } else {
            (n - self.window_len).div_ceil(self.hop) + 1
        }
    }

    /// Length of the signal spanned exactly by `frames` frames.
    pub fn span(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_len
        }
    }
}

/// Frames x bins complex STFT with the framing that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate_hz: u32,
    /// Length of the analysed signal; `istft` trims its output to this.
    pub signal_len: usize,
}

impl ComplexSpectrogram {
    /// Wraps synthesized STFT data; the signal length is the full frame span.
    pub fn new(data: Array2<Complex64>, config: StftConfig, sample_rate_hz: u32) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.bins() {
            return Err(Error::invalid(format!(
                "spectrogram has {} bins, config expects {}",
                data.ncols(),
                config.bins()
            )));
        }
        let signal_len = config.span(data.nrows());
        Ok(Self { data, config, sample_rate_hz, signal_len })
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    pub fn phase(&self) -> Array2<f64> {
        self.data.mapv(|c| super::wrap_phase(c.arg()))
    }
}

pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    stft_samples(&x.samples, x.sample_rate_hz, cfg)
}

pub(crate) fn stft_samples(x: &[f64], sample_rate_hz: u32, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    if x.len() < cfg.window_len {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than one {}-sample window",
            x.len(),
            cfg.window_len
        )));
    }
    let window = hann_window(cfg.window_len)?;
    let frames = cfg.frame_count(x.len());
    let bins = cfg.bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut data = Array2::<Complex64>::zeros((frames, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    for t in 0..frames {
        let start = t * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < cfg.window_len { x.get(start + i).copied().unwrap_or(0.0) * window[i] } else { 0.0 };
            *slot = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (f, v) in data.row_mut(t).iter_mut().enumerate() {
            *v = buf[f];
        }
    }
    Ok(ComplexSpectrogram { data, config: *cfg, sample_rate_hz, signal_len: x.len() })
}

/// Weighted overlap-add inverse using the analysis window for synthesis and
/// normalizing by the summed squared window. Samples where that sum vanishes
/// (the outermost edge samples) are set to zero.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = spec.config;
    cfg.validate()?;
    if spec.bins() != cfg.bins() {
        return Err(Error::invalid("spectrogram bin count does not match its config"));
    }
    let window = hann_window(cfg.window_len)?;
    let frames = spec.frames();
    let full_len = cfg.span(frames);
    let mut out = vec![0.0; full_len];
    let mut norm = vec![0.0; full_len];
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(cfg.fft_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let scale = 1.0 / cfg.fft_size as f64;
    let bins = cfg.bins();
    for t in 0..frames {
        let row = spec.data.row(t);
        buf[0] = Complex64::new(row[0].re, 0.0);
        for f in 1..bins - 1 {
            buf[f] = row[f];
            buf[cfg.fft_size - f] = row[f].conj();
        }
        buf[bins - 1] = Complex64::new(row[bins - 1].re, 0.0);
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for i in 0..cfg.window_len {
            out[start + i] += buf[i].re * scale * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (o, n) in out.iter_mut().zip(&norm) {
        *o = if *n > 1e-12 { *o / n } else { 0.0 };
    }
    out.resize(spec.signal_len, 0.0);
    Waveform::new(out, spec.sample_rate_hz)
}
