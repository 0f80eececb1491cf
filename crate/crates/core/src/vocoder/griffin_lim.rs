use ndarray::Array2;
use num_complex::Complex64;

use super::VocoderConfig;
use crate::dsp::stft::stft_samples;
use crate::dsp::{istft, ComplexSpectrogram, Waveform};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GriffinLimOutput {
    pub waveform: Waveform,
    /// Spectral convergence after 0, 1, ..., n iterations.
    pub spectral_convergence: Vec<f64>,
}

/// `|| |S| - M ||_F / || M ||_F`, or 0 for an all-zero target.
pub fn spectral_convergence(magnitude: &Array2<f64>, spec: &Array2<Complex64>) -> f64 {
    let target: f64 = magnitude.iter().map(|m| m * m).sum::<f64>().sqrt();
    if target == 0.0 {
        return 0.0;
    }
    let diff: f64 = magnitude.iter().zip(spec.iter()).map(|(m, s)| (s.norm() - m).powi(2)).sum::<f64>().sqrt();
    diff / target
}

pub(crate) fn with_phase(magnitude: &Array2<f64>, phase: &Array2<f64>) -> Array2<Complex64> {
    let mut out = Array2::zeros(magnitude.raw_dim());
    ndarray::Zip::from(&mut out).and(magnitude).and(phase).for_each(|o, &m, &p| *o = Complex64::from_polar(m, p));
    out
}

pub(crate) fn raw_phase(spec: &Array2<Complex64>) -> Array2<f64> {
    spec.mapv(|c| c.arg())
}

/// Inverse STFT followed by a fresh STFT of the result: the projection onto
/// consistent spectrograms.
pub(crate) fn project(data: Array2<Complex64>, cfg: &VocoderConfig) -> Result<(Waveform, Array2<Complex64>)> {
    let spec = ComplexSpectrogram::new(data, cfg.stft, cfg.sample_rate_hz)?;
    let x = istft(&spec)?;
    let s = stft_samples(&x.samples, x.sample_rate_hz, &cfg.stft)?.data;
    Ok((x, s))
}

pub(crate) fn check_magnitude(magnitude: &Array2<f64>, cfg: &VocoderConfig) -> Result<()> {
    cfg.validate()?;
    if magnitude.ncols() != cfg.stft.bins() {
        return Err(Error::invalid(format!("magnitude has {} bins, expected {}", magnitude.ncols(), cfg.stft.bins())));
    }
    if magnitude.nrows() == 0 {
        return Err(Error::invalid("magnitude has no frames"));
    }
    if magnitude.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::invalid("magnitude must be finite and non-negative"));
    }
    Ok(())
}

/// Griffin-Lim with `cfg.gl_iterations` iterations.
pub fn griffin_lim(magnitude: &Array2<f64>, cfg: &VocoderConfig) -> Result<GriffinLimOutput> {
    griffin_lim_iterations(magnitude, cfg, cfg.gl_iterations)
}

/// Griffin-Lim from a zero-phase start: alternately impose the target
/// magnitude and project onto consistent spectrograms.
pub fn griffin_lim_iterations(magnitude: &Array2<f64>, cfg: &VocoderConfig, iterations: usize) -> Result<GriffinLimOutput> {
    let (waveform, spec, spectral_convergence) = run_griffin_lim(magnitude, cfg, iterations)?;
    drop(spec);
    Ok(GriffinLimOutput { waveform, spectral_convergence })
}

pub(crate) fn run_griffin_lim(
    magnitude: &Array2<f64>,
    cfg: &VocoderConfig,
    iterations: usize,
) -> Result<(Waveform, Array2<Complex64>, Vec<f64>)> {
    check_magnitude(magnitude, cfg)?;
    let (mut x, mut s) = project(with_phase(magnitude, &Array2::zeros(magnitude.raw_dim())), cfg)?;
    let mut sc = vec![spectral_convergence(magnitude, &s)];
    for _ in 0..iterations {
        (x, s) = project(with_phase(magnitude, &raw_phase(&s)), cfg)?;
        sc.push(spectral_convergence(magnitude, &s));
    }
    Ok((x, s, sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft;
    use std::f64::consts::PI;

    fn vowel(f0: f64, seconds: f64) -> Waveform {
        let fs = 16000.0;
        let n = (seconds * fs) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (1..=5).map(|h| (2.0 * PI * h as f64 * f0 * t + 0.3 * h as f64).sin() / h as f64).sum::<f64>()
            })
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn converges_on_a_vowel() {
        let cfg = VocoderConfig::default();
        let mag = stft(&vowel(150.0, 0.5), &cfg.stft).unwrap().magnitude();
        let out = griffin_lim(&mag, &cfg).unwrap();
        let sc = &out.spectral_convergence;
        assert_eq!(sc.len(), 61);
        assert!(sc[60] <= 0.5 * sc[1], "{} vs {}", sc[60], sc[1]);
        for w in sc.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert_eq!(out.waveform.len(), cfg.stft.span(mag.nrows()));
    }

    #[test]
    fn zero_magnitude_gives_silence() {
        let cfg = VocoderConfig::default();
        let out = griffin_lim_iterations(&Array2::zeros((10, 513)), &cfg, 3).unwrap();
        assert!(out.waveform.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_magnitude() {
        let cfg = VocoderConfig::default();
        assert!(griffin_lim(&Array2::zeros((4, 512)), &cfg).is_err());
        assert!(griffin_lim(&Array2::from_elem((4, 513), -1.0), &cfg).is_err());
    }
}
