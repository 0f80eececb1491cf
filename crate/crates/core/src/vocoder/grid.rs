use ndarray::Array2;

use crate::dsp::StftConfig;
use crate::error::{Error, Result};

/// Phase estimate of one refinement iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    /// Frames x bins, wrapped to (-pi, pi].
    pub phase: Array2<f64>,
    pub iteration: usize,
    pub loss: f64,
}

/// STFT bins of the harmonics `h * f0` of every frame. Unvoiced frames
/// (f0 <= 0) have no harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicGrid {
    pub f0_hz: Vec<f64>,
    pub bins: Vec<Vec<usize>>,
}

impl HarmonicGrid {
    /// Uses every harmonic strictly below Nyquist, at most `max_harmonics`.
    pub fn new(f0_hz: &[f64], max_harmonics: usize, stft: &StftConfig, sample_rate_hz: u32) -> Result<Self> {
        let fs = f64::from(sample_rate_hz);
        if fs <= 0.0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let bins = f0_hz
            .iter()
            .map(|&f0| {
                if !(f0 > 0.0 && f0.is_finite()) {
                    return Vec::new();
                }
                let mut out: Vec<usize> = Vec::new();
                for h in 1..=max_harmonics {
                    let f = h as f64 * f0;
                    if f >= fs / 2.0 {
                        break;
                    }
                    let b = ((f * stft.fft_size as f64 / fs).round() as usize).min(stft.bins() - 1);
                    if out.last().is_none_or(|&last| b > last) {
                        out.push(b);
                    }
                }
                out
            })
            .collect();
        Ok(Self { f0_hz: f0_hz.to_vec(), bins })
    }

    /// A grid with no harmonics in any of `frames` frames.
    pub fn unvoiced(frames: usize) -> Self {
        Self { f0_hz: vec![0.0; frames], bins: vec![Vec::new(); frames] }
    }

    pub fn frames(&self) -> usize {
        self.bins.len()
    }

    pub fn is_voiced(&self, t: usize) -> bool {
        !self.bins[t].is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_follow_harmonics() {
        let g = HarmonicGrid::new(&[150.0, 0.0, 1000.0], 20, &StftConfig::default(), 16000).unwrap();
        assert_eq!(g.bins[0].len(), 20);
        assert_eq!(g.bins[0][0], (150.0f64 * 1024.0 / 16000.0).round() as usize);
        assert!(g.bins[1].is_empty());
        // 7 * 1000 < 8000 but 8 * 1000 is not below Nyquist.
        assert_eq!(g.bins[2].len(), 7);
        for b in &g.bins {
            assert!(b.windows(2).all(|w| w[1] > w[0]));
            assert!(b.iter().all(|&k| k < 513));
        }
    }
}
