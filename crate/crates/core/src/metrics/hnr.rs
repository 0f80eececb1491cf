use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::{FrameGrid, Waveform};
use crate::error::{Error, Result};

pub const HNR_CAP_DB: f64 = 60.0;
const NOISE_FLOOR: f64 = 1e-12;

/// Per-frame harmonic/noise power split of a waveform guided by an F0 track
/// on the shared 100 Hz frame grid.
///
/// Each frame is windowed with a periodic Hann window and transformed with
/// an FFT of the frame length, so the bin spacing is the frame rate's
/// reciprocal of the frame duration (20 Hz for 50 ms frames). Harmonic power
/// is the power within one bin of every `h * f0` below Nyquist, noise power
/// is the remainder of the one-sided spectrum.
pub fn hnr_frames(x: &Waveform, f0_track: &[f64]) -> Vec<Option<f64>> {
    let fs = x.sample_rate_hz;
    let grid = FrameGrid::default();
    let n = grid.frame_len(fs);
    let frames = grid.frame_count(x.len(), fs).min(f0_track.len());
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let bin_hz = f64::from(fs) / n as f64;
    let nyquist = f64::from(fs) / 2.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    (0..frames)
        .map(|t| {
            let f0 = f0_track[t];
            if !(f0 > 0.0) {
                return None;
            }
            let frame = grid.frame(&x.samples, t, fs);
            for ((b, s), w) in buf.iter_mut().zip(&frame).zip(&window) {
                *b = Complex64::new(s * w, 0.0);
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
            let mut harmonic_bin = vec![false; bins];
            let mut h = 1.0;
            while h * f0 < nyquist {
                let k = (h * f0 / bin_hz).round() as usize;
                harmonic_bin[k.saturating_sub(1)..=(k + 1).min(bins - 1)].fill(true);
                h += 1.0;
            }
            let total: f64 = power.iter().sum();
            let p_h: f64 = power.iter().zip(&harmonic_bin).filter(|(_, &m)| m).map(|(p, _)| p).sum();
            if !(p_h > 0.0) {
                return None;
            }
            let p_n = (total - p_h).max(0.0);
            Some((10.0 * (p_h / p_n.max(NOISE_FLOOR)).log10()).min(HNR_CAP_DB))
        })
        .collect()
}

/// Mean harmonic-to-noise ratio in dB over voiced frames, capped at 60 dB.
pub fn hnr(x: &Waveform, f0_track: &[f64]) -> Result<f64> {
    let scores: Vec<f64> = hnr_frames(x, f0_track).into_iter().flatten().collect();
    if scores.is_empty() {
        return Err(Error::HnrUndefined);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const FS: u32 = 16000;

    fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(FS)).sin()).collect()
    }

    fn noise(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z }).collect()
    }

    fn wave(s: Vec<f64>) -> Waveform {
        Waveform::new(s, FS).unwrap()
    }

    /// Fraction of the 401 one-sided bins covered by the +-1 bin comb at `f0`.
    fn comb_fraction(f0: f64) -> f64 {
        let mut covered = vec![false; 401];
        let mut h = 1.0;
        while h * f0 < 8000.0 {
            let k = (h * f0 / 20.0).round() as usize;
            covered[k.saturating_sub(1)..=(k + 1).min(400)].fill(true);
            h += 1.0;
        }
        covered.iter().filter(|&&c| c).count() as f64 / 401.0
    }

    #[test]
    fn pure_sine_is_harmonic() {
        let x = wave(sine(200.0, 1.0, 16000));
        assert!(hnr(&x, &vec![200.0; 100]).unwrap() >= 40.0);
    }

    #[test]
    fn ten_to_one_mixture() {
        // Sine power A^2/2 against white noise of variance s2; the comb also
        // captures a fraction rho of the noise, so the measured ratio is
        // (A^2/2 + rho*s2) / ((1 - rho)*s2). Solve for s2 giving 10.
        let rho = comb_fraction(200.0);
        let sine_power = 0.5;
        let s2 = sine_power / (10.0 - 11.0 * rho);
        let n = 32000;
        let mix: Vec<f64> = sine(200.0, 1.0, n).iter().zip(noise(s2.sqrt(), n, 3)).map(|(a, b)| a + b).collect();
        let v = hnr(&wave(mix), &vec![200.0; 200]).unwrap();
        assert!((v - 10.0).abs() <= 1.0, "{v}");
    }

    #[test]
    fn noise_with_fake_f0_is_low() {
        for f0 in [100.0, 200.0, 310.0] {
            let v = hnr(&wave(noise(1.0, 16000, 7)), &vec![f0; 100]).unwrap();
            let expected = 10.0 * (comb_fraction(f0) / (1.0 - comb_fraction(f0))).log10();
            assert!(v <= 3.0, "{f0}: {v}");
            assert!((v - expected).abs() < 1.0, "{f0}: {v} vs {expected}");
        }
    }

    #[test]
    fn monotone_in_noise_level() {
        let n = 16000;
        let clean = sine(200.0, 1.0, n);
        let values: Vec<f64> = [1.0, 0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&s| {
                let mix = clean.iter().zip(noise(s, n, 11)).map(|(a, b)| a + b).collect();
                hnr(&wave(mix), &vec![200.0; 100]).unwrap()
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    }

    #[test]
    fn unvoiced_track_is_undefined() {
        let x = wave(sine(200.0, 1.0, 16000));
        assert!(matches!(hnr(&x, &vec![0.0; 100]), Err(Error::HnrUndefined)));
        assert!(matches!(hnr(&wave(vec![0.0; 16000]), &vec![200.0; 100]), Err(Error::HnrUndefined)));
    }
}
