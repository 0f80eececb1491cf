use super::MultiChannelRecording;
use crate::dsp::{FrameGrid, Waveform};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// Neural samples by which the neural stream leads the audio.
    pub lag_samples_neural: i64,
    pub lag_ms: f64,
    pub correlation_peak: f64,
}

/// RMS of each 50 ms frame on the shared 100 Hz grid.
pub fn rms_envelope(x: &[f64], fs: u32) -> Vec<f64> {
    let grid = FrameGrid::default();
    let len = grid.frame_len(fs);
    (0..grid.frame_count(x.len(), fs))
        .map(|t| {
            let s = grid.start(t, fs);
            let e = x.len().min(s + len);
            (x[s.min(e)..e].iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt()
        })
        .collect()
}

fn pearson_slices(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Normalized cross-correlation `corr(a[t], b[t + lag])` over `|lag| <= max_lag`.
/// Returns the best lag (in frames) and its correlation.
pub fn envelope_xcorr(a: &[f64], b: &[f64], max_lag: usize) -> Result<(i64, f64)> {
    let n = a.len().min(b.len());
    let max_lag = max_lag.min(n.saturating_sub(2) / 2) as i64;
    let mut best: Option<(i64, f64)> = None;
    for lag in -max_lag..=max_lag {
        let (sa, sb) = if lag >= 0 { (0, lag as usize) } else { ((-lag) as usize, 0) };
        let len = n - lag.unsigned_abs() as usize;
        if let Some(r) = pearson_slices(&a[sa..sa + len], &b[sb..sb + len]) {
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((lag, r));
            }
        }
    }
    best.ok_or_else(|| Error::AlignmentUndefined("envelopes are constant at every lag".into()))
}

/// Estimates the lag between the neural recording and the audio from the
/// cross-correlation of their RMS envelopes on the 100 Hz frame grid. The
/// neural envelope is the channel average of per-channel RMS.
pub fn align(neural: &MultiChannelRecording, audio: &Waveform, max_lag_ms: f64) -> Result<AlignmentResult> {
    let nfs = neural.sample_rate_hz;
    if neural.samples_per_channel() < 2 * nfs as usize || audio.len() < 2 * audio.sample_rate_hz as usize {
        return Err(Error::invalid("alignment needs at least 2 s of neural and audio signal"));
    }
    let audio_env = rms_envelope(&audio.samples, audio.sample_rate_hz);
    let mut neural_env = vec![0.0; audio_env.len()];
    let mut count = 0usize;
    for row in neural.data.rows() {
        let env = rms_envelope(&row.to_vec(), nfs);
        for (acc, v) in neural_env.iter_mut().zip(&env) {
            *acc += v;
        }
        count += 1;
        if env.len() < neural_env.len() {
            neural_env.truncate(env.len());
        }
    }
    neural_env.iter_mut().for_each(|v| *v /= count as f64);
    let grid = FrameGrid::default();
    let max_lag = (max_lag_ms * f64::from(grid.rate_hz) / 1000.0).round() as usize;
    let (lag_frames, peak) = envelope_xcorr(&audio_env, &neural_env, max_lag)?;
    // A positive frame lag means the neural envelope trails the audio.
    let lead_sec = -(lag_frames as f64) / f64::from(grid.rate_hz);
    Ok(AlignmentResult {
        lag_samples_neural: (lead_sec * f64::from(nfs)).round() as i64,
        lag_ms: lead_sec * 1000.0,
        correlation_peak: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Slowly varying positive envelope sampled at `fs`, generated at 100 Hz and held.
    fn slow_envelope(secs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let frames = (secs * 100.0) as usize + 100;
        let mut v: f64 = 0.0;
        let mut raw = Vec::with_capacity(frames);
        for _ in 0..frames {
            v = 0.95 * v + rng.random_range(-1.0..1.0);
            raw.push(v);
        }
        raw.iter().map(|x| (0.6 * x).exp()).collect()
    }

    fn modulated_noise(env: &[f64], fs: u32, secs: f64, delay_s: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = (secs * f64::from(fs)) as usize;
        (0..n)
            .map(|i| {
                let t = i as f64 / f64::from(fs) - delay_s;
                let idx = ((t * 100.0).floor().max(0.0) as usize).min(env.len() - 1);
                env[idx] * rng.random_range(-1.0..1.0)
            })
            .collect()
    }

    fn neural_from(env: &[f64], secs: f64, delay_s: f64, rng: &mut ChaCha8Rng) -> MultiChannelRecording {
        let channels = 8;
        let n = (secs * 1024.0) as usize;
        let mut data = Array2::zeros((channels, n));
        for c in 0..channels {
            let x = modulated_noise(env, 1024, secs, delay_s, rng);
            data.row_mut(c).iter_mut().zip(x).for_each(|(d, v)| *d = v);
        }
        MultiChannelRecording::with_default_labels(data, 1024).unwrap()
    }

    #[test]
    fn identical_envelopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let env = slow_envelope(10.0, &mut rng);
        let (lag, peak) = envelope_xcorr(&env, &env, 50).unwrap();
        assert_eq!(lag, 0);
        assert!((peak - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn recovers_shift_of_envelopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let env = slow_envelope(20.0, &mut rng);
        for k in [-37i64, -5, 0, 12, 49] {
            let b: Vec<f64> = (0..env.len() as i64).map(|t| env[(t - k).clamp(0, env.len() as i64 - 1) as usize]).collect();
            let (lag, _) = envelope_xcorr(&env, &b, 50).unwrap();
            assert!((lag - k).abs() <= 1, "k={k} lag={lag}");
        }
    }

    #[test]
    fn delayed_neural_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let secs = 20.0;
        let env = slow_envelope(secs, &mut rng);
        let audio = Waveform::new(modulated_noise(&env, 16000, secs, 0.0, &mut rng), 16000).unwrap();
        let neural = neural_from(&env, secs, 0.2, &mut rng);
        let res = align(&neural, &audio, 500.0).unwrap();
        assert!((res.lag_ms + 200.0).abs() <= 10.0, "{res:?}");
        assert!(res.correlation_peak >= 0.95, "{res:?}");
        assert!((res.lag_samples_neural + 205).abs() <= 11);
    }

    #[test]
    fn independent_envelopes_do_not_correlate() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let a: Vec<f64> = rms_envelope(&(0..16000 * 60).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), 16000);
            let b: Vec<f64> = rms_envelope(&(0..1024 * 60).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), 1024);
            let (_, peak) = envelope_xcorr(&a, &b, 50).unwrap();
            assert!(peak.abs() <= 0.2, "seed {seed}: {peak}");
        }
    }

    #[test]
    fn constant_envelopes_are_undefined() {
        let neural = MultiChannelRecording::with_default_labels(Array2::from_elem((2, 3072), 1.0), 1024).unwrap();
        let audio = Waveform::new(vec![0.5; 48000], 16000).unwrap();
        assert!(matches!(align(&neural, &audio, 500.0), Err(Error::AlignmentUndefined(_))));
    }
}
