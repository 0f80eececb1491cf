use crate::dsp::FrameGrid;

/// Pitch search range and voicing threshold for [`f0_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchParams {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Frames whose best normalized autocorrelation falls below this are unvoiced.
    pub voicing_threshold: f64,
    /// The chosen lag is the shortest local maximum within this fraction of the best peak.
    pub octave_tolerance: f64,
}

impl Default for PitchParams {
    fn default() -> Self {
        Self { fmin_hz: 60.0, fmax_hz: 400.0, voicing_threshold: 0.3, octave_tolerance: 0.9 }
    }
}

fn normalized_autocorr(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        ab += u * v;
        aa += u * u;
        bb += v * v;
    }
    if aa <= 0.0 || bb <= 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// F0 of one frame in Hz, or 0 when unvoiced.
pub fn frame_f0(frame: &[f64], fs: f64, params: &PitchParams) -> f64 {
    let mean = frame.iter().sum::<f64>() / frame.len().max(1) as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let lag_min = ((fs / params.fmax_hz).floor() as usize).max(2);
    let lag_max = ((fs / params.fmin_hz).ceil() as usize).min(x.len().saturating_sub(2));
    if lag_max <= lag_min {
        return 0.0;
    }
    let r: Vec<f64> = (lag_min - 1..=lag_max + 1).map(|lag| normalized_autocorr(&x, lag)).collect();
    // r[i] holds lag (lag_min - 1 + i)
    let best = r[1..r.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(best >= params.voicing_threshold) {
        return 0.0;
    }
    let pick = (1..r.len() - 1)
        .find(|&i| r[i] >= params.octave_tolerance * best && r[i] >= r[i - 1] && r[i] >= r[i + 1])
        .unwrap_or_else(|| (1..r.len() - 1).max_by(|&a, &b| r[a].total_cmp(&r[b])).expect("non-empty"));
    let (y0, y1, y2) = (r[pick - 1], r[pick], r[pick + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let delta = if denom.abs() > 1e-12 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let lag = (lag_min - 1 + pick) as f64 + delta;
    (fs / lag).clamp(params.fmin_hz, params.fmax_hz)
}

/// Per-frame F0 on the shared 50 ms / 10 ms grid via normalized
/// autocorrelation with parabolic peak interpolation. 0 marks unvoiced frames.
pub fn f0_estimate(x: &[f64], fs: u32, params: &PitchParams) -> Vec<f64> {
    let grid = FrameGrid::default();
    (0..grid.frame_count(x.len(), fs))
        .map(|t| frame_f0(&grid.frame(x, t, fs), f64::from(fs), params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sine(freq: f64, secs: f64, amp: f64) -> Vec<f64> {
        (0..(16000.0 * secs) as usize).map(|i| amp * (2.0 * PI * freq * i as f64 / 16000.0).sin()).collect()
    }

    #[test]
    fn sine_at_220() {
        let f0 = f0_estimate(&sine(220.0, 1.0, 0.5), 16000, &PitchParams::default());
        for v in &f0[..f0.len() - 1] {
            assert!((v - 220.0).abs() <= 2.0, "{v}");
        }
    }

    #[test]
    fn harmonic_complex_reports_fundamental() {
        let x: Vec<f64> = (0..16000)
            .map(|i| (1..=8).map(|h| (2.0 * PI * 130.0 * h as f64 * i as f64 / 16000.0).sin() / h as f64).sum())
            .collect();
        let f0 = f0_estimate(&x, 16000, &PitchParams::default());
        for v in &f0[..f0.len() - 1] {
            assert!((v - 130.0).abs() <= 2.0, "{v}");
        }
    }

    #[test]
    fn noise_is_mostly_unvoiced() {
        for seed in 0..5 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..32000).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f0 = f0_estimate(&x, 16000, &PitchParams::default());
            let unvoiced = f0.iter().filter(|v| **v == 0.0).count() as f64 / f0.len() as f64;
            assert!(unvoiced >= 0.9, "seed {seed}: {unvoiced}");
        }
    }

    #[test]
    fn silence_unvoiced_and_scale_invariant() {
        assert!(f0_estimate(&vec![0.0; 8000], 16000, &PitchParams::default()).iter().all(|v| *v == 0.0));
        let a = f0_estimate(&sine(180.0, 0.5, 1.0), 16000, &PitchParams::default());
        let b = f0_estimate(&sine(180.0, 0.5, 1.0).iter().map(|v| v * 0.125).collect::<Vec<_>>(), 16000, &PitchParams::default());
        assert_eq!(a, b);
    }
}
