use super::pac::THETA_BAND;
use super::pitch::{f0_estimate, PitchParams};
use crate::dsp::{analytic_signal, unwrap_phase, FrameGrid};
use crate::preprocess::{bandpass_signal, classify_frames, drop_short_runs};
use crate::Result;

/// Prosodic descriptors of one 50 ms frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProsodyFrame {
    /// 0 for unvoiced frames.
    pub f0_hz: f64,
    pub energy_rms: f64,
    pub shimmer: f64,
    /// Length of the voiced run containing the frame, 0 if unvoiced.
    pub duration_ms: f64,
    pub phase_variability: f64,
}

impl ProsodyFrame {
    pub const COLUMNS: [&'static str; 5] = ["f0_hz", "energy_rms", "shimmer", "duration_ms", "phase_variability"];

    pub fn values(&self) -> [f64; 5] {
        [self.f0_hz, self.energy_rms, self.shimmer, self.duration_ms, self.phase_variability]
    }
}

const VAD_FACTOR: f64 = 2.0;
const VAD_MIN_FRAMES: usize = 3;

/// Mean absolute change of consecutive sub-frame peaks relative to their mean.
fn shimmer(peaks: &[f64]) -> f64 {
    let mean = peaks.iter().sum::<f64>() / peaks.len() as f64;
    if mean < 1e-8 || peaks.len() < 2 {
        return 0.0;
    }
    let diff: f64 = peaks.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (peaks.len() - 1) as f64;
    diff / mean
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Per-frame prosody track on the shared 50 ms / 10 ms grid.
///
/// Shimmer uses the peak Hilbert envelope of each 10 ms sub-frame; phase
/// variability is the standard deviation of the first difference of the
/// unwrapped theta-band Hilbert phase inside the frame.
pub fn prosody_track(signal: &[f64], fs: u32) -> Result<Vec<ProsodyFrame>> {
    let grid = FrameGrid::default();
    let frames = grid.frame_count(signal.len(), fs);
    if frames == 0 {
        return Ok(Vec::new());
    }
    let frame_len = grid.frame_len(fs);
    let fsf = f64::from(fs);

    let f0 = if fsf >= 800.0 { f0_estimate(signal, fs, &PitchParams::default()) } else { vec![0.0; frames] };
    let envelope = if signal.len() >= 8 { analytic_signal(signal)?.amplitude_envelope } else { signal.iter().map(|v| v.abs()).collect() };

    let theta_dphi: Vec<f64> = if signal.len() >= 8 && THETA_BAND.1 < 0.45 * fsf {
        let theta = bandpass_signal(signal, fsf, THETA_BAND.0, THETA_BAND.1)?;
        let phase = unwrap_phase(&analytic_signal(&theta)?.instantaneous_phase_rad);
        phase.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        Vec::new()
    };

    let rms: Vec<f64> = (0..frames)
        .map(|t| {
            let f = grid.frame(signal, t, fs);
            (f.iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt()
        })
        .collect();
    let mut voiced = classify_frames(&rms, VAD_FACTOR);
    drop_short_runs(&mut voiced, VAD_MIN_FRAMES);
    let mut duration = vec![0.0; frames];
    let hop_ms = 1000.0 / f64::from(grid.rate_hz);
    for (s, e) in crate::preprocess::vad_runs(&voiced) {
        duration[s..e].iter_mut().for_each(|d| *d = (e - s) as f64 * hop_ms);
    }

    let sub = grid.frame_hops as usize;
    Ok((0..frames)
        .map(|t| {
            let start = grid.start(t, fs);
            let peaks: Vec<f64> = (0..sub)
                .map(|i| {
                    let s = start + i * frame_len / sub;
                    let e = start + (i + 1) * frame_len / sub;
                    (s..e).map(|k| envelope.get(k).copied().unwrap_or(0.0)).fold(0.0, f64::max)
                })
                .collect();
            let end = (start + frame_len).min(theta_dphi.len());
            let phase_variability = if start < end { std_dev(&theta_dphi[start..end]) } else { 0.0 };
            ProsodyFrame {
                f0_hz: f0[t],
                energy_rms: rms[t],
                shimmer: shimmer(&peaks),
                duration_ms: duration[t],
                phase_variability,
            }
        })
        .collect())
}
