use crate::dsp::Waveform;
use crate::Result;

/// Energy VAD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub threshold_factor: f64,
    /// Runs shorter than this many frames are discarded.
    pub min_frames: usize,
}

impl Default for VadParams {
    fn default() -> Self {
        Self { frame_ms: 50.0, hop_ms: 10.0, threshold_factor: 2.0, min_frames: 3 }
    }
}

/// Sorted, non-overlapping `(onset, offset)` sample ranges, offset exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VadSegments(pub Vec<(usize, usize)>);

const NOISE_PERCENTILE: f64 = 0.2;

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * p).round() as usize;
    v[idx]
}

/// Marks frames whose RMS exceeds `factor` times the 20th-percentile RMS.
///
/// A recording in which no frame clears that threshold has no quiet
/// reference; its frames are then judged against the loudest frame instead
/// (RMS >= max / factor), so a steady tone counts as one voiced region while
/// digital silence stays unvoiced.
pub fn classify_frames(rms: &[f64], factor: f64) -> Vec<bool> {
    if rms.is_empty() {
        return Vec::new();
    }
    let floor = percentile(rms, NOISE_PERCENTILE);
    let max = rms.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![false; rms.len()];
    }
    let threshold = factor * floor;
    if rms.iter().any(|r| *r > threshold) {
        rms.iter().map(|r| *r > threshold).collect()
    } else {
        rms.iter().map(|r| *r >= max / factor).collect()
    }
}

pub fn drop_short_runs(flags: &mut [bool], min_len: usize) {
    let mut t = 0;
    while t < flags.len() {
        if !flags[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t < flags.len() && flags[t] {
            t += 1;
        }
        if t - start < min_len {
            flags[start..t].iter_mut().for_each(|f| *f = false);
        }
    }
}

/// Frame runs `[start, end)` of a boolean mask.
pub fn vad_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < flags.len() {
        if flags[t] {
            let s = t;
            while t < flags.len() && flags[t] {
                t += 1;
            }
            out.push((s, t));
        } else {
            t += 1;
        }
    }
    out
}

pub(crate) fn frame_rms(x: &[f64], frame_len: usize, hop: usize) -> Vec<f64> {
    if x.len() < frame_len || hop == 0 {
        return Vec::new();
    }
    let frames = (x.len() - frame_len).div_ceil(hop) + 1;
    (0..frames)
        .map(|t| {
            let s = t * hop;
            let e = x.len().min(s + frame_len);
            (x[s..e].iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt()
        })
        .collect()
}

/// Energy-based voice activity detection.
///
/// Each frame owns the hop-wide slot centred on its window, so segment
/// boundaries sit at frame centres; the first and last frames extend to the
/// signal edges.
pub fn vad(audio: &Waveform, params: &VadParams) -> Result<VadSegments> {
    let fs = f64::from(audio.sample_rate_hz);
    let frame_len = ((params.frame_ms * fs / 1000.0).round() as usize).max(1);
    let hop = ((params.hop_ms * fs / 1000.0).round() as usize).max(1);
    let rms = frame_rms(&audio.samples, frame_len, hop);
    let mut flags = classify_frames(&rms, params.threshold_factor);
    drop_short_runs(&mut flags, params.min_frames);
    let n = audio.len();
    let last = rms.len().saturating_sub(1);
    let lead = (frame_len.saturating_sub(hop)) / 2;
    let segments = vad_runs(&flags)
        .into_iter()
        .map(|(s, e)| {
            let onset = if s == 0 { 0 } else { (s * hop + lead).min(n) };
            let offset = if e - 1 == last { n } else { ((e - 1) * hop + lead + hop).min(n) };
            (onset, offset)
        })
        .collect();
    Ok(VadSegments(segments))
}
