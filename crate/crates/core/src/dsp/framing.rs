/// The shared analysis grid: 50 ms frames every 10 ms, expressed for any
/// sampling rate so that neural (1024 Hz) and audio (16 kHz) streams of the
/// same duration produce the same frame count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGrid {
    /// Frames per second.
    pub rate_hz: u32,
    /// Frame length expressed in hops.
    pub frame_hops: u32,
}

impl Default for FrameGrid {
    fn default() -> Self {
        Self { rate_hz: 100, frame_hops: 5 }
    }
}

impl FrameGrid {
    pub fn frame_len(&self, fs: u32) -> usize {
        ((f64::from(self.frame_hops) * f64::from(fs) / f64::from(self.rate_hz)).round() as usize).max(1)
    }

    pub fn hop_len(&self, fs: u32) -> f64 {
        f64::from(fs) / f64::from(self.rate_hz)
    }

    /// First sample of frame `t`.
    pub fn start(&self, t: usize, fs: u32) -> usize {
        (t as f64 * self.hop_len(fs)).round() as usize
    }

    /// Number of frames for `n` samples at `fs`, padding the tail as the STFT does.
    /// Zero when the signal is shorter than one frame.
    pub fn frame_count(&self, n: usize, fs: u32) -> usize {
        let n_scaled = n as u128 * u128::from(self.rate_hz);
        let frame_scaled = u128::from(self.frame_hops) * u128::from(fs);
        if n_scaled < frame_scaled {
            return 0;
        }
        ((n_scaled - frame_scaled).div_ceil(u128::from(fs)) + 1) as usize
    }

    /// Frame `t` of `x`, zero padded past the end.
    pub fn frame(&self, x: &[f64], t: usize, fs: u32) -> Vec<f64> {
        let start = self.start(t, fs);
        let len = self.frame_len(fs);
        (start..start + len).map(|i| x.get(i).copied().unwrap_or(0.0)).collect()
    }
}
