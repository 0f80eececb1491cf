//! Cleaning and alignment of raw multi-channel neural recordings and the
//! paired audio.

mod align;
mod filter;
mod vad;

pub use align::{align, envelope_xcorr, rms_envelope, AlignmentResult};
pub use filter::{bandpass, bandpass_signal, filtfilt, notch, notch_signal, Biquad, Sos};
pub use vad::{classify_frames, drop_short_runs, vad, vad_runs, VadParams, VadSegments};

use ndarray::Array2;

use crate::{Error, Result};

/// Channels x samples neural-style recording.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRecording {
    pub data: Array2<f64>,
    pub sample_rate_hz: u32,
    pub channel_labels: Vec<String>,
}

impl MultiChannelRecording {
    pub fn new(data: Array2<f64>, sample_rate_hz: u32, channel_labels: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::invalid("recording needs at least one channel"));
        }
        if channel_labels.len() != data.nrows() {
            return Err(Error::invalid(format!(
                "{} channel labels for {} channels",
                channel_labels.len(),
                data.nrows()
            )));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("recording contains non-finite samples"));
        }
        Ok(Self { data, sample_rate_hz, channel_labels })
    }

    /// Builds a recording with labels `ch00`, `ch01`, ...
    pub fn with_default_labels(data: Array2<f64>, sample_rate_hz: u32) -> Result<Self> {
        let labels = (0..data.nrows()).map(|c| format!("ch{c:02}")).collect();
        Self::new(data, sample_rate_hz, labels)
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.data.ncols()
    }

    fn map_channels(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = self.data.clone();
        for (mut dst, src) in out.rows_mut().into_iter().zip(self.data.rows()) {
            let y = f(&src.to_vec());
            dst.iter_mut().zip(y).for_each(|(d, v)| *d = v);
        }
        Self { data: out, sample_rate_hz: self.sample_rate_hz, channel_labels: self.channel_labels.clone() }
    }
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub(crate) const SIGMA_FLOOR: f64 = 1e-8;

pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores every channel with its population statistics; constant channels map to zero.
pub fn zscore_channels(rec: &MultiChannelRecording) -> Result<(MultiChannelRecording, ChannelStats)> {
    if rec.samples_per_channel() < 2 {
        return Err(Error::invalid("z-scoring needs at least 2 samples per channel"));
    }
    let mut stats = ChannelStats { mean: Vec::new(), std: Vec::new() };
    let mut out = rec.data.clone();
    for mut row in out.rows_mut() {
        let (mu, sigma) = mean_std(row.as_slice().expect("standard layout"));
        let denom = sigma.max(SIGMA_FLOOR);
        row.mapv_inplace(|v| (v - mu) / denom);
        stats.mean.push(mu);
        stats.std.push(sigma);
    }
    let rec = MultiChannelRecording { data: out, ..rec.clone() };
    Ok((rec, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zscore_hand_values() {
        let rec = MultiChannelRecording::with_default_labels(array![[1.0, 2.0, 3.0], [7.0, 7.0, 7.0]], 1024).unwrap();
        let (z, stats) = zscore_channels(&rec).unwrap();
        let want = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (g, w) in z.data.row(0).iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(z.data.row(1).iter().all(|v| *v == 0.0));
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(stats.mean[1], 7.0);
    }

    #[test]
    fn label_mismatch_rejected() {
        assert!(MultiChannelRecording::new(array![[1.0, 2.0]], 1024, vec![]).is_err());
        assert!(MultiChannelRecording::new(array![[f64::NAN, 2.0]], 1024, vec!["a".into()]).is_err());
    }

    proptest! {
        #[test]
        fn zscore_moments_and_idempotence(xs in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let n = xs.len();
            let rec = MultiChannelRecording::with_default_labels(Array2::from_shape_vec((1, n), xs).unwrap(), 1024).unwrap();
            let (z, stats) = zscore_channels(&rec).unwrap();
            let (m, s) = mean_std(z.data.row(0).as_slice().unwrap());
            prop_assert!(m.abs() <= 1e-9);
            if stats.std[0] > 1e-6 {
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
            let (zz, _) = zscore_channels(&z).unwrap();
            for (a, b) in z.data.iter().zip(zz.data.iter()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
