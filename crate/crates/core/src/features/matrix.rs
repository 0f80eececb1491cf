use std::collections::HashSet;

use ndarray::Array2;
use num_complex::Complex64;

use super::bands::{band_energy, prosody_embedding_inputs, BandAssignment, ProsodyInputs, BETA, HIGH_GAMMA, THETA};
use super::pac::{coupling_terms, pac_bands};
use super::prosody::{prosody_track, ProsodyFrame};
use super::wavelet::{dwt_decompose, pad_to_block};
use crate::dsp::FrameGrid;
use crate::preprocess::MultiChannelRecording;
use crate::{Error, Result};

/// Frames x named feature columns at 100 frames per second.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    pub columns: Vec<String>,
    pub frame_rate_hz: u32,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>, columns: Vec<String>) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(Error::invalid(format!("{} column names for {} columns", columns.len(), data.ncols())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::invalid(format!("duplicate feature column '{dup}'")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(Self { data, columns, frame_rate_hz: FrameGrid::default().rate_hz })
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Settings for [`extract_features`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub wavelet_levels: usize,
    /// Length of the centred window over which framewise PAC is averaged.
    pub pac_window_sec: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { wavelet_levels: 7, pac_window_sec: 1.0 }
    }
}

/// Everything extracted from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub matrix: FeatureMatrix,
    pub prosody_inputs: ProsodyInputs,
    pub prosody: Vec<ProsodyFrame>,
}

/// Framewise PAC magnitude over a centred window, from prefix sums of the coupling terms.
fn framewise_pac(terms: &[Complex64], fs: u32, frames: usize, window_sec: f64) -> Vec<f64> {
    let grid = FrameGrid::default();
    let mut prefix = Vec::with_capacity(terms.len() + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for t in terms {
        let last = *prefix.last().expect("seeded");
        prefix.push(last + t);
    }
    let half = (window_sec * f64::from(fs) / 2.0).round() as usize;
    let frame_len = grid.frame_len(fs);
    (0..frames)
        .map(|t| {
            let center = grid.start(t, fs) + frame_len / 2;
            let lo = center.saturating_sub(half).min(terms.len());
            let hi = (center + half).min(terms.len());
            if hi <= lo {
                0.0
            } else {
                ((prefix[hi] - prefix[lo]).norm() / (hi - lo) as f64).min(1.0)
            }
        })
        .collect()
}

/// Builds the per-frame feature matrix of a (preprocessed) recording:
/// per-channel wavelet band energies for the high-gamma, beta and theta
/// levels, per-channel framewise PAC, and prosody tracks of the channel-mean
/// signal. Also returns the theta/beta prosody-embedding inputs.
pub fn extract_features(rec: &MultiChannelRecording, cfg: &FeatureConfig) -> Result<FeatureSet> {
    let fs = rec.sample_rate_hz;
    let n = rec.samples_per_channel();
    let frames = FrameGrid::default().frame_count(n, fs);
    if frames == 0 {
        return Err(Error::invalid("recording is shorter than one analysis frame"));
    }
    let bands = BandAssignment::for_rate(f64::from(fs), cfg.wavelet_levels)?;
    let energy_levels: Vec<usize> = {
        let mut v: Vec<usize> = [HIGH_GAMMA, BETA, THETA].iter().map(|b| bands.levels(b)).collect::<Result<Vec<_>>>()?.concat();
        v.sort_unstable();
        v.dedup();
        v
    };

    let mut columns = Vec::new();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut pyramids = Vec::with_capacity(rec.channels());
    for (c, row) in rec.data.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let pyramid = dwt_decompose(&pad_to_block(&x, cfg.wavelet_levels), cfg.wavelet_levels)?;
        let energy = band_energy(&pyramid, fs, n);
        for &j in &energy_levels {
            columns.push(format!("ch{c:02}_E{j}"));
            blocks.push(energy.column(j - 1).to_vec());
        }
        let (theta, gamma) = pac_bands(&x, f64::from(fs))?;
        let pac = match coupling_terms(&theta, &gamma) {
            Ok(terms) => framewise_pac(&terms, fs, frames, cfg.pac_window_sec),
            Err(Error::PacUndefined(_)) => vec![0.0; frames],
            Err(e) => return Err(e),
        };
        columns.push(format!("ch{c:02}_pac"));
        blocks.push(pac);
        pyramids.push(pyramid);
    }

    let mean_signal: Vec<f64> = (0..n).map(|i| rec.data.column(i).mean().unwrap_or(0.0)).collect();
    let prosody = prosody_track(&mean_signal, fs)?;
    for (k, name) in ProsodyFrame::COLUMNS.iter().enumerate() {
        columns.push(format!("prosody_{name}"));
        blocks.push(prosody.iter().map(|p| p.values()[k]).collect());
    }

    let mut data = Array2::zeros((frames, blocks.len()));
    for (j, col) in blocks.iter().enumerate() {
        data.column_mut(j).iter_mut().zip(col).for_each(|(d, v)| *d = *v);
    }
    let prosody_inputs = prosody_embedding_inputs(&pyramids, &bands, fs, n)?;
    Ok(FeatureSet { matrix: FeatureMatrix::new(data, columns)?, prosody_inputs, prosody })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{mel_spectrogram, MelConfig, MelScale, StftConfig, Waveform};
    use rand::{Rng, SeedableRng};

    fn noise_recording(channels: usize, secs: f64, seed: u64) -> MultiChannelRecording {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = (secs * 1024.0) as usize;
        MultiChannelRecording::with_default_labels(Array2::from_shape_fn((channels, n), |_| rng.random_range(-1.0..1.0)), 1024).unwrap()
    }

    #[test]
    fn shape_and_column_names() {
        let set = extract_features(&noise_recording(3, 3.0, 1), &FeatureConfig::default()).unwrap();
        let m = &set.matrix;
        assert_eq!(m.dim(), 3 * 6 + 5);
        assert_eq!(m.columns[0], "ch00_E2");
        assert_eq!(m.columns[5], "ch00_pac");
        assert_eq!(m.columns.last().unwrap(), "prosody_phase_variability");
        assert_eq!(set.prosody_inputs.frames(), m.frames());
        assert!(m.data.iter().all(|v| v.is_finite()));
        let pac_col = m.data.column(5);
        assert!(pac_col.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn frame_count_matches_mel_of_same_duration() {
        let secs = 2.5;
        let set = extract_features(&noise_recording(2, secs, 2), &FeatureConfig::default()).unwrap();
        let audio = Waveform::new(vec![0.1; (secs * 16000.0) as usize], 16000).unwrap();
        let mel = mel_spectrogram(&audio, &StftConfig::default(), &MelConfig::default(), MelScale::LogPower).unwrap();
        assert_eq!(set.matrix.frames(), mel.frames());
    }

    #[test]
    fn duplicate_columns_rejected() {
        let d = Array2::zeros((2, 2));
        assert!(FeatureMatrix::new(d.clone(), vec!["a".into(), "a".into()]).is_err());
        assert!(FeatureMatrix::new(d, vec!["a".into()]).is_err());
    }
}
