use std::collections::BTreeMap;

use ndarray::Array2;

use super::WaveletPyramid;
use crate::dsp::FrameGrid;
use crate::{Error, Result};

pub const HIGH_GAMMA: &str = "high_gamma";
pub const BETA: &str = "beta";
pub const THETA: &str = "theta";

/// Named neural frequency bands in Hz.
pub const NAMED_BANDS: [(&str, f64, f64); 3] = [(HIGH_GAMMA, 70.0, 170.0), (BETA, 15.0, 30.0), (THETA, 4.0, 8.0)];

/// Frequency range `[fs / 2^(j+1), fs / 2^j]` covered by detail level `j`.
pub fn level_range_hz(fs: f64, level: usize) -> (f64, f64) {
    (fs / 2f64.powi(level as i32 + 1), fs / 2f64.powi(level as i32))
}

/// Which pyramid levels make up each named band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandAssignment(pub BTreeMap<String, Vec<usize>>);

impl BandAssignment {
    /// Assigns every level whose range overlaps a named band by a positive width.
    /// At 1024 Hz with 7 levels: theta = [7], beta = [5, 6], high_gamma = [2, 3].
    pub fn for_rate(fs: f64, levels: usize) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, lo, hi) in NAMED_BANDS {
            let assigned: Vec<usize> = (1..=levels)
                .filter(|&j| {
                    let (a, b) = level_range_hz(fs, j);
                    a.max(lo) < b.min(hi)
                })
                .collect();
            if assigned.is_empty() {
                return Err(Error::invalid(format!(
                    "no wavelet level covers the {name} band ({lo}-{hi} Hz) at {fs} Hz with {levels} levels"
                )));
            }
            map.insert(name.to_string(), assigned);
        }
        Ok(Self(map))
    }

    pub fn levels(&self, band: &str) -> Result<&[usize]> {
        self.0
            .get(band)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("band map has no '{band}' entry")))
    }
}

pub fn coefficient_energy(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum()
}

/// Coefficients of `level` attributed to frame `t`.
///
/// Coefficient `n` sits at sample `n * 2^level` and belongs to every frame
/// whose window contains that sample. Coarse levels whose spacing exceeds
/// half a frame use a window widened to two coefficient spacings around the
/// frame centre, so every frame sees at least two coefficients.
pub(crate) fn frame_coefficients(p: &WaveletPyramid, level: usize, t: usize, fs: u32) -> &[f64] {
    let grid = FrameGrid::default();
    let coeffs = p.detail(level);
    let spacing = 1usize << level;
    let len = grid.frame_len(fs);
    let start = grid.start(t, fs) as f64;
    let center = start + len as f64 / 2.0;
    let half = (len.max(2 * spacing)) as f64 / 2.0;
    let (lo, hi) = (center - half, center + half);
    let first = (lo / spacing as f64).ceil().max(0.0) as usize;
    let last = ((hi / spacing as f64).ceil().max(0.0) as usize).min(coeffs.len());
    &coeffs[first.min(last)..last]
}

/// Per-frame detail energy `E_j = sum |c_j(n)|^2`, frames x levels (column `j-1` is level `j`).
pub fn band_energy(p: &WaveletPyramid, fs: u32, signal_len: usize) -> Array2<f64> {
    let grid = FrameGrid::default();
    let frames = grid.frame_count(signal_len, fs);
    let mut out = Array2::zeros((frames, p.levels()));
    for t in 0..frames {
        for j in 1..=p.levels() {
            out[[t, j - 1]] = coefficient_energy(frame_coefficients(p, j, t, fs));
        }
    }
    out
}

/// Per-frame inputs to the prosody embedding: for each channel and each
/// theta and beta level, the mean and standard deviation of the frame's
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyInputs {
    pub theta: Array2<f64>,
    pub beta: Array2<f64>,
    pub theta_columns: Vec<String>,
    pub beta_columns: Vec<String>,
}

impl ProsodyInputs {
    pub fn frames(&self) -> usize {
        self.theta.nrows()
    }

    /// `[theta | beta]` column concatenation.
    pub fn concat(&self) -> Array2<f64> {
        ndarray::concatenate(ndarray::Axis(1), &[self.theta.view(), self.beta.view()]).expect("same frame count")
    }
}

fn level_stats(p: &WaveletPyramid, level: usize, t: usize, fs: u32) -> (f64, f64) {
    let c = frame_coefficients(p, level, t, fs);
    if c.is_empty() {
        return (0.0, 0.0);
    }
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn prosody_embedding_inputs(
    pyramids: &[WaveletPyramid],
    bands: &BandAssignment,
    fs: u32,
    signal_len: usize,
) -> Result<ProsodyInputs> {
    let theta_levels = bands.levels(THETA)?;
    let beta_levels = bands.levels(BETA)?;
    let frames = FrameGrid::default().frame_count(signal_len, fs);
    let build = |levels: &[usize], name: &str| -> Result<(Array2<f64>, Vec<String>)> {
        let mut cols = Vec::new();
        let mut data = Array2::zeros((frames, pyramids.len() * levels.len() * 2));
        for (c, p) in pyramids.iter().enumerate() {
            for (li, &j) in levels.iter().enumerate() {
                if j > p.levels() {
                    return Err(Error::invalid(format!("{name} level {j} exceeds pyramid depth {}", p.levels())));
                }
                let col = (c * levels.len() + li) * 2;
                cols.push(format!("ch{c:02}_{name}_L{j}_mean"));
                cols.push(format!("ch{c:02}_{name}_L{j}_std"));
                for t in 0..frames {
                    let (m, s) = level_stats(p, j, t, fs);
                    data[[t, col]] = m;
                    data[[t, col + 1]] = s;
                }
            }
        }
        Ok((data, cols))
    };
    let (theta, theta_columns) = build(theta_levels, THETA)?;
    let (beta, beta_columns) = build(beta_levels, BETA)?;
    Ok(ProsodyInputs { theta, beta, theta_columns, beta_columns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{dwt_decompose, pad_to_block};
    use std::f64::consts::PI;

    const FS: u32 = 1024;

    fn tone(freq: f64, secs: usize) -> Vec<f64> {
        (0..FS as usize * secs).map(|i| (2.0 * PI * freq * i as f64 / f64::from(FS)).sin()).collect()
    }

    #[test]
    fn default_assignment_at_1024() {
        let b = BandAssignment::for_rate(1024.0, 7).unwrap();
        assert_eq!(b.levels(THETA).unwrap(), &[7]);
        assert_eq!(b.levels(BETA).unwrap(), &[5, 6]);
        assert_eq!(b.levels(HIGH_GAMMA).unwrap(), &[2, 3]);
        assert!(BandAssignment::for_rate(1024.0, 5).is_err());
    }

    #[test]
    fn energy_arithmetic_and_zero_signal() {
        assert_eq!(coefficient_energy(&[1.0, 2.0, 2.0]), 9.0);
        let p = dwt_decompose(&vec![0.0; 2048], 7).unwrap();
        assert!(band_energy(&p, FS, 2048).iter().all(|e| *e == 0.0));
    }

    #[test]
    fn hundred_hz_tone_lands_in_level_three() {
        let x = tone(100.0, 4);
        let p = dwt_decompose(&x, 7).unwrap();
        let e = band_energy(&p, FS, x.len());
        let per_level: Vec<f64> = (0..7).map(|j| e.column(j).sum()).collect();
        let total: f64 = per_level.iter().sum();
        assert!(per_level[2] >= 0.7 * total, "{per_level:?}");
    }

    #[test]
    fn frame_count_matches_grid() {
        let x = tone(10.0, 3);
        let p = dwt_decompose(&pad_to_block(&x, 7), 7).unwrap();
        assert_eq!(band_energy(&p, FS, x.len()).nrows(), FrameGrid::default().frame_count(x.len(), FS));
        for t in 0..10 {
            assert!(frame_coefficients(&p, 7, t, FS).len() >= 2);
        }
    }

    #[test]
    fn prosody_inputs_shape_and_band_separation() {
        let bands = BandAssignment::for_rate(1024.0, 7).unwrap();
        let zero = dwt_decompose(&vec![0.0; 4096], 7).unwrap();
        let z = prosody_embedding_inputs(&[zero.clone(), zero], &bands, FS, 4096).unwrap();
        assert!(z.theta.iter().chain(z.beta.iter()).all(|v| *v == 0.0));
        assert_eq!(z.theta.ncols(), 2 * 2);
        assert_eq!(z.beta.ncols(), 2 * 2 * 2);
        assert_eq!(z.theta_columns.len() + z.beta_columns.len(), 12);

        let x = tone(6.0, 4);
        let p = dwt_decompose(&x, 7).unwrap();
        let inp = prosody_embedding_inputs(&[p], &bands, FS, x.len()).unwrap();
        let theta: f64 = inp.theta.iter().map(|v| v * v).sum();
        let beta: f64 = inp.beta.iter().map(|v| v * v).sum();
        assert!(theta >= 10.0 * beta, "theta {theta} beta {beta}");
    }

    #[test]
    fn missing_band_rejected() {
        let mut bands = BandAssignment::for_rate(1024.0, 7).unwrap();
        bands.0.remove(BETA);
        let p = dwt_decompose(&vec![0.0; 1024], 7).unwrap();
        assert!(prosody_embedding_inputs(&[p], &bands, FS, 1024).is_err());
    }
}
