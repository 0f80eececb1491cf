//! Orthonormal db4 discrete wavelet transform with periodized boundaries.

use crate::{Error, Result};

/// db4 reconstruction lowpass filter (8 taps, sums to sqrt(2)).
pub const DB4_LOWPASS: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

fn db4_highpass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (k, v) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4_LOWPASS[7 - k];
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wavelet {
    Db4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodization,
}

/// Multi-level decomposition. `details[0]` is level 1 (finest).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub wavelet: Wavelet,
    pub boundary: Boundary,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Coefficients of detail level `j` (1-based).
    pub fn detail(&self, level: usize) -> &[f64] {
        &self.details[level - 1]
    }

    pub fn signal_len(&self) -> usize {
        self.details.first().map_or(self.approx.len(), |d| 2 * d.len())
    }

    pub fn energy(&self) -> f64 {
        self.approx.iter().chain(self.details.iter().flatten()).map(|c| c * c).sum()
    }
}

fn analysis_step(x: &[f64], h: &[f64; 8], g: &[f64; 8]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for k in 0..8 {
            let v = x[(2 * i + k) % n];
            sa += h[k] * v;
            sd += g[k] * v;
        }
        a[i] = sa;
        d[i] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64; 8], g: &[f64; 8]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for i in 0..a.len() {
        for k in 0..8 {
            x[(2 * i + k) % n] += h[k] * a[i] + g[k] * d[i];
        }
    }
    x
}

/// Decomposes `x` into `levels` detail bands plus the final approximation.
/// The length must be divisible by `2^levels`.
pub fn dwt_decompose(x: &[f64], levels: usize) -> Result<WaveletPyramid> {
    if levels == 0 || levels >= usize::BITS as usize {
        return Err(Error::invalid("wavelet levels must be >= 1"));
    }
    let block = 1usize << levels;
    if x.len() < block || x.len() % block != 0 {
        return Err(Error::invalid(format!(
            "signal length {} must be a positive multiple of 2^{levels} = {block}",
            x.len()
        )));
    }
    let g = db4_highpass();
    let mut details = Vec::with_capacity(levels);
    let mut approx = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, &DB4_LOWPASS, &g);
        details.push(d);
        approx = a;
    }
    Ok(WaveletPyramid { approx, details, wavelet: Wavelet::Db4, boundary: Boundary::Periodization })
}

pub fn dwt_reconstruct(p: &WaveletPyramid) -> Result<Vec<f64>> {
    let mut approx = p.approx.clone();
    for (j, d) in p.details.iter().enumerate().rev() {
        if d.len() != approx.len() || d.is_empty() {
            return Err(Error::invalid(format!(
                "level {} has {} detail coefficients but {} approximation coefficients",
                j + 1,
                d.len(),
                approx.len()
            )));
        }
        approx = synthesis_step(&approx, d, &DB4_LOWPASS, &db4_highpass());
    }
    Ok(approx)
}

/// Zero-pads `x` up to the next multiple of `2^levels`.
pub fn pad_to_block(x: &[f64], levels: usize) -> Vec<f64> {
    let block = 1usize << levels;
    let n = x.len().div_ceil(block).max(1) * block;
    let mut out = x.to_vec();
    out.resize(n, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn filter_is_orthonormal() {
        let s: f64 = DB4_LOWPASS.iter().sum();
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        for m in 0..4 {
            let dot: f64 = (0..8 - 2 * m).map(|k| DB4_LOWPASS[k] * DB4_LOWPASS[k + 2 * m]).sum();
            assert!((dot - if m == 0 { 1.0 } else { 0.0 }).abs() < 1e-12, "shift {m}: {dot}");
        }
        let g = db4_highpass();
        for p in 0..4 {
            let moment: f64 = g.iter().enumerate().map(|(k, v)| v * (k as f64).powi(p)).sum();
            assert!(moment.abs() < 1e-9, "moment {p}: {moment}");
        }
    }

    #[test]
    fn constant_signal_has_no_detail() {
        let p = dwt_decompose(&vec![3.5; 1024], 7).unwrap();
        assert!(p.details.iter().flatten().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn ramp_detail_vanishes_away_from_wrap() {
        let x: Vec<f64> = (0..256).map(|i| 0.01 * i as f64 - 1.0).collect();
        let p = dwt_decompose(&x, 1).unwrap();
        let d = p.detail(1);
        // coefficients 0..=124 read samples 0..=255 without wrapping
        for c in &d[..=124] {
            assert!(c.abs() < 1e-12);
        }
        assert!(d[127].abs() > 0.1);
    }

    #[test]
    fn energy_and_reconstruction() {
        let x = random(4096, 1);
        let p = dwt_decompose(&x, 7).unwrap();
        let e: f64 = x.iter().map(|v| v * v).sum();
        assert!((p.energy() - e).abs() <= 1e-9 * e);
        let x = random(1024, 2);
        assert!(max_err(&dwt_reconstruct(&dwt_decompose(&x, 7).unwrap()).unwrap(), &x) <= 1e-6);
        let x: Vec<f64> = (0..2048).map(|i| (2.0 * PI * 220.0 * i as f64 / 16000.0).sin()).collect();
        assert!(max_err(&dwt_reconstruct(&dwt_decompose(&x, 5).unwrap()).unwrap(), &x) <= 1e-6);
    }

    #[test]
    fn zero_pyramid_and_bad_input() {
        let p = WaveletPyramid {
            approx: vec![0.0; 8],
            details: vec![vec![0.0; 64], vec![0.0; 32], vec![0.0; 16], vec![0.0; 8]],
            wavelet: Wavelet::Db4,
            boundary: Boundary::Periodization,
        };
        let x = dwt_reconstruct(&p).unwrap();
        assert_eq!(x.len(), 128);
        assert!(x.iter().all(|v| *v == 0.0));
        assert!(dwt_decompose(&[0.0; 64], 7).is_err());
        assert!(dwt_decompose(&[0.0; 200], 4).is_err());
        let mut bad = p.clone();
        bad.details[1].pop();
        assert!(dwt_reconstruct(&bad).is_err());
    }

    proptest! {
        #[test]
        fn perfect_reconstruction_any_dyadic_length(blocks in 1usize..8, levels in 1usize..7, seed in 0u64..1000) {
            let n = blocks << levels;
            let x = random(n, seed);
            let p = dwt_decompose(&x, levels).unwrap();
            let e: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((p.energy() - e).abs() <= 1e-9 * e);
            prop_assert!(max_err(&dwt_reconstruct(&p).unwrap(), &x) <= 1e-6);
        }
    }
}
