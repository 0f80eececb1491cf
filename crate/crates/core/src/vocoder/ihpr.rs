use ndarray::Array2;
use num_complex::Complex64;

use super::griffin_lim::{check_magnitude, project, raw_phase, run_griffin_lim, spectral_convergence, with_phase};
use super::{HarmonicGrid, PhaseState, VocoderConfig};
use crate::dsp::{istft, wrap_phase, ComplexSpectrogram, Waveform};
use crate::dsp::stft::stft_samples;
use crate::error::{Error, Result};
use crate::features::{f0_estimate, PitchParams};

const MAGNITUDE_FLOOR: f64 = 1e-8;

/// Circular mean of a set of angles, the maximizer of `sum_h cos(phi - theta_h)`.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let s: Complex64 = angles.into_iter().map(|a| Complex64::from_polar(1.0, a)).sum();
    s.arg()
}

fn check_grid(grid: &HarmonicGrid, frames: usize, bins: usize) -> Result<()> {
    if grid.frames() != frames {
        return Err(Error::invalid(format!("harmonic grid has {} frames, spectrogram {}", grid.frames(), frames)));
    }
    if grid.bins.iter().flatten().any(|&b| b >= bins) {
        return Err(Error::invalid("harmonic bin outside the spectrogram"));
    }
    Ok(())
}

/// Re-anchors the harmonic phases of each voiced frame: their common offset
/// becomes the circular mean of the observed harmonic phases, and each
/// harmonic's deviation from it is shrunk by `1 - gamma`.
fn harmonic_update_in_place(phase: &mut Array2<f64>, observed: &Array2<f64>, grid: &HarmonicGrid, gamma: f64) {
    for (t, bins) in grid.bins.iter().enumerate() {
        if bins.is_empty() {
            continue;
        }
        let anchor = circular_mean(bins.iter().map(|&b| observed[[t, b]]));
        for &b in bins {
            let deviation = wrap_phase(observed[[t, b]] - anchor);
            phase[[t, b]] = wrap_phase(anchor + (1.0 - gamma) * deviation);
        }
    }
}

/// Harmonic phase update against the current consistent spectrum `s_k`.
/// Non-harmonic bins and unvoiced frames keep the phase of `state`.
pub fn ihpr_harmonic_update(state: &PhaseState, grid: &HarmonicGrid, s_k: &ComplexSpectrogram, gamma: f64) -> Result<PhaseState> {
    if state.phase.dim() != s_k.data.dim() {
        return Err(Error::invalid("phase state and spectrogram shapes differ"));
    }
    check_grid(grid, s_k.frames(), s_k.bins())?;
    let mut phase = state.phase.clone();
    harmonic_update_in_place(&mut phase, &raw_phase(&s_k.data), grid, gamma);
    Ok(PhaseState { phase, ..state.clone() })
}

/// Phase-gradient smoothing at harmonic bins. With `Z = M e^{j phi}` and the
/// central difference `dZ` across frequency, the local phase slope is
/// `Im(e^{-j phi} dZ) / M`; each harmonic phase steps against it by `lambda`.
fn smooth_in_place(phase: &mut Array2<f64>, magnitude: &Array2<f64>, grid: &HarmonicGrid, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let bins = phase.ncols();
    for (t, harmonics) in grid.bins.iter().enumerate() {
        if harmonics.is_empty() {
            continue;
        }
        let z: Vec<Complex64> = (0..bins).map(|f| Complex64::from_polar(magnitude[[t, f]], phase[[t, f]])).collect();
        for &b in harmonics {
            let (lo, hi) = (b.saturating_sub(1), (b + 1).min(bins - 1));
            let dz = (z[hi] - z[lo]) / (hi - lo) as f64;
            let slope = (Complex64::from_polar(1.0, -phase[[t, b]]) * dz).im / magnitude[[t, b]].max(MAGNITUDE_FLOOR);
            phase[[t, b]] = wrap_phase(phase[[t, b]] - lambda * slope);
        }
    }
}

pub fn ihpr_smooth(state: &PhaseState, magnitude: &Array2<f64>, grid: &HarmonicGrid, lambda: f64) -> Result<PhaseState> {
    if state.phase.dim() != magnitude.dim() {
        return Err(Error::invalid("phase state and magnitude shapes differ"));
    }
    check_grid(grid, magnitude.nrows(), magnitude.ncols())?;
    let mut phase = state.phase.clone();
    smooth_in_place(&mut phase, magnitude, grid, lambda);
    Ok(PhaseState { phase, ..state.clone() })
}

/// Weighted magnitude error plus `gamma` times the squared wrapped phase
/// change at harmonic bins.
pub fn perceptual_loss_terms(
    target: &Array2<f64>,
    reconstructed: &Array2<f64>,
    phase: &Array2<f64>,
    prev_phase: &Array2<f64>,
    grid: &HarmonicGrid,
    weights: &[f64],
    gamma: f64,
) -> Result<f64> {
    let dim = target.dim();
    if reconstructed.dim() != dim || phase.dim() != dim || prev_phase.dim() != dim || weights.len() != dim.1 {
        return Err(Error::invalid("perceptual loss inputs have inconsistent shapes"));
    }
    check_grid(grid, dim.0, dim.1)?;
    let mut magnitude_term = 0.0;
    for (a, b) in target.rows().into_iter().zip(reconstructed.rows()) {
        for ((x, y), w) in a.iter().zip(b.iter()).zip(weights) {
            magnitude_term += w * (x - y).powi(2);
        }
    }
    let phase_term: f64 = grid
        .bins
        .iter()
        .enumerate()
        .flat_map(|(t, bins)| bins.iter().map(move |&b| (t, b)))
        .map(|(t, b)| wrap_phase(phase[[t, b]] - prev_phase[[t, b]]).powi(2))
        .sum();
    Ok(magnitude_term + gamma * phase_term)
}

/// Perceptual loss of a candidate spectrum: its magnitude after a round trip
/// through the waveform domain is compared against the target.
pub fn perceptual_loss(
    target: &Array2<f64>,
    current: &ComplexSpectrogram,
    prev_phase: &Array2<f64>,
    grid: &HarmonicGrid,
    weights: &[f64],
    gamma: f64,
) -> Result<f64> {
    let x = istft(current)?;
    let reconstructed = stft_samples(&x.samples, x.sample_rate_hz, &current.config)?.magnitude();
    perceptual_loss_terms(target, &reconstructed, &current.phase(), prev_phase, grid, weights, gamma)
}

#[derive(Debug, Clone)]
pub struct IhprOutput {
    pub waveform: Waveform,
    /// Perceptual loss after each refinement iteration.
    pub loss_curve: Vec<f64>,
    /// Spectral convergence after each refinement iteration.
    pub spectral_convergence: Vec<f64>,
    /// Refinement iterations run (excluding the warm-up).
    pub iterations: usize,
    pub final_state: PhaseState,
}

impl IhprOutput {
    /// Magnitude projections spent in total, warm-up included.
    pub fn total_iterations(&self, cfg: &VocoderConfig) -> usize {
        cfg.warmup_iterations + self.iterations
    }
}

/// Iterative harmonic phase reconstruction.
///
/// After a Griffin-Lim warm-up each iteration takes the phase of the current
/// consistent spectrum, re-anchors its harmonic phases, smooths their
/// frequency gradient, imposes the target magnitude and projects back onto
/// consistent spectrograms, then scores the result. Iteration stops after
/// `cfg.ihpr_iterations` or once the loss changes by less than
/// `cfg.convergence_tol` relative to the previous iteration. With no voiced
/// frame the result is exactly Griffin-Lim with the same number of
/// projections.
pub fn ihpr_vocode(magnitude: &Array2<f64>, f0_track: &[f64], cfg: &VocoderConfig) -> Result<IhprOutput> {
    check_magnitude(magnitude, cfg)?;
    if f0_track.len() != magnitude.nrows() {
        return Err(Error::invalid(format!(
            "f0 track has {} frames, magnitude has {}",
            f0_track.len(),
            magnitude.nrows()
        )));
    }
    let grid = HarmonicGrid::new(f0_track, cfg.max_harmonics, &cfg.stft, cfg.sample_rate_hz)?;
    let weights = cfg.weighting.bin_weights(&cfg.stft, cfg.sample_rate_hz);
    let (mut x, mut s, _) = run_griffin_lim(magnitude, cfg, cfg.warmup_iterations)?;
    let mut prev_phase = raw_phase(&s);
    let mut state = PhaseState { phase: prev_phase.clone(), iteration: 0, loss: f64::INFINITY };
    let mut loss_curve = Vec::new();
    let mut sc = Vec::new();
    for k in 1..=cfg.ihpr_iterations {
        let observed = raw_phase(&s);
        let mut phase = observed.clone();
        harmonic_update_in_place(&mut phase, &observed, &grid, cfg.gamma);
        smooth_in_place(&mut phase, magnitude, &grid, cfg.lambda);
        (x, s) = project(with_phase(magnitude, &phase), cfg)?;
        let reconstructed = s.mapv(|c| c.norm());
        let loss = perceptual_loss_terms(magnitude, &reconstructed, &phase, &prev_phase, &grid, &weights, cfg.gamma)?;
        sc.push(spectral_convergence(magnitude, &s));
        loss_curve.push(loss);
        let previous = state.loss;
        prev_phase = phase.clone();
        state = PhaseState { phase, iteration: k, loss };
        if k >= 2 && ((previous - loss).abs() <= cfg.convergence_tol * previous.abs()) {
            break;
        }
    }
    state.phase.mapv_inplace(wrap_phase);
    Ok(IhprOutput { waveform: x, iterations: loss_curve.len(), loss_curve, spectral_convergence: sc, final_state: state })
}

/// F0 track for the harmonic grid, estimated from a Griffin-Lim draft of the
/// magnitude and matched to the STFT frame count.
pub fn bootstrap_f0(magnitude: &Array2<f64>, cfg: &VocoderConfig) -> Result<Vec<f64>> {
    let (draft, _, _) = run_griffin_lim(magnitude, cfg, cfg.warmup_iterations)?;
    let mut track = f0_estimate(&draft.samples, draft.sample_rate_hz, &PitchParams::default());
    track.resize(magnitude.nrows(), 0.0);
    Ok(track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftConfig};
    use crate::metrics::hnr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn state(phase: Array2<f64>) -> PhaseState {
        PhaseState { phase, iteration: 0, loss: 0.0 }
    }

    fn spectrum(phase: &Array2<f64>) -> ComplexSpectrogram {
        ComplexSpectrogram::new(phase.mapv(|p| Complex64::from_polar(1.0, p)), StftConfig::default(), 16000).unwrap()
    }

    fn grid_with(bins: Vec<usize>) -> HarmonicGrid {
        HarmonicGrid { f0_hz: vec![100.0], bins: vec![bins] }
    }

    #[test]
    fn identical_phases_are_fixed_points() {
        let mut phase = Array2::zeros((1, 513));
        let g = grid_with(vec![10, 20, 30, 40]);
        for &b in &g.bins[0] {
            phase[[0, b]] = 0.7;
        }
        let out = ihpr_harmonic_update(&state(phase.clone()), &g, &spectrum(&phase), 0.01).unwrap();
        assert!((circular_mean([0.7; 4]) - 0.7).abs() < 1e-15);
        for (a, b) in out.phase.iter().zip(phase.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_has_zero_mean() {
        for alpha in [0.1, 0.8, 1.5] {
            assert!(circular_mean([alpha, -alpha]).abs() < 1e-15);
        }
    }

    #[test]
    fn circular_mean_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let h = rng.random_range(1..=20);
            let theta: Vec<f64> = (0..h).map(|_| rng.random_range(-PI..PI)).collect();
            let score = |phi: f64| theta.iter().map(|t| (phi - t).cos()).sum::<f64>();
            let best = (0..3600).map(|i| -PI + i as f64 * 2.0 * PI / 3600.0).max_by(|a, b| score(*a).total_cmp(&score(*b))).unwrap();
            let m = circular_mean(theta.iter().copied());
            assert!(score(m) >= score(best) - 1e-12);
            assert!(wrap_phase(m - best).abs() <= PI / 1800.0 + 1e-12);
        }
    }

    #[test]
    fn harmonic_update_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid_with(vec![7, 14, 21, 28, 35]);
        let phase = Array2::from_shape_fn((1, 513), |_| rng.random_range(-PI..PI));
        let delta = 0.9;
        let rotated = phase.mapv(|p| wrap_phase(p + delta));
        let a = ihpr_harmonic_update(&state(phase.clone()), &g, &spectrum(&phase), 0.3).unwrap();
        let b = ihpr_harmonic_update(&state(rotated.clone()), &g, &spectrum(&rotated), 0.3).unwrap();
        for &k in &g.bins[0] {
            assert!(wrap_phase(b.phase[[0, k]] - a.phase[[0, k]] - delta).abs() < 1e-9);
        }
        // Non-harmonic bins are not touched.
        assert_eq!(a.phase[[0, 8]], phase[[0, 8]]);
        // Unvoiced frames are skipped.
        let skip = ihpr_harmonic_update(&state(phase.clone()), &HarmonicGrid::unvoiced(1), &spectrum(&phase), 0.3).unwrap();
        assert_eq!(skip.phase, phase);
    }

    #[test]
    fn smoothing_special_cases() {
        let g = grid_with(vec![10, 20, 30]);
        let mag = Array2::from_elem((1, 513), 2.0);
        let flat = Array2::from_elem((1, 513), 0.4);
        let out = ihpr_smooth(&state(flat.clone()), &mag, &g, 0.1).unwrap();
        assert_eq!(out.phase, flat);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random = Array2::from_shape_fn((1, 513), |_| rng.random_range(-PI..PI));
        assert_eq!(ihpr_smooth(&state(random.clone()), &mag, &g, 0.0).unwrap().phase, random);
    }

    #[test]
    fn smoothing_flattens_a_phase_ramp() {
        let g = grid_with(vec![10, 20, 30, 40, 50]);
        let mag = Array2::from_elem((1, 513), 1.0);
        for slope in [0.2, 1.0, 2.5] {
            let ramp = Array2::from_shape_fn((1, 513), |(_, f)| wrap_phase(slope * f as f64));
            let roughness = |p: &Array2<f64>| g.bins[0].iter().map(|&b| wrap_phase(p[[0, b]] - p[[0, b - 1]]).powi(2)).sum::<f64>();
            let out = ihpr_smooth(&state(ramp.clone()), &mag, &g, 0.1).unwrap();
            assert!(roughness(&out.phase) < roughness(&ramp), "slope {slope}");
        }
    }

    #[test]
    fn loss_special_cases() {
        let g = grid_with(vec![3, 6]);
        let target = Array2::from_elem((1, 513), 1.0);
        let phase = Array2::from_elem((1, 513), 0.2);
        let w = vec![1.0; 513];
        assert_eq!(perceptual_loss_terms(&target, &target, &phase, &phase, &g, &w, 0.01).unwrap(), 0.0);
        let mut other = target.clone();
        other[[0, 100]] += 0.3;
        let l = perceptual_loss_terms(&target, &other, &phase, &phase, &g, &w, 0.0).unwrap();
        assert!((l - 0.09).abs() < 1e-15);
        let w2 = vec![2.0; 513];
        let l2 = perceptual_loss_terms(&target, &other, &phase, &phase, &g, &w2, 0.0).unwrap();
        assert_eq!(l2, 2.0 * l);
        let mut moved = phase.clone();
        moved[[0, 3]] += 0.5;
        let lp = perceptual_loss_terms(&target, &target, &moved, &phase, &g, &w, 0.1).unwrap();
        assert!((lp - 0.1 * 0.25).abs() < 1e-12);
    }

    fn vowel(f0: f64, seconds: f64, phase_seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(phase_seed);
        let offsets: Vec<f64> = (0..5).map(|_| rng.random_range(-PI..PI)).collect();
        let n = (seconds * 16000.0) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                (1..=5).map(|h| (2.0 * PI * h as f64 * f0 * t + offsets[h - 1]).sin() / h as f64).sum::<f64>()
            })
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn unvoiced_track_reduces_to_griffin_lim() {
        let cfg = VocoderConfig { ihpr_iterations: 6, ..VocoderConfig::default() };
        let mag = stft(&vowel(150.0, 0.3, 1), &cfg.stft).unwrap().magnitude();
        let out = ihpr_vocode(&mag, &vec![0.0; mag.nrows()], &cfg).unwrap();
        let gl = super::super::griffin_lim_iterations(&mag, &cfg, out.total_iterations(&cfg)).unwrap();
        assert_eq!(out.waveform, gl.waveform);
    }

    #[test]
    fn improves_harmonicity_over_griffin_lim() {
        let cfg = VocoderConfig::default();
        let mag = stft(&vowel(150.0, 0.5, 2), &cfg.stft).unwrap().magnitude();
        let f0 = vec![150.0; mag.nrows()];
        let out = ihpr_vocode(&mag, &f0, &cfg).unwrap();
        let gl = super::super::griffin_lim_iterations(&mag, &cfg, out.total_iterations(&cfg)).unwrap();
        let h_ihpr = hnr(&out.waveform, &f0).unwrap();
        let h_gl = hnr(&gl.waveform, &f0).unwrap();
        assert!(h_ihpr >= h_gl, "ihpr {h_ihpr} gl {h_gl}");
        let tail = &out.loss_curve[1.min(out.loss_curve.len())..];
        for w in tail.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "{:?}", out.loss_curve);
        }
        assert!(out.final_state.phase.iter().all(|p| *p > -PI && *p <= PI));
    }

    #[test]
    fn rejects_mismatched_track() {
        let cfg = VocoderConfig::default();
        assert!(ihpr_vocode(&Array2::zeros((5, 513)), &[0.0; 4], &cfg).is_err());
    }
}
