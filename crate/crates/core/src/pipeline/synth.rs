use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::SyntheticSpec;
use crate::dsp::{FrameGrid, Waveform};
use crate::error::Result;
use crate::preprocess::MultiChannelRecording;
use crate::rng::{stream, stream_rng};

const COMPONENTS: usize = 6;
const LOGISTIC_GAIN: f64 = 2.5;
const VOICING_ONSET: f64 = 0.45;
const VOICING_RAMP: f64 = 0.1;
const F0_ARTICULATION_HZ: f64 = 15.0;
const AUDIO_PEAK: f64 = 0.8;
const BETA_HZ: f64 = 20.0;

/// Slowly varying articulation trajectory in (0, 1): a logistic squashing of
/// a unit-variance sum of random low-frequency sinusoids.
#[derive(Debug, Clone, PartialEq)]
pub struct Articulation {
    components: Vec<(f64, f64, f64)>,
}

impl Articulation {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let amp = (2.0 / COMPONENTS as f64).sqrt();
        let components = (0..COMPONENTS)
            .map(|_| (amp, rng.random_range(0.3..3.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        Self { components }
    }

    pub fn at(&self, t: f64) -> f64 {
        let z: f64 = self.components.iter().map(|(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum();
        1.0 / (1.0 + (-LOGISTIC_GAIN * z).exp())
    }

    /// Voicing gate in [0, 1].
    pub fn voicing(&self, t: f64) -> f64 {
        ((self.at(t) - VOICING_ONSET) / VOICING_RAMP).clamp(0.0, 1.0)
    }
}

/// Ground truth recorded next to every generated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub trial: usize,
    pub coupling_strength: f64,
    /// Analytic coupling of the envelope `(1 - s) + s (1 + cos phi) / 2`.
    pub expected_pac: f64,
    pub coupled_channels: Vec<usize>,
    /// Lead of each channel's gamma amplitude over the articulation, seconds.
    pub channel_lead_sec: Vec<f64>,
    /// Per-frame F0 on the 100 Hz grid; 0 unless the whole frame is voiced.
    pub f0_hz: Vec<f64>,
    /// Sample ranges `[onset, offset)` of the audio where voicing is fully on.
    pub voiced_segments: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrial {
    pub neural: MultiChannelRecording,
    pub audio: Waveform,
    pub metadata: TrialMetadata,
}

pub fn expected_pac(coupling_strength: f64) -> f64 {
    coupling_strength / (4.0 - 2.0 * coupling_strength)
}

fn f0_at(spec: &SyntheticSpec, a: f64, vibrato_phase: f64, t: f64) -> f64 {
    spec.f0_base_hz
        + spec.vibrato_depth_hz * (2.0 * PI * spec.vibrato_hz * t + vibrato_phase).sin()
        + F0_ARTICULATION_HZ * (a - 0.5)
}

fn lorentzian(f: f64, center: f64, bandwidth: f64) -> f64 {
    1.0 / (1.0 + ((f - center) / bandwidth).powi(2))
}

fn harmonic_gain(h: usize, f: f64, a: f64) -> f64 {
    let f1 = 350.0 + 450.0 * a;
    let f2 = 1000.0 + 1200.0 * a;
    (0.3 + lorentzian(f, f1, 90.0) + lorentzian(f, f2, 120.0)) / (h as f64).powf(0.7)
}

fn runs(flags: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, on) in flags.enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
        n = i + 1;
    }
    if let Some(s) = start {
        out.push((s, n));
    }
    out
}

/// Generates trial `index` of a synthetic dataset; the result depends only
/// on `(root_seed, index, spec)`.
pub fn generate_trial(spec: &SyntheticSpec, root_seed: u64, index: usize) -> Result<SyntheticTrial> {
    let mut rng = stream_rng(root_seed, stream::DATA, index as u64);
    let art = Articulation::random(&mut rng);
    let vibrato_phase = rng.random_range(0.0..2.0 * PI);

    // audio: harmonic source shaped by two articulation-driven resonances
    let afs = f64::from(spec.audio_fs);
    let n_audio = (spec.trial_seconds * afs).round() as usize;
    let nyquist = afs / 2.0;
    let mut phase = 0.0;
    let mut audio = Vec::with_capacity(n_audio);
    let mut voicing = Vec::with_capacity(n_audio);
    let mut f0_track = Vec::with_capacity(n_audio);
    for i in 0..n_audio {
        let t = i as f64 / afs;
        let a = art.at(t);
        let v = art.voicing(t);
        let f0 = f0_at(spec, a, vibrato_phase, t);
        let mut x = 0.0;
        if v > 0.0 {
            for h in 1..=spec.harmonics {
                let f = h as f64 * f0;
                if f >= nyquist {
                    break;
                }
                x += harmonic_gain(h, f, a) * (h as f64 * phase).sin();
            }
        }
        audio.push(v * x);
        voicing.push(v);
        f0_track.push(f0);
        phase = (phase + 2.0 * PI * f0 / afs) % (2.0 * PI);
    }
    let peak = audio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        audio.iter_mut().for_each(|v| *v *= AUDIO_PEAK / peak);
    }
    for v in audio.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += spec.noise_level * z;
    }

    let grid = FrameGrid::default();
    let frame_len = grid.frame_len(spec.audio_fs);
    let f0_frames: Vec<f64> = (0..grid.frame_count(n_audio, spec.audio_fs))
        .map(|t| {
            let start = grid.start(t, spec.audio_fs);
            let end = start + frame_len;
            if end <= n_audio && voicing[start..end].iter().all(|v| *v >= 1.0) {
                f0_track[start + frame_len / 2]
            } else {
                0.0
            }
        })
        .collect();
    let voiced_segments = runs(voicing.iter().map(|v| *v >= 1.0));

    // neural channels
    let nfs = f64::from(spec.neural_fs);
    let n_neural = (spec.trial_seconds * nfs).round() as usize;
    let s = spec.coupling_strength;
    let coupled: Vec<usize> = (0..spec.coupled_channels).collect();
    let mut data = Array2::zeros((spec.channels, n_neural));
    let mut leads = Vec::with_capacity(spec.channels);
    for c in 0..spec.channels {
        let theta_offset = rng.random_range(0.0..2.0 * PI);
        let beta_phase = rng.random_range(0.0..2.0 * PI);
        let gamma_phase = rng.random_range(0.0..2.0 * PI);
        let mains_phase = rng.random_range(0.0..2.0 * PI);
        let gain = rng.random_range(0.5..1.5);
        let lead = rng.random_range(0.0..0.1);
        leads.push(lead);
        let is_coupled = c < spec.coupled_channels;
        let mut theta_phase = theta_offset;
        for i in 0..n_neural {
            let t = i as f64 / nfs;
            let a = art.at(t);
            let theta = theta_phase.cos();
            let beta = 0.4 * (1.2 - a) * (2.0 * PI * BETA_HZ * t + beta_phase).sin();
            let env = if is_coupled { (1.0 - s) + s * (1.0 + theta_phase.cos()) / 2.0 } else { 1.0 };
            let gamma = (0.2 + gain * art.at(t + lead)) * env * (2.0 * PI * spec.gamma_hz * t + gamma_phase).cos();
            let mains = spec.mains_amplitude * (2.0 * PI * 50.0 * t + mains_phase).sin();
            let z: f64 = StandardNormal.sample(&mut rng);
            data[[c, i]] = theta + beta + gamma + mains + spec.neural_noise * z;
            // theta rate follows the articulation within the theta band
            theta_phase = (theta_phase + 2.0 * PI * (spec.theta_hz + (a - 0.5)) / nfs) % (2.0 * PI);
        }
    }

    Ok(SyntheticTrial {
        neural: MultiChannelRecording::with_default_labels(data, spec.neural_fs)?,
        audio: Waveform::new(audio, spec.audio_fs)?,
        metadata: TrialMetadata {
            trial: index,
            coupling_strength: s,
            expected_pac: expected_pac(s),
            coupled_channels: coupled,
            channel_lead_sec: leads,
            f0_hz: f0_frames,
            voiced_segments,
        },
    })
}
