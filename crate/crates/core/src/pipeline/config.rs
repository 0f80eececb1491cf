use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dsp::{FrameGrid, MelConfig, StftConfig};
use crate::error::{Error, Result};
use crate::features::{BandAssignment, FeatureConfig};
use crate::metrics::MCD_COEFFICIENTS;
use crate::model::{TrainingConfig, TransformerConfig, AE_HIDDEN, AE_LATENT, RIDGE_LAMBDA};
use crate::preprocess::VadParams;
use crate::vocoder::{FrequencyWeighting, VocoderConfig};

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub trials: usize,
    pub trial_seconds: f64,
    pub channels: usize,
    /// Channels `0..coupled_channels` carry theta-gamma coupling.
    pub coupled_channels: usize,
    pub neural_fs: u32,
    pub audio_fs: u32,
    pub coupling_strength: f64,
    pub theta_hz: f64,
    pub gamma_hz: f64,
    pub f0_base_hz: f64,
    pub vibrato_hz: f64,
    pub vibrato_depth_hz: f64,
    pub harmonics: usize,
    /// Standard deviation of white noise added to the audio.
    pub noise_level: f64,
    /// Standard deviation of white noise added to every neural channel.
    pub neural_noise: f64,
    pub mains_amplitude: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            trials: 10,
            trial_seconds: 4.0,
            channels: 16,
            coupled_channels: 8,
            neural_fs: 1024,
            audio_fs: 16000,
            coupling_strength: 1.0,
            theta_hz: 6.0,
            gamma_hz: 125.0,
            f0_base_hz: 120.0,
            vibrato_hz: 5.0,
            vibrato_depth_hz: 3.0,
            harmonics: 30,
            noise_level: 0.01,
            neural_noise: 0.02,
            mains_amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    pub mains_hz: f64,
    /// Mains harmonics are notched up to this frequency.
    pub notch_max_hz: f64,
    pub max_lag_ms: f64,
    pub vad: VadParams,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            bandpass_lo_hz: 0.5,
            bandpass_hi_hz: 170.0,
            mains_hz: 50.0,
            notch_max_hz: 170.0,
            max_lag_ms: 500.0,
            vad: VadParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub ae_hidden: usize,
    pub ae_latent: usize,
    pub transformer: TransformerConfig,
    pub ridge_lambda: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { ae_hidden: AE_HIDDEN, ae_latent: AE_LATENT, transformer: TransformerConfig::default(), ridge_lambda: RIDGE_LAMBDA }
    }
}

/// Every setting of a pipeline run. Read from a flat `key = value` file;
/// [`PipelineConfig::to_text`] renders the full key set.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SyntheticSpec,
    pub preprocess: PreprocessConfig,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainingConfig,
    pub vocoder: VocoderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            synth: SyntheticSpec::default(),
            preprocess: PreprocessConfig::default(),
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            train: TrainingConfig::default(),
            vocoder: VocoderConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl PipelineConfig {
    /// Parses configuration text. Blank lines and `#` comments are ignored;
    /// unknown and repeated keys are errors. The result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| config_err(format!("line {}: expected 'key = value'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(config_err(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Assigns one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key;
        match key {
            "seed" => {
                self.seed = parse(k, v)?;
                self.train.seed = self.seed;
                self.model.transformer.seed = self.seed;
            }
            "out_dir" => self.out_dir = PathBuf::from(v),

            "synth.trials" => self.synth.trials = parse(k, v)?,
            "synth.trial_seconds" => self.synth.trial_seconds = parse(k, v)?,
            "synth.channels" => self.synth.channels = parse(k, v)?,
            "synth.coupled_channels" => self.synth.coupled_channels = parse(k, v)?,
            "synth.neural_fs" => self.synth.neural_fs = parse(k, v)?,
            "synth.audio_fs" => {
                self.synth.audio_fs = parse(k, v)?;
                self.vocoder.sample_rate_hz = self.synth.audio_fs;
            }
            "synth.coupling_strength" => self.synth.coupling_strength = parse(k, v)?,
            "synth.theta_hz" => self.synth.theta_hz = parse(k, v)?,
            "synth.gamma_hz" => self.synth.gamma_hz = parse(k, v)?,
            "synth.f0_base_hz" => self.synth.f0_base_hz = parse(k, v)?,
            "synth.vibrato_hz" => self.synth.vibrato_hz = parse(k, v)?,
            "synth.vibrato_depth_hz" => self.synth.vibrato_depth_hz = parse(k, v)?,
            "synth.harmonics" => self.synth.harmonics = parse(k, v)?,
            "synth.noise_level" => self.synth.noise_level = parse(k, v)?,
            "synth.neural_noise" => self.synth.neural_noise = parse(k, v)?,
            "synth.mains_amplitude" => self.synth.mains_amplitude = parse(k, v)?,

            "preprocess.bandpass_lo_hz" => self.preprocess.bandpass_lo_hz = parse(k, v)?,
            "preprocess.bandpass_hi_hz" => self.preprocess.bandpass_hi_hz = parse(k, v)?,
            "preprocess.mains_hz" => self.preprocess.mains_hz = parse(k, v)?,
            "preprocess.notch_max_hz" => self.preprocess.notch_max_hz = parse(k, v)?,
            "preprocess.max_lag_ms" => self.preprocess.max_lag_ms = parse(k, v)?,
            "preprocess.vad_frame_ms" => self.preprocess.vad.frame_ms = parse(k, v)?,
            "preprocess.vad_hop_ms" => self.preprocess.vad.hop_ms = parse(k, v)?,
            "preprocess.vad_threshold_factor" => self.preprocess.vad.threshold_factor = parse(k, v)?,
            "preprocess.vad_min_frames" => self.preprocess.vad.min_frames = parse(k, v)?,

            "stft.window_len" => {
                self.stft.window_len = parse(k, v)?;
                self.vocoder.stft = self.stft;
            }
            "stft.hop" => {
                self.stft.hop = parse(k, v)?;
                self.vocoder.stft = self.stft;
            }
            "stft.fft_size" => {
                self.stft.fft_size = parse(k, v)?;
                self.vocoder.stft = self.stft;
            }

            "mel.bins" => self.mel.mel_bins = parse(k, v)?,
            "mel.fmin_hz" => self.mel.fmin_hz = parse(k, v)?,
            "mel.fmax_hz" => self.mel.fmax_hz = parse(k, v)?,

            "features.wavelet_levels" => self.features.wavelet_levels = parse(k, v)?,
            "features.pac_window_sec" => self.features.pac_window_sec = parse(k, v)?,

            "model.ae_hidden" => self.model.ae_hidden = parse(k, v)?,
            "model.ae_latent" => self.model.ae_latent = parse(k, v)?,
            "model.d_model" => self.model.transformer.d_model = parse(k, v)?,
            "model.heads" => self.model.transformer.heads = parse(k, v)?,
            "model.layers" => self.model.transformer.layers = parse(k, v)?,
            "model.ffn_dim" => self.model.transformer.ffn_dim = parse(k, v)?,
            "model.dropout" => self.model.transformer.dropout = parse(k, v)?,
            "model.max_seq_len" => self.model.transformer.max_seq_len = parse(k, v)?,
            "model.ridge_lambda" => self.model.ridge_lambda = parse(k, v)?,

            "train.lr" => self.train.adam.lr = parse(k, v)?,
            "train.epochs" => self.train.epochs = parse(k, v)?,
            "train.batch_size" => self.train.batch_size = parse(k, v)?,
            "train.ae_epochs" => self.train.ae_epochs = parse(k, v)?,
            "train.ae_batch_frames" => self.train.ae_batch_frames = parse(k, v)?,
            "train.folds" => self.train.folds = parse(k, v)?,
            "train.finetune_encoder" => self.train.finetune_encoder = parse(k, v)?,

            "vocoder.ihpr_iterations" => self.vocoder.ihpr_iterations = parse(k, v)?,
            "vocoder.warmup_iterations" => self.vocoder.warmup_iterations = parse(k, v)?,
            "vocoder.max_harmonics" => self.vocoder.max_harmonics = parse(k, v)?,
            "vocoder.lambda" => self.vocoder.lambda = parse(k, v)?,
            "vocoder.gamma" => self.vocoder.gamma = parse(k, v)?,
            "vocoder.convergence_tol" => self.vocoder.convergence_tol = parse(k, v)?,
            "vocoder.band_lo_hz" => self.vocoder.weighting.band_lo_hz = parse(k, v)?,
            "vocoder.band_hi_hz" => self.vocoder.weighting.band_hi_hz = parse(k, v)?,
            "vocoder.edge_weight" => self.vocoder.weighting.edge_weight = parse(k, v)?,
            _ => return Err(config_err(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Sets the root seed and propagates it to the training and model streams.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.model.transformer.seed = seed;
        self
    }

    /// Renders every key; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let p = &self.preprocess;
        let m = &self.model;
        let t = &self.train;
        let v = &self.vocoder;
        let w: &FrequencyWeighting = &v.weighting;
        let entries: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("synth.trials", s.trials.to_string()),
            ("synth.trial_seconds", s.trial_seconds.to_string()),
            ("synth.channels", s.channels.to_string()),
            ("synth.coupled_channels", s.coupled_channels.to_string()),
            ("synth.neural_fs", s.neural_fs.to_string()),
            ("synth.audio_fs", s.audio_fs.to_string()),
            ("synth.coupling_strength", s.coupling_strength.to_string()),
            ("synth.theta_hz", s.theta_hz.to_string()),
            ("synth.gamma_hz", s.gamma_hz.to_string()),
            ("synth.f0_base_hz", s.f0_base_hz.to_string()),
            ("synth.vibrato_hz", s.vibrato_hz.to_string()),
            ("synth.vibrato_depth_hz", s.vibrato_depth_hz.to_string()),
            ("synth.harmonics", s.harmonics.to_string()),
            ("synth.noise_level", s.noise_level.to_string()),
            ("synth.neural_noise", s.neural_noise.to_string()),
            ("synth.mains_amplitude", s.mains_amplitude.to_string()),
            ("preprocess.bandpass_lo_hz", p.bandpass_lo_hz.to_string()),
            ("preprocess.bandpass_hi_hz", p.bandpass_hi_hz.to_string()),
            ("preprocess.mains_hz", p.mains_hz.to_string()),
            ("preprocess.notch_max_hz", p.notch_max_hz.to_string()),
            ("preprocess.max_lag_ms", p.max_lag_ms.to_string()),
            ("preprocess.vad_frame_ms", p.vad.frame_ms.to_string()),
            ("preprocess.vad_hop_ms", p.vad.hop_ms.to_string()),
            ("preprocess.vad_threshold_factor", p.vad.threshold_factor.to_string()),
            ("preprocess.vad_min_frames", p.vad.min_frames.to_string()),
            ("stft.window_len", self.stft.window_len.to_string()),
            ("stft.hop", self.stft.hop.to_string()),
            ("stft.fft_size", self.stft.fft_size.to_string()),
            ("mel.bins", self.mel.mel_bins.to_string()),
            ("mel.fmin_hz", self.mel.fmin_hz.to_string()),
            ("mel.fmax_hz", self.mel.fmax_hz.to_string()),
            ("features.wavelet_levels", self.features.wavelet_levels.to_string()),
            ("features.pac_window_sec", self.features.pac_window_sec.to_string()),
            ("model.ae_hidden", m.ae_hidden.to_string()),
            ("model.ae_latent", m.ae_latent.to_string()),
            ("model.d_model", m.transformer.d_model.to_string()),
            ("model.heads", m.transformer.heads.to_string()),
            ("model.layers", m.transformer.layers.to_string()),
            ("model.ffn_dim", m.transformer.ffn_dim.to_string()),
            ("model.dropout", m.transformer.dropout.to_string()),
            ("model.max_seq_len", m.transformer.max_seq_len.to_string()),
            ("model.ridge_lambda", m.ridge_lambda.to_string()),
            ("train.lr", t.adam.lr.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.ae_epochs", t.ae_epochs.to_string()),
            ("train.ae_batch_frames", t.ae_batch_frames.to_string()),
            ("train.folds", t.folds.to_string()),
            ("train.finetune_encoder", t.finetune_encoder.to_string()),
            ("vocoder.ihpr_iterations", v.ihpr_iterations.to_string()),
            ("vocoder.warmup_iterations", v.warmup_iterations.to_string()),
            ("vocoder.max_harmonics", v.max_harmonics.to_string()),
            ("vocoder.lambda", v.lambda.to_string()),
            ("vocoder.gamma", v.gamma.to_string()),
            ("vocoder.convergence_tol", v.convergence_tol.to_string()),
            ("vocoder.band_lo_hz", w.band_lo_hz.to_string()),
            ("vocoder.band_hi_hz", w.band_hi_hz.to_string()),
            ("vocoder.edge_weight", w.edge_weight.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            writeln!(out, "{k} = {v}").expect("writing to a String");
        }
        out
    }

    /// Cross-stage consistency checks, run before any computation.
    pub fn validate(&self) -> Result<()> {
        let s = &self.synth;
        if s.trials == 0 || s.channels == 0 || s.harmonics == 0 {
            return Err(config_err("synth.trials, synth.channels and synth.harmonics must be positive"));
        }
        if s.coupled_channels > s.channels {
            return Err(config_err(format!("{} coupled channels exceed {} channels", s.coupled_channels, s.channels)));
        }
        if !(0.0..=1.0).contains(&s.coupling_strength) {
            return Err(config_err(format!("coupling strength {} outside [0, 1]", s.coupling_strength)));
        }
        if !(s.trial_seconds >= 2.0 && s.trial_seconds.is_finite()) {
            return Err(config_err("synth.trial_seconds must be at least 2 (alignment and coupling need 2 s)"));
        }
        let positive = [s.theta_hz, s.gamma_hz, s.f0_base_hz, s.vibrato_hz];
        let non_negative = [s.vibrato_depth_hz, s.noise_level, s.neural_noise, s.mains_amplitude];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(config_err("synthetic frequencies must be positive and noise levels non-negative"));
        }
        if s.gamma_hz >= f64::from(s.neural_fs) / 2.0 {
            return Err(config_err(format!("synth.gamma_hz {} is above the neural Nyquist frequency", s.gamma_hz)));
        }

        self.stft.validate().map_err(|e| config_err(format!("stft: {e}")))?;
        let grid = FrameGrid::default();
        if s.audio_fs == 0 || s.neural_fs == 0 {
            return Err(config_err("sampling rates must be positive"));
        }
        let frame_rate = f64::from(s.audio_fs) / self.stft.hop as f64;
        if (frame_rate - f64::from(grid.rate_hz)).abs() > 1e-9 {
            return Err(config_err(format!(
                "frame-rate mismatch: audio STFT runs at {frame_rate} frames/s but features use {} frames/s",
                grid.rate_hz
            )));
        }
        if self.stft.window_len != grid.frame_len(s.audio_fs) {
            return Err(config_err(format!(
                "frame-length mismatch: STFT window {} samples, feature frames {} samples",
                self.stft.window_len,
                grid.frame_len(s.audio_fs)
            )));
        }
        if self.vocoder.stft != self.stft || self.vocoder.sample_rate_hz != s.audio_fs {
            return Err(config_err("vocoder framing differs from the analysis STFT"));
        }
        if self.mel.mel_bins <= MCD_COEFFICIENTS {
            return Err(config_err(format!("mel.bins must exceed the {MCD_COEFFICIENTS} cepstral coefficients")));
        }
        crate::dsp::mel_filterbank(s.audio_fs, self.stft.fft_size, &self.mel).map_err(|e| config_err(format!("mel: {e}")))?;

        let p = &self.preprocess;
        let neural_nyquist = f64::from(s.neural_fs) / 2.0;
        if !(p.bandpass_lo_hz > 0.0 && p.bandpass_lo_hz < p.bandpass_hi_hz && p.bandpass_hi_hz < neural_nyquist) {
            return Err(config_err(format!(
                "bandpass [{}, {}] Hz must satisfy 0 < lo < hi < {neural_nyquist}",
                p.bandpass_lo_hz, p.bandpass_hi_hz
            )));
        }
        if !(p.mains_hz > 0.0 && p.mains_hz < neural_nyquist && p.max_lag_ms >= 0.0) {
            return Err(config_err("mains frequency must lie below the neural Nyquist and max_lag_ms be non-negative"));
        }
        if !(p.vad.frame_ms > 0.0 && p.vad.hop_ms > 0.0 && p.vad.threshold_factor > 0.0) {
            return Err(config_err("VAD frame, hop and threshold must be positive"));
        }

        if self.features.wavelet_levels == 0 || !(self.features.pac_window_sec > 0.0) {
            return Err(config_err("features.wavelet_levels and features.pac_window_sec must be positive"));
        }
        BandAssignment::for_rate(f64::from(s.neural_fs), self.features.wavelet_levels)
            .map_err(|e| config_err(format!("features: {e}")))?;

        let m = &self.model;
        if m.ae_hidden == 0 || m.ae_latent == 0 || !(m.ridge_lambda > 0.0) {
            return Err(config_err("autoencoder sizes must be positive and ridge_lambda positive"));
        }
        m.transformer.validate()?;
        self.train.validate()?;
        if self.train.epochs == 0 || self.train.ae_epochs == 0 || self.train.batch_size == 0 || self.train.ae_batch_frames == 0 {
            return Err(config_err("epoch counts and batch sizes must be positive"));
        }
        if self.train.folds > s.trials {
            return Err(config_err(format!("{} folds need at least as many trials, got {}", self.train.folds, s.trials)));
        }
        self.vocoder.validate()?;
        if self.vocoder.ihpr_iterations == 0 {
            return Err(config_err("vocoder.ihpr_iterations must be positive"));
        }
        Ok(())
    }
}
