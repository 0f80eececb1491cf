use std::path::PathBuf;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::FoldModel;
use super::config::PipelineConfig;
use super::folds::FoldAssignment;
use super::store::Store;
use super::synth::{generate_trial, TrialMetadata};
use crate::dsp::{mel_filterbank, mel_spectrogram, MelScale, MelSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::features::{extract_features, NormalizationStats};
use crate::metrics::{hnr, mcd, mel_cepstrum, pearson, stoi_simple, write_table_csv, write_trials_jsonl, MetricReport, TrialMetrics};
use crate::model::{ae_train_sized, linreg_fit, linreg_predict, predict_mel, train_predictor, TrainingConfig, TrainingPair};
use crate::preprocess::{align, bandpass, notch, vad, zscore_channels, MultiChannelRecording};
use crate::rng::derive_seed;
use crate::vocoder::{bootstrap_f0, griffin_lim_iterations, ihpr_vocode, mel_to_magnitude};

pub const MODELS: [&str; 2] = ["linreg", "transformer"];
pub const VOCODERS: [&str; 2] = ["griffin_lim", "ihpr"];

pub fn trial_name(i: usize) -> String {
    format!("trial_{i:03}")
}

fn fold_dir(fold: usize) -> PathBuf {
    PathBuf::from(format!("models/fold_{fold:02}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub seed: u64,
    pub trials: usize,
    pub channels: usize,
    pub neural_fs: u32,
    pub audio_fs: u32,
    pub clipped_samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    /// `None` when the envelopes are too flat to align.
    pub lag_ms: Option<f64>,
    pub correlation_peak: Option<f64>,
    pub vad_segments: Vec<(usize, usize)>,
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub training_trials: Vec<usize>,
    pub held_out_trials: Vec<usize>,
    pub ae_final_mse: f64,
    pub predictor_first_loss: f64,
    pub predictor_last_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocodeSummary {
    pub model: String,
    pub trial: usize,
    pub iterations: usize,
    pub clipped_griffin_lim: usize,
    pub clipped_ihpr: usize,
}

/// Scores one predicted log-mel spectrogram and its vocoded waveform.
///
/// Correlation, cepstral distortion and intelligibility compare the predicted
/// and reference log-mel frames; HNR is measured on the waveform using the
/// reference F0 track and is `None` when no frame is voiced.
pub fn score_trial(
    trial: &str,
    model: &str,
    reference: &Array2<f64>,
    predicted: &Array2<f64>,
    waveform: &Waveform,
    reference_f0: &[f64],
) -> Result<TrialMetrics> {
    let frames = reference.nrows().min(predicted.nrows());
    let y = reference.slice(s![..frames, ..]).to_owned();
    let y_hat = predicted.slice(s![..frames, ..]).to_owned();
    let hnr_db = match hnr(waveform, reference_f0) {
        Ok(v) => Some(v),
        Err(Error::HnrUndefined) => None,
        Err(e) => return Err(e),
    };
    Ok(TrialMetrics {
        trial: trial.to_string(),
        model: model.to_string(),
        pc: pearson(&y, &y_hat)?,
        mcd_db: mcd(&mel_cepstrum(&y)?, &mel_cepstrum(&y_hat)?)?,
        stoi: stoi_simple(&y, &y_hat)?,
        hnr_db,
    })
}

fn truncate_rows(m: &Array2<f64>, rows: usize) -> Array2<f64> {
    m.slice(s![..rows, ..]).to_owned()
}

/// One output directory plus the configuration that produced it.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    store: Store,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let store = Store::new(config.out_dir.clone());
        Ok(Self { config, store })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn trials(&self) -> usize {
        self.config.synth.trials
    }

    fn meta(&self, store: &Store, i: usize) -> Result<TrialMetadata> {
        store.read_json(format!("data/{}/meta.json", trial_name(i)))
    }

    /// Generates the synthetic trials.
    pub fn synth_data(&self) -> Result<DataManifest> {
        let cfg = &self.config;
        let clipped = (0..self.trials())
            .into_par_iter()
            .map(|i| -> Result<usize> {
                let trial = generate_trial(&cfg.synth, cfg.seed, i)?;
                let dir = PathBuf::from("data").join(trial_name(i));
                self.store.write_matrix(dir.join("neural.nvtf"), &trial.neural.data)?;
                self.store.write_json(dir.join("meta.json"), &trial.metadata)?;
                self.store.write_wav(dir.join("audio.wav"), &trial.audio)
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = DataManifest {
            seed: cfg.seed,
            trials: self.trials(),
            channels: cfg.synth.channels,
            neural_fs: cfg.synth.neural_fs,
            audio_fs: cfg.synth.audio_fs,
            clipped_samples: clipped,
        };
        self.store.write_json("data/manifest.json", &manifest)?;
        // the output location is left out so identical runs in different directories match
        let text: String = cfg.to_text().lines().filter(|l| !l.starts_with("out_dir")).map(|l| format!("{l}\n")).collect();
        self.store.write_text("config.txt", &text)?;
        Ok(manifest)
    }

    /// Notch, bandpass and per-channel z-scoring of the neural data;
    /// envelope alignment and voice activity are reported, not applied.
    pub fn preprocess(&self) -> Result<Vec<PreprocessReport>> {
        let cfg = &self.config;
        let p = &cfg.preprocess;
        (0..self.trials())
            .into_par_iter()
            .map(|i| -> Result<PreprocessReport> {
                let name = trial_name(i);
                let raw = self.store.read_matrix(format!("data/{name}/neural.nvtf"))?;
                let rec = MultiChannelRecording::with_default_labels(raw, cfg.synth.neural_fs)?;
                let audio = self.store.read_wav(format!("data/{name}/audio.wav"))?;
                let filtered = bandpass(&notch(&rec, p.mains_hz, p.notch_max_hz)?, p.bandpass_lo_hz, p.bandpass_hi_hz)?;
                let (clean, stats) = zscore_channels(&filtered)?;
                let alignment = match align(&clean, &audio, p.max_lag_ms) {
                    Ok(a) => Some(a),
                    Err(Error::AlignmentUndefined(_)) => None,
                    Err(e) => return Err(e),
                };
                let report = PreprocessReport {
                    lag_ms: alignment.map(|a| a.lag_ms),
                    correlation_peak: alignment.map(|a| a.correlation_peak),
                    vad_segments: vad(&audio, &p.vad)?.0,
                    channel_mean: stats.mean,
                    channel_std: stats.std,
                };
                self.store.write_matrix(format!("preprocessed/{name}/neural.nvtf"), &clean.data)?;
                self.store.write_json(format!("preprocessed/{name}/report.json"), &report)?;
                Ok(report)
            })
            .collect()
    }

    /// Feature matrices, prosody-embedding inputs and reference log-mel
    /// spectrograms, truncated to a common frame count per trial.
    pub fn features(&self) -> Result<Vec<usize>> {
        let cfg = &self.config;
        let frames = (0..self.trials())
            .into_par_iter()
            .map(|i| -> Result<(usize, Vec<String>)> {
                let name = trial_name(i);
                let data = self.store.read_matrix(format!("preprocessed/{name}/neural.nvtf"))?;
                let rec = MultiChannelRecording::with_default_labels(data, cfg.synth.neural_fs)?;
                let set = extract_features(&rec, &cfg.features)?;
                let audio = self.store.read_wav(format!("data/{name}/audio.wav"))?;
                let mel = mel_spectrogram(&audio, &cfg.stft, &cfg.mel, MelScale::LogPower)?;
                let prosody = set.prosody_inputs.concat();
                let t = set.matrix.frames().min(mel.frames()).min(prosody.nrows());
                self.store.write_matrix(format!("features/{name}/features.nvtf"), &truncate_rows(&set.matrix.data, t))?;
                self.store.write_matrix(format!("features/{name}/prosody_inputs.nvtf"), &truncate_rows(&prosody, t))?;
                self.store.write_matrix(format!("features/{name}/mel.nvtf"), &truncate_rows(&mel.data, t))?;
                Ok((t, set.matrix.columns))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((_, columns)) = frames.first() {
            self.store.write_json("features/columns.json", columns)?;
        }
        Ok(frames.into_iter().map(|(t, _)| t).collect())
    }

    fn fold_training_config(&self, fold: usize) -> TrainingConfig {
        TrainingConfig { seed: derive_seed(self.config.seed, "fold", fold as u64), ..self.config.train.clone() }
    }

    /// Trains one fold. Reads go through a view that refuses every
    /// artifact of the held-out trials.
    pub fn train_fold(&self, folds: &FoldAssignment, fold: usize) -> Result<FoldSummary> {
        let cfg = &self.config;
        let held_out = folds.held_out(fold);
        let training = folds.training(fold);
        let forbidden: Vec<PathBuf> = held_out
            .iter()
            .flat_map(|&i| ["data", "preprocessed", "features"].map(|stage| PathBuf::from(stage).join(trial_name(i))))
            .collect();
        let store = self.store.guarded(&forbidden);
        let mut features = Vec::new();
        let mut prosody = Vec::new();
        let mut mels = Vec::new();
        for &i in &training {
            let name = trial_name(i);
            features.push(store.read_matrix(format!("features/{name}/features.nvtf"))?);
            prosody.push(store.read_matrix(format!("features/{name}/prosody_inputs.nvtf"))?);
            mels.push(store.read_matrix(format!("features/{name}/mel.nvtf"))?);
        }
        let feature_stats = NormalizationStats::fit(&features)?;
        let prosody_stats = NormalizationStats::fit(&prosody)?;
        let mel_stats = NormalizationStats::fit(&mels)?;
        let apply = |stats: &NormalizationStats, blocks: &[Array2<f64>]| -> Result<Vec<Array2<f64>>> {
            blocks.iter().map(|b| stats.apply(b)).collect()
        };
        let features = apply(&feature_stats, &features)?;
        let prosody = apply(&prosody_stats, &prosody)?;
        let mels = apply(&mel_stats, &mels)?;

        let train_cfg = self.fold_training_config(fold);
        let ae = ae_train_sized(&features, cfg.model.ae_hidden, cfg.model.ae_latent, &train_cfg)?;
        let pairs = features
            .iter()
            .zip(&prosody)
            .zip(&mels)
            .map(|((f, p), m)| TrainingPair::new(f.clone(), p.clone(), m.clone()))
            .collect::<Result<Vec<_>>>()?;
        let transformer_cfg = crate::model::TransformerConfig { seed: train_cfg.seed, ..cfg.model.transformer.clone() };
        let trained = train_predictor(&pairs, &ae.params, &transformer_cfg, &train_cfg)?;
        let linreg = linreg_fit(&features, &mels, cfg.model.ridge_lambda)?;

        let dir = fold_dir(fold);
        let model = FoldModel {
            feature_stats,
            prosody_stats,
            mel_stats,
            encoder: trained.encoder,
            predictor: trained.predictor,
            linreg,
        };
        model.save(&self.store, &dir, fold, train_cfg.seed)?;
        self.store.write_loss_csv(dir.join("loss_autoencoder.csv"), &ae.loss_curve)?;
        self.store.write_loss_csv(dir.join("loss_predictor.csv"), &trained.loss_curve)?;
        let summary = FoldSummary {
            fold,
            training_trials: training,
            held_out_trials: held_out,
            ae_final_mse: ae.final_mse,
            predictor_first_loss: trained.loss_curve.first().copied().unwrap_or(f64::NAN),
            predictor_last_loss: trained.loss_curve.last().copied().unwrap_or(f64::NAN),
        };
        self.store.write_json(dir.join("summary.json"), &summary)?;
        Ok(summary)
    }

    /// Cross-validated training: fold assignment, then every fold.
    pub fn train(&self) -> Result<Vec<FoldSummary>> {
        let folds = FoldAssignment::new(self.trials(), self.config.train.folds, self.config.seed)?;
        self.store.write_json("folds.json", &folds)?;
        (0..folds.folds).into_par_iter().map(|f| self.train_fold(&folds, f)).collect()
    }

    /// Predicts every trial with the model of the fold that held it out.
    pub fn predict(&self) -> Result<()> {
        let folds: FoldAssignment = self.store.read_json("folds.json")?;
        if folds.fold_of.len() != self.trials() {
            return Err(Error::Format {
                path: self.store.path("folds.json"),
                reason: format!("{} trials assigned, configuration has {}", folds.fold_of.len(), self.trials()),
            });
        }
        let transformer_cfg = &self.config.model.transformer;
        (0..folds.folds).into_par_iter().try_for_each(|fold| -> Result<()> {
            let model = FoldModel::load(&self.store, &fold_dir(fold), transformer_cfg)?;
            for i in folds.held_out(fold) {
                let name = trial_name(i);
                let features = model.feature_stats.apply(&self.store.read_matrix(format!("features/{name}/features.nvtf"))?)?;
                let prosody = model.prosody_stats.apply(&self.store.read_matrix(format!("features/{name}/prosody_inputs.nvtf"))?)?;
                let transformer = predict_mel(&model.encoder, &model.predictor, &features, &prosody)?;
                let linear = linreg_predict(&model.linreg, &features)?;
                for (label, pred) in MODELS.iter().zip([linear, transformer]) {
                    let mel = model.mel_stats.invert(&pred)?;
                    self.store.write_matrix(format!("predictions/{label}/{name}.nvtf"), &mel)?;
                }
            }
            Ok(())
        })
    }

    /// Vocodes every prediction with Griffin-Lim and IHPR at equal
    /// iteration budgets.
    pub fn vocode(&self) -> Result<Vec<VocodeSummary>> {
        let cfg = &self.config;
        let vcfg = &cfg.vocoder;
        let fb = mel_filterbank(cfg.synth.audio_fs, cfg.stft.fft_size, &cfg.mel)?;
        let jobs: Vec<(&str, usize)> = MODELS.iter().flat_map(|m| (0..self.trials()).map(move |i| (*m, i))).collect();
        let summaries = jobs
            .into_par_iter()
            .map(|(model, i)| -> Result<VocodeSummary> {
                let name = trial_name(i);
                let data = self.store.read_matrix(format!("predictions/{model}/{name}.nvtf"))?;
                let mel = MelSpectrogram {
                    data,
                    scale: MelScale::LogPower,
                    fmin_hz: cfg.mel.fmin_hz,
                    fmax_hz: cfg.mel.fmax_hz,
                    sample_rate_hz: cfg.synth.audio_fs,
                };
                let magnitude = mel_to_magnitude(&mel, &fb)?;
                let f0 = bootstrap_f0(&magnitude, vcfg)?;
                let ihpr = ihpr_vocode(&magnitude, &f0, vcfg)?;
                let budget = ihpr.total_iterations(vcfg);
                let gl = griffin_lim_iterations(&magnitude, vcfg, budget)?;
                let base = PathBuf::from("audio").join(model);
                let clipped_griffin_lim = self.store.write_wav(base.join("griffin_lim").join(format!("{name}.wav")), &gl.waveform)?;
                let clipped_ihpr = self.store.write_wav(base.join("ihpr").join(format!("{name}.wav")), &ihpr.waveform)?;
                self.store.write_loss_csv(base.join("ihpr").join(format!("{name}_loss.csv")), &ihpr.loss_curve)?;
                Ok(VocodeSummary { model: model.to_string(), trial: i, iterations: budget, clipped_griffin_lim, clipped_ihpr })
            })
            .collect::<Result<Vec<_>>>()?;
        self.store.write_json("audio/summary.json", &summaries)?;
        Ok(summaries)
    }

    /// Scores every model and vocoder combination and writes the summary
    /// table and the per-trial breakdown.
    pub fn evaluate(&self) -> Result<Vec<MetricReport>> {
        let combos: Vec<(&str, &str)> = MODELS.iter().flat_map(|m| VOCODERS.iter().map(move |v| (*m, *v))).collect();
        let reports = combos
            .iter()
            .map(|(model, vocoder)| -> Result<MetricReport> {
                let label = format!("{model}+{vocoder}");
                let trials = (0..self.trials())
                    .into_par_iter()
                    .map(|i| {
                        let name = trial_name(i);
                        let reference = self.store.read_matrix(format!("features/{name}/mel.nvtf"))?;
                        let predicted = self.store.read_matrix(format!("predictions/{model}/{name}.nvtf"))?;
                        let waveform = self.store.read_wav(format!("audio/{model}/{vocoder}/{name}.wav"))?;
                        let meta = self.meta(&self.store, i)?;
                        score_trial(&name, &label, &reference, &predicted, &waveform, &meta.f0_hz)
                    })
                    .collect::<Result<Vec<_>>>()?;
                MetricReport::from_trials(label, trials)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Vec::new();
        write_table_csv(&reports, &mut table)?;
        self.store.write_text("results/table.csv", &String::from_utf8(table).expect("csv output is UTF-8"))?;
        let mut lines = Vec::new();
        write_trials_jsonl(&reports, &mut lines)?;
        self.store.write_text("results/trials.jsonl", &String::from_utf8(lines).expect("json output is UTF-8"))?;
        Ok(reports)
    }

    /// Every stage in order.
    pub fn run(&self) -> Result<Vec<MetricReport>> {
        self.synth_data()?;
        self.preprocess()?;
        self.features()?;
        self.train()?;
        self.predict()?;
        self.vocode()?;
        self.evaluate()
    }
}
