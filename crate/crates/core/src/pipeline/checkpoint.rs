use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::store::Store;
use crate::error::{Error, Result};
use crate::features::NormalizationStats;
use crate::model::{AutoencoderParams, LinRegBaseline, Parameters, PredictorParams, TransformerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Sizes needed to rebuild the parameter templates, plus the tensor list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub fold: usize,
    pub seed: u64,
    pub feature_dim: usize,
    pub prosody_dim: usize,
    pub mel_bins: usize,
    pub ae_hidden: usize,
    pub ae_latent: usize,
    pub ridge_lambda: f64,
    pub tensors: Vec<TensorEntry>,
}

/// Everything one fold's training produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub feature_stats: NormalizationStats,
    pub prosody_stats: NormalizationStats,
    pub mel_stats: NormalizationStats,
    pub encoder: AutoencoderParams,
    pub predictor: PredictorParams,
    pub linreg: LinRegBaseline,
}

fn row(v: &[f64]) -> Array2<f64> {
    Array1::from_vec(v.to_vec()).insert_axis(Axis(0))
}

fn stats_tensors(prefix: &str, s: &NormalizationStats) -> Vec<(String, Array2<f64>)> {
    vec![(format!("{prefix}.mean"), row(&s.mean)), (format!("{prefix}.std"), row(&s.std))]
}

fn tensor_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.nvtf"))
}

fn read_row(store: &Store, dir: &Path, name: &str, len: usize) -> Result<Vec<f64>> {
    let path = tensor_file(dir, name);
    let m = store.read_matrix(&path)?;
    if m.dim() != (1, len) {
        return Err(Error::Format { path: store.path(&path), reason: format!("expected shape [1, {len}], found {:?}", m.shape()) });
    }
    Ok(m.row(0).to_vec())
}

fn load_into<P: Parameters>(store: &Store, dir: &Path, prefix: &str, params: &mut P) -> Result<()> {
    for (name, slot) in params.named_mut() {
        let path = tensor_file(dir, &format!("{prefix}.{name}"));
        let m = store.read_matrix(&path)?;
        if m.dim() != slot.dim() {
            return Err(Error::Format {
                path: store.path(&path),
                reason: format!("expected shape {:?}, found {:?}", slot.shape(), m.shape()),
            });
        }
        slot.assign(&m);
    }
    Ok(())
}

impl FoldModel {
    fn tensors(&self) -> Vec<(String, Array2<f64>)> {
        let mut out = Vec::new();
        out.extend(stats_tensors("stats.features", &self.feature_stats));
        out.extend(stats_tensors("stats.prosody", &self.prosody_stats));
        out.extend(stats_tensors("stats.mel", &self.mel_stats));
        out.extend(self.encoder.named().into_iter().map(|(n, t)| (format!("encoder.{n}"), t.clone())));
        out.extend(self.predictor.named().into_iter().map(|(n, t)| (format!("predictor.{n}"), t.clone())));
        out.push(("linreg.weights".into(), self.linreg.weights.clone()));
        out.push(("linreg.feature_mean".into(), row(self.linreg.feature_mean.as_slice().expect("contiguous"))));
        out.push(("linreg.intercept".into(), row(self.linreg.intercept.as_slice().expect("contiguous"))));
        out
    }

    /// Writes one tensor file per named tensor under `dir` and a manifest.
    pub fn save(&self, store: &Store, dir: &Path, fold: usize, seed: u64) -> Result<CheckpointManifest> {
        let mut entries = Vec::new();
        for (name, t) in self.tensors() {
            store.write_matrix(tensor_file(dir, &name), &t)?;
            entries.push(TensorEntry { name, shape: t.shape().to_vec() });
        }
        let manifest = CheckpointManifest {
            fold,
            seed,
            feature_dim: self.encoder.input_dim(),
            prosody_dim: self.predictor.prosody.input_dim(),
            mel_bins: self.predictor.transformer.output_dim(),
            ae_hidden: self.encoder.enc1.output_dim(),
            ae_latent: self.encoder.latent_dim(),
            ridge_lambda: self.linreg.lambda,
            tensors: entries,
        };
        store.write_json(dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }

    /// Rebuilds a fold model from `dir`; `transformer` must match the
    /// configuration the checkpoint was trained with.
    pub fn load(store: &Store, dir: &Path, transformer: &TransformerConfig) -> Result<Self> {
        let m: CheckpointManifest = store.read_json(dir.join("manifest.json"))?;
        // parameter values are overwritten below; the generator only sizes the templates
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut encoder = AutoencoderParams::new(m.feature_dim, m.ae_hidden, m.ae_latent, &mut rng);
        let mut predictor = PredictorParams::new(transformer, m.ae_latent, m.prosody_dim, m.mel_bins, &mut rng)?;
        load_into(store, dir, "encoder", &mut encoder)?;
        load_into(store, dir, "predictor", &mut predictor)?;
        let stats = |prefix: &str, len: usize| -> Result<NormalizationStats> {
            Ok(NormalizationStats {
                mean: read_row(store, dir, &format!("{prefix}.mean"), len)?,
                std: read_row(store, dir, &format!("{prefix}.std"), len)?,
            })
        };
        let weights = store.read_matrix(tensor_file(dir, "linreg.weights"))?;
        if weights.dim() != (m.feature_dim, m.mel_bins) {
            return Err(Error::Format { path: store.path(tensor_file(dir, "linreg.weights")), reason: "unexpected shape".into() });
        }
        let linreg = LinRegBaseline {
            weights,
            feature_mean: Array1::from_vec(read_row(store, dir, "linreg.feature_mean", m.feature_dim)?),
            intercept: Array1::from_vec(read_row(store, dir, "linreg.intercept", m.mel_bins)?),
            lambda: m.ridge_lambda,
        };
        Ok(Self {
            feature_stats: stats("stats.features", m.feature_dim)?,
            prosody_stats: stats("stats.prosody", m.prosody_dim)?,
            mel_stats: stats("stats.mel", m.mel_bins)?,
            encoder,
            predictor,
            linreg,
        })
    }
}
