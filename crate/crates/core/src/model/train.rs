use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::{AutoencoderParams, AE_HIDDEN, AE_LATENT};
use super::params::{Adam, AdamConfig, Parameters};
use super::prosody_embed::{ProsodyEmbedParams, PROSODY_EMBED_DIM, PROSODY_HIDDEN};
use super::transformer::{split_input_grad, transformer_input, TransformerConfig, TransformerParams};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub adam: AdamConfig,
    /// Predictor epochs.
    pub epochs: usize,
    /// Sequences (chunks) per predictor step.
    pub batch_size: usize,
    pub ae_epochs: usize,
    /// Frames per autoencoder step.
    pub ae_batch_frames: usize,
    pub seed: u64,
    pub folds: usize,
    /// Lets predictor gradients update the encoder as well.
    pub finetune_encoder: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            epochs: 30,
            batch_size: 4,
            ae_epochs: 30,
            ae_batch_frames: 64,
            seed: 0,
            folds: 10,
            finetune_encoder: false,
        }
    }
}

impl TrainingConfig {
    /// Checks a user-supplied configuration.
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        self.check_runnable()
    }

    /// Weaker check used by the training loops themselves; a zero learning
    /// rate is allowed there so a frozen run can be observed.
    fn check_runnable(&self) -> Result<()> {
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 || self.ae_batch_frames == 0 {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        Ok(())
    }
}

fn mse(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let diff = pred - target;
    let n = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff.mapv(|d| 2.0 * d / n))
}

fn content_hash(blocks: &[&Array2<f64>]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    for b in blocks {
        eat(b.nrows() as u64);
        eat(b.ncols() as u64);
        for v in b.iter() {
            eat(v.to_bits());
        }
    }
    h
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Mean loss over the first and last 10% of a loss curve.
pub fn loss_curve_ends(curve: &[f64]) -> (f64, f64) {
    let k = (curve.len() / 10).max(1).min(curve.len());
    (mean_of(&curve[..k]), mean_of(&curve[curve.len() - k..]))
}

/// Result of autoencoder training.
#[derive(Debug, Clone)]
pub struct AutoencoderTraining {
    pub params: AutoencoderParams,
    pub loss_curve: Vec<f64>,
    /// Reconstruction MSE of the trained model over all training frames.
    pub final_mse: f64,
}

/// Trains the default-size autoencoder on the pooled frames of `features`.
pub fn ae_train(features: &[Array2<f64>], cfg: &TrainingConfig) -> Result<AutoencoderTraining> {
    ae_train_sized(features, AE_HIDDEN, AE_LATENT, cfg)
}

pub fn ae_train_sized(features: &[Array2<f64>], hidden: usize, latent: usize, cfg: &TrainingConfig) -> Result<AutoencoderTraining> {
    cfg.check_runnable()?;
    let first = features.first().ok_or_else(|| Error::invalid("autoencoder training needs at least one matrix"))?;
    let dim = first.ncols();
    if features.iter().any(|m| m.ncols() != dim) {
        return Err(Error::invalid("feature matrices have inconsistent column counts"));
    }
    let mut ordered: Vec<&Array2<f64>> = features.iter().collect();
    ordered.sort_by_key(|m| content_hash(&[m]));
    let views: Vec<_> = ordered.iter().map(|m| m.view()).collect();
    let pooled = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?;
    if pooled.nrows() == 0 {
        return Err(Error::invalid("autoencoder training data has no frames"));
    }

    let mut params = AutoencoderParams::new(dim, hidden, latent, &mut stream_rng(cfg.seed, stream::INIT, 0));
    let mut opt = Adam::new(cfg.adam, &params);
    let mut order: Vec<usize> = (0..pooled.nrows()).collect();
    let mut loss_curve = Vec::new();
    for epoch in 0..cfg.ae_epochs {
        order.shuffle(&mut stream_rng(cfg.seed, "ae-shuffle", epoch as u64));
        for batch in order.chunks(cfg.ae_batch_frames) {
            let x = pooled.select(Axis(0), batch);
            let (loss, grad) = params.reconstruction_loss_and_grad(&x);
            loss_curve.push(loss);
            opt.step(&mut params, &grad);
        }
    }
    let final_mse = params.reconstruction_mse(&pooled)?;
    Ok(AutoencoderTraining { params, loss_curve, final_mse })
}

/// Prosody embedding and transformer, trained jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub prosody: ProsodyEmbedParams,
    pub transformer: TransformerParams,
}

impl Parameters for PredictorParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.prosody.visit(&format!("{prefix}.prosody"), out);
        self.transformer.visit(&format!("{prefix}.transformer"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.prosody.visit_mut(&format!("{prefix}.prosody"), out);
        self.transformer.visit_mut(&format!("{prefix}.transformer"), out);
    }
}

impl PredictorParams {
    pub fn new(
        cfg: &TransformerConfig,
        latent_dim: usize,
        prosody_input_dim: usize,
        mel_bins: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Self::sized(cfg, latent_dim, prosody_input_dim, PROSODY_HIDDEN, PROSODY_EMBED_DIM, mel_bins, rng)
    }

    pub fn sized(
        cfg: &TransformerConfig,
        latent_dim: usize,
        prosody_input_dim: usize,
        prosody_hidden: usize,
        prosody_dim: usize,
        mel_bins: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let prosody = ProsodyEmbedParams::new(prosody_input_dim, prosody_hidden, prosody_dim, rng);
        let transformer = TransformerParams::new(cfg, latent_dim + prosody_dim, mel_bins, rng)?;
        Ok(Self { prosody, transformer })
    }
}

/// One training sequence: normalized features, prosody-embedding inputs and
/// the target (log) mel frames, all sharing a frame axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub features: Array2<f64>,
    pub prosody_inputs: Array2<f64>,
    pub target: Array2<f64>,
}

impl TrainingPair {
    pub fn new(features: Array2<f64>, prosody_inputs: Array2<f64>, target: Array2<f64>) -> Result<Self> {
        let t = features.nrows();
        if prosody_inputs.nrows() != t || target.nrows() != t {
            return Err(Error::invalid(format!(
                "misaligned training pair: {} feature, {} prosody and {} target frames",
                t,
                prosody_inputs.nrows(),
                target.nrows()
            )));
        }
        Ok(Self { features, prosody_inputs, target })
    }

    fn chunks(&self, max_len: usize) -> impl Iterator<Item = TrainingPair> + '_ {
        (0..self.features.nrows()).step_by(max_len).map(move |a| {
            let b = (a + max_len).min(self.features.nrows());
            TrainingPair {
                features: self.features.slice(s![a..b, ..]).to_owned(),
                prosody_inputs: self.prosody_inputs.slice(s![a..b, ..]).to_owned(),
                target: self.target.slice(s![a..b, ..]).to_owned(),
            }
        })
    }
}

/// Gradients of one sequence loss.
#[derive(Debug, Clone)]
pub struct SequenceGradients {
    pub loss: f64,
    pub predictor: PredictorParams,
    pub encoder: Option<AutoencoderParams>,
}

/// Full forward and backward pass for one sequence, optionally continuing
/// the backward pass into the encoder.
pub fn sequence_loss_and_grads(
    encoder: &AutoencoderParams,
    predictor: &PredictorParams,
    pair: &TrainingPair,
    dropout_rng: Option<&mut ChaCha8Rng>,
    with_encoder: bool,
) -> Result<SequenceGradients> {
    let (latent, enc_cache) = encoder.encode_cached(&pair.features);
    let (embedding, pros_cache) = predictor.prosody.forward_cached(&pair.prosody_inputs);
    let input = transformer_input(&predictor.transformer, &latent, &embedding)?;
    let (pred, cache) = predictor.transformer.forward_cached(&input, dropout_rng);
    if pred.dim() != pair.target.dim() {
        return Err(Error::invalid(format!("prediction {:?} does not match target {:?}", pred.dim(), pair.target.dim())));
    }
    let (loss, dy) = mse(&pred, &pair.target);
    let mut grads = predictor.zeros_like();
    let dinput = predictor.transformer.backward(&cache, &dy, &mut grads.transformer);
    let (dlatent, dembedding) = split_input_grad(&dinput, latent.ncols());
    predictor.prosody.backward(&pros_cache, &dembedding, &mut grads.prosody);
    let encoder_grads = with_encoder.then(|| {
        let mut g = encoder.zeros_like();
        encoder.encode_backward(&enc_cache, &dlatent, &mut g);
        g
    });
    Ok(SequenceGradients { loss, predictor: grads, encoder: encoder_grads })
}

/// Outcome of predictor training.
#[derive(Debug, Clone)]
pub struct PredictorTraining {
    pub predictor: PredictorParams,
    /// The encoder after training; differs from the input only when
    /// fine-tuning is enabled.
    pub encoder: AutoencoderParams,
    /// Mean batch loss per optimizer step, measured before the update.
    pub loss_curve: Vec<f64>,
}

/// Jointly trains the prosody embedding and transformer on top of a
/// pre-trained encoder.
pub fn train_predictor(
    pairs: &[TrainingPair],
    encoder: &AutoencoderParams,
    transformer_cfg: &TransformerConfig,
    cfg: &TrainingConfig,
) -> Result<PredictorTraining> {
    cfg.check_runnable()?;
    transformer_cfg.validate()?;
    let first = pairs.first().ok_or_else(|| Error::invalid("predictor training needs at least one pair"))?;
    for p in pairs {
        if p.features.ncols() != encoder.input_dim()
            || p.prosody_inputs.ncols() != first.prosody_inputs.ncols()
            || p.target.ncols() != first.target.ncols()
        {
            return Err(Error::invalid("training pairs have inconsistent dimensions"));
        }
        if p.features.nrows() != p.target.nrows() || p.prosody_inputs.nrows() != p.target.nrows() {
            return Err(Error::invalid("misaligned training pair"));
        }
    }
    let mut chunks: Vec<TrainingPair> = pairs
        .iter()
        .flat_map(|p| p.chunks(transformer_cfg.max_seq_len))
        .filter(|c| c.features.nrows() > 0)
        .collect();
    chunks.sort_by_key(|c| content_hash(&[&c.features, &c.prosody_inputs, &c.target]));

    let mut predictor = PredictorParams::new(
        transformer_cfg,
        encoder.latent_dim(),
        first.prosody_inputs.ncols(),
        first.target.ncols(),
        &mut stream_rng(cfg.seed, stream::INIT, 1),
    )?;
    let mut encoder = encoder.clone();
    let mut opt = Adam::new(cfg.adam, &predictor);
    let mut enc_opt = Adam::new(cfg.adam, &encoder);
    let mut dropout_rng = stream_rng(cfg.seed, stream::DROPOUT, 0);
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    let mut loss_curve = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream_rng(cfg.seed, stream::SHUFFLE, epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = predictor.zeros_like();
            let mut enc_grad = encoder.zeros_like();
            let mut loss = 0.0;
            for &i in batch {
                let g = sequence_loss_and_grads(&encoder, &predictor, &chunks[i], Some(&mut dropout_rng), cfg.finetune_encoder)?;
                loss += g.loss;
                grad.add_assign(&g.predictor);
                if let Some(e) = g.encoder {
                    enc_grad.add_assign(&e);
                }
            }
            let k = 1.0 / batch.len() as f64;
            grad.scale(k);
            loss_curve.push(loss * k);
            opt.step(&mut predictor, &grad);
            if cfg.finetune_encoder {
                enc_grad.scale(k);
                enc_opt.step(&mut encoder, &enc_grad);
            }
        }
    }
    Ok(PredictorTraining { predictor, encoder, loss_curve })
}

/// Inference: encodes, embeds and predicts a whole trial, processing it in
/// non-overlapping chunks of at most `max_seq_len` frames.
pub fn predict_mel(
    encoder: &AutoencoderParams,
    predictor: &PredictorParams,
    features: &Array2<f64>,
    prosody_inputs: &Array2<f64>,
) -> Result<Array2<f64>> {
    if features.nrows() != prosody_inputs.nrows() {
        return Err(Error::invalid("features and prosody inputs have different frame counts"));
    }
    let latent = super::autoencoder::ae_encode(encoder, features)?;
    let embedding = super::prosody_embed::embed_concatenated(&predictor.prosody, prosody_inputs)?;
    let t = features.nrows();
    let step = predictor.transformer.max_seq_len.max(1);
    let mut out = Array2::zeros((t, predictor.transformer.output_dim()));
    for a in (0..t).step_by(step) {
        let b = (a + step).min(t);
        let z = latent.slice(s![a..b, ..]).to_owned();
        let p = embedding.slice(s![a..b, ..]).to_owned();
        out.slice_mut(s![a..b, ..]).assign(&super::transformer::transformer_forward(&predictor.transformer, &z, &p, None)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(shape: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn low_rank(frames: usize, dim: usize, rank: usize, seed: u64) -> Array2<f64> {
        random((frames, rank), seed).dot(&random((rank, dim), seed + 1))
    }

    #[test]
    fn autoencoder_learns_low_rank_data() {
        let data: Vec<Array2<f64>> = (0..4).map(|i| low_rank(128, 64, 10, 10 + 2 * i)).collect();
        let cfg = TrainingConfig { ae_epochs: 2000, ae_batch_frames: 512, seed: 3, ..TrainingConfig::default() };
        let out = ae_train(&data, &cfg).unwrap();
        let (first, last) = loss_curve_ends(&out.loss_curve);
        assert!(last <= first);
        assert!(out.final_mse <= 1e-3, "final mse {}", out.final_mse);
    }

    #[test]
    fn autoencoder_zero_data_and_determinism() {
        let zeros = vec![Array2::zeros((40, 8))];
        let cfg = TrainingConfig { ae_epochs: 3, ..TrainingConfig::default() };
        let out = ae_train_sized(&zeros, 16, 4, &cfg).unwrap();
        assert!(out.final_mse <= 1e-6);

        let data = vec![random((50, 8), 1), random((30, 8), 2)];
        let a = ae_train_sized(&data, 16, 4, &cfg).unwrap();
        let b = ae_train_sized(&data, 16, 4, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        let swapped = vec![data[1].clone(), data[0].clone()];
        assert_eq!(ae_train_sized(&swapped, 16, 4, &cfg).unwrap().params, a.params);
        assert!(ae_train_sized(&[random((5, 8), 1), random((5, 7), 2)], 16, 4, &cfg).is_err());
    }

    fn affine_pairs(encoder: &AutoencoderParams, n: usize, t: usize) -> Vec<TrainingPair> {
        let map = random((encoder.latent_dim(), 6), 77);
        (0..n)
            .map(|i| {
                let features = random((t, encoder.input_dim()), 100 + i as u64);
                let latent = super::super::autoencoder::ae_encode(encoder, &features).unwrap();
                let target = latent.dot(&map).mapv(|v| v + 0.5);
                TrainingPair::new(features, random((t, 4), 200 + i as u64), target).unwrap()
            })
            .collect()
    }

    fn small_setup() -> (AutoencoderParams, TransformerConfig) {
        let encoder = AutoencoderParams::new(10, 16, 8, &mut ChaCha8Rng::seed_from_u64(5));
        let tcfg = TransformerConfig { d_model: 16, heads: 2, layers: 1, ffn_dim: 32, dropout: 0.0, max_seq_len: 16, seed: 0 };
        (encoder, tcfg)
    }

    #[test]
    fn predictor_fits_affine_targets() {
        let (encoder, tcfg) = small_setup();
        let pairs = affine_pairs(&encoder, 6, 32);
        let cfg = TrainingConfig { epochs: 150, batch_size: 4, adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() }, ..TrainingConfig::default() };
        let out = train_predictor(&pairs, &encoder, &tcfg, &cfg).unwrap();
        let initial = out.loss_curve[0];
        let (first, last) = loss_curve_ends(&out.loss_curve);
        assert!(last < first);
        let final_mse: f64 = pairs
            .iter()
            .map(|p| mse(&predict_mel(&encoder, &out.predictor, &p.features, &p.prosody_inputs).unwrap(), &p.target).0)
            .sum::<f64>()
            / pairs.len() as f64;
        assert!(final_mse <= 0.01 * initial, "final {final_mse} initial {initial}");
    }

    #[test]
    fn predictor_is_deterministic_and_order_free() {
        let (encoder, mut tcfg) = small_setup();
        tcfg.dropout = 0.1;
        let pairs = affine_pairs(&encoder, 4, 20);
        let cfg = TrainingConfig { epochs: 2, batch_size: 2, ..TrainingConfig::default() };
        let a = train_predictor(&pairs, &encoder, &tcfg, &cfg).unwrap();
        let b = train_predictor(&pairs, &encoder, &tcfg, &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.predictor, b.predictor);
        let reversed: Vec<_> = pairs.iter().rev().cloned().collect();
        let c = train_predictor(&reversed, &encoder, &tcfg, &cfg).unwrap();
        assert_eq!(a.predictor, c.predictor);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let (encoder, tcfg) = small_setup();
        let pairs = affine_pairs(&encoder, 3, 10);
        let cfg = TrainingConfig { epochs: 3, batch_size: 3, adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..TrainingConfig::default() };
        let out = train_predictor(&pairs, &encoder, &tcfg, &cfg).unwrap();
        let init = PredictorParams::new(&tcfg, 8, 4, 6, &mut stream_rng(cfg.seed, stream::INIT, 1)).unwrap();
        assert_eq!(out.predictor, init);
        assert!(out.loss_curve.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0].abs()));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn misaligned_pairs_are_rejected() {
        assert!(TrainingPair::new(Array2::zeros((4, 2)), Array2::zeros((4, 2)), Array2::zeros((5, 2))).is_err());
    }

    #[test]
    fn long_trials_are_chunked_at_inference() {
        let (encoder, tcfg) = small_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let predictor = PredictorParams::new(&tcfg, 8, 4, 6, &mut rng).unwrap();
        let out = predict_mel(&encoder, &predictor, &random((40, 10), 1), &random((40, 4), 2)).unwrap();
        assert_eq!(out.dim(), (40, 6));
    }
}
