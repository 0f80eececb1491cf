use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autoencoder::AutoencoderParams;
use super::params::Parameters;
use super::train::{sequence_loss_and_grads, PredictorParams, TrainingPair};
use super::transformer::TransformerConfig;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-4;
/// Magnitude below which gradient entries are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Worst finite-difference disagreement per parameter tensor.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    fn merge(mut self, prefix: &str, other: GradCheckReport) -> Self {
        self.tensors.extend(other.tensors.into_iter().map(|(n, e)| (format!("{prefix}.{n}"), e)));
        self.max_relative_error = self.max_relative_error.max(other.max_relative_error);
        self
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `grads` with central differences of `loss` for every scalar in
/// every tensor of `params`.
pub fn finite_difference_check<P: Parameters>(params: &P, grads: &P, mut loss: impl FnMut(&P) -> f64) -> GradCheckReport {
    let mut probe = params.clone();
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Array2<f64>> = grads.named().into_iter().map(|(_, g)| g.clone()).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, name) in names.into_iter().enumerate() {
        let len = analytic[ti].len();
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let original = nth(&mut probe, ti, i, None);
            nth(&mut probe, ti, i, Some(original + FD_STEP));
            let up = loss(&probe);
            nth(&mut probe, ti, i, Some(original - FD_STEP));
            let down = loss(&probe);
            nth(&mut probe, ti, i, Some(original));
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[ti].iter().nth(i).copied().unwrap_or_default();
            worst = worst.max(relative_error(a, numeric));
        }
        tensors.push((name, worst));
    }
    let max_relative_error = tensors.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    GradCheckReport { tensors, max_relative_error }
}

/// Reads the `i`-th scalar of tensor `ti`, optionally overwriting it first.
fn nth<P: Parameters>(p: &mut P, ti: usize, i: usize, set: Option<f64>) -> f64 {
    let mut named = p.named_mut();
    let slot = named[ti].1.iter_mut().nth(i).expect("index within tensor");
    if let Some(v) = set {
        *slot = v;
    }
    *slot
}

/// Checks predictor gradients and, when `with_encoder` is set, the encoder
/// gradients of the fine-tuning path. Dropout is off.
pub fn grad_check(
    encoder: &AutoencoderParams,
    predictor: &PredictorParams,
    pair: &TrainingPair,
    with_encoder: bool,
) -> Result<GradCheckReport> {
    let grads = sequence_loss_and_grads(encoder, predictor, pair, None, with_encoder)?;
    let loss_of = |e: &AutoencoderParams, p: &PredictorParams| {
        sequence_loss_and_grads(e, p, pair, None, false).map(|g| g.loss).unwrap_or(f64::NAN)
    };
    let mut report = GradCheckReport { tensors: Vec::new(), max_relative_error: 0.0 };
    report = report.merge("predictor", finite_difference_check(predictor, &grads.predictor, |p| loss_of(encoder, p)));
    if let Some(eg) = grads.encoder {
        let mut enc = finite_difference_check(encoder, &eg, |e| loss_of(e, predictor));
        // The decoder is not on the prediction path.
        enc.tensors.retain(|(n, _)| n.starts_with("enc"));
        enc.max_relative_error = enc.tensors.iter().map(|(_, e)| *e).fold(0.0, f64::max);
        report = report.merge("encoder", enc);
    }
    Ok(report)
}

/// Checks the autoencoder reconstruction gradients on `x`.
pub fn grad_check_autoencoder(params: &AutoencoderParams, x: &Array2<f64>) -> GradCheckReport {
    let (_, grads) = params.reconstruction_loss_and_grad(x);
    finite_difference_check(params, &grads, |p| p.reconstruction_loss_and_grad(x).0)
}

/// A small random model and sequence: d_model 8, 3 frames, 4 mel bins.
/// `layers = 0` removes every attention block, leaving an affine map from
/// the encoder/embedding outputs to the prediction.
pub fn tiny_instance(seed: u64, layers: usize) -> Result<(AutoencoderParams, PredictorParams, TrainingPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = AutoencoderParams::new(5, 6, 4, &mut rng);
    let cfg = TransformerConfig { d_model: 8, heads: 2, layers, ffn_dim: 16, dropout: 0.0, max_seq_len: 8, seed };
    let mut predictor = PredictorParams::sized(&cfg, 4, 4, 5, 3, 4, &mut rng)?;
    // Non-trivial norm parameters and biases so every path carries gradient.
    for (_, t) in predictor.named_mut() {
        if t.nrows() == 1 {
            t.mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
        }
    }
    let mut draw = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0));
    let pair = TrainingPair::new(draw(3, 5), draw(3, 4), draw(3, 4))?;
    Ok((encoder, predictor, pair))
}
