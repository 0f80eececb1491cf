use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_backward, attention_forward, positional_encoding, AttentionCache, AttentionParams};
use super::layers::{dropout_mask, relu, relu_backward, Dense, LayerNorm, LayerNormCache};
use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self { d_model: 64, heads: 4, layers: 2, ffn_dim: 256, dropout: 0.1, max_seq_len: 512, seed: 0 }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::Config("d_model must be even for the positional encoding".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_seq_len == 0 || self.ffn_dim == 0 {
            return Err(Error::Config("max_seq_len and ffn_dim must be positive".into()));
        }
        Ok(())
    }
}

/// One post-norm encoder block: attention, add & norm, feed-forward, add & norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub attention: AttentionParams,
    pub norm1: LayerNorm,
    pub ff1: Dense,
    pub ff2: Dense,
    pub norm2: LayerNorm,
}

impl Parameters for EncoderLayer {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.attention.visit(&format!("{prefix}.attn"), out);
        self.norm1.visit(&format!("{prefix}.norm1"), out);
        self.ff1.visit(&format!("{prefix}.ff1"), out);
        self.ff2.visit(&format!("{prefix}.ff2"), out);
        self.norm2.visit(&format!("{prefix}.norm2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.attention.visit_mut(&format!("{prefix}.attn"), out);
        self.norm1.visit_mut(&format!("{prefix}.norm1"), out);
        self.ff1.visit_mut(&format!("{prefix}.ff1"), out);
        self.ff2.visit_mut(&format!("{prefix}.ff2"), out);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    pub input: Dense,
    pub layers: Vec<EncoderLayer>,
    pub output: Dense,
    pub heads: usize,
    pub dropout: f64,
    pub max_seq_len: usize,
}

impl Parameters for TransformerParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.input.visit(&format!("{prefix}.input"), out);
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&format!("{prefix}.layer{i}"), out);
        }
        self.output.visit(&format!("{prefix}.output"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.input.visit_mut(&format!("{prefix}.input"), out);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&format!("{prefix}.layer{i}"), out);
        }
        self.output.visit_mut(&format!("{prefix}.output"), out);
    }
}

struct LayerCache {
    attention: AttentionCache,
    attn_mask: Option<Array2<f64>>,
    norm1: LayerNormCache,
    h: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    norm2: LayerNormCache,
}

/// Activations of one sequence pass, consumed by [`TransformerParams::backward`].
pub struct TransformerCache {
    input: Array2<f64>,
    input_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    last_hidden: Array2<f64>,
}

impl TransformerCache {
    /// Normalized (pre scale/shift) token vectors after every add & norm.
    pub fn normalized_activations(&self) -> Vec<&Array2<f64>> {
        self.layers.iter().flat_map(|l| [&l.norm1.xhat, &l.norm2.xhat]).collect()
    }
}

fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

impl TransformerParams {
    pub fn new(cfg: &TransformerConfig, input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let input = Dense::new(input_dim, d, rng);
        let layers = (0..cfg.layers)
            .map(|_| EncoderLayer {
                attention: AttentionParams::new(d, rng),
                norm1: LayerNorm::new(d),
                ff1: Dense::new(d, cfg.ffn_dim, rng),
                ff2: Dense::new(cfg.ffn_dim, d, rng),
                norm2: LayerNorm::new(d),
            })
            .collect();
        let output = Dense::new(d, output_dim, rng);
        Ok(Self { input, layers, output, heads: cfg.heads, dropout: cfg.dropout, max_seq_len: cfg.max_seq_len })
    }

    pub fn input_dim(&self) -> usize {
        self.input.input_dim()
    }

    pub fn d_model(&self) -> usize {
        self.input.output_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.output_dim()
    }

    /// Forward pass over a `T x input_dim` sequence. Dropout masks are drawn
    /// from `rng` when it is given, which is how training mode is selected.
    pub(crate) fn forward_cached(&self, input: &Array2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> (Array2<f64>, TransformerCache) {
        let t = input.nrows();
        let d = self.d_model();
        let rate = self.dropout;
        let mask = |rng: &mut Option<&mut ChaCha8Rng>, cols: usize| match rng {
            Some(r) if rate > 0.0 => Some(dropout_mask((t, cols), rate, *r)),
            _ => None,
        };
        let pe = positional_encoding(t, d).expect("validated d_model");
        let input_mask = mask(&mut rng, d);
        let mut x = apply_mask(self.input.forward(input) + pe, &input_mask);
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (a, attention) = attention_forward(&x, &layer.attention, self.heads);
            let attn_mask = mask(&mut rng, d);
            let (h, norm1) = layer.norm1.forward(&(&x + &apply_mask(a, &attn_mask)));
            let ff_pre = layer.ff1.forward(&h);
            let ff_act = relu(&ff_pre);
            let ff_mask = mask(&mut rng, d);
            let f = apply_mask(layer.ff2.forward(&ff_act), &ff_mask);
            let (out, norm2) = layer.norm2.forward(&(&h + &f));
            layers.push(LayerCache { attention, attn_mask, norm1, h, ff_pre, ff_act, ff_mask, norm2 });
            x = out;
        }
        let y = self.output.forward(&x);
        (y, TransformerCache { input: input.clone(), input_mask, layers, last_hidden: x })
    }

    /// Accumulates gradients into `grad` and returns `dL/dinput`.
    pub(crate) fn backward(&self, cache: &TransformerCache, dy: &Array2<f64>, grad: &mut TransformerParams) -> Array2<f64> {
        let mut dx = self.output.backward(&cache.last_hidden, dy, &mut grad.output);
        for ((layer, lc), lg) in self.layers.iter().zip(&cache.layers).zip(grad.layers.iter_mut()).rev() {
            let dr2 = layer.norm2.backward(&lc.norm2, &dx, &mut lg.norm2);
            let df = apply_mask(dr2.clone(), &lc.ff_mask);
            let dact = layer.ff2.backward(&lc.ff_act, &df, &mut lg.ff2);
            let dpre = relu_backward(&lc.ff_pre, &dact);
            let dh = dr2 + layer.ff1.backward(&lc.h, &dpre, &mut lg.ff1);
            let dr1 = layer.norm1.backward(&lc.norm1, &dh, &mut lg.norm1);
            let da = apply_mask(dr1.clone(), &lc.attn_mask);
            dx = dr1 + attention_backward(&layer.attention, &lc.attention, &da, &mut lg.attention);
        }
        let dx0 = apply_mask(dx, &cache.input_mask);
        self.input.backward(&cache.input, &dx0, &mut grad.input)
    }
}

/// Predicts a `T x mel_bins` spectrogram from the latent sequence and the
/// prosody embedding. `dropout_rng` switches on training-mode dropout.
pub fn transformer_forward(
    params: &TransformerParams,
    latent: &Array2<f64>,
    prosody: &Array2<f64>,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Array2<f64>> {
    let input = transformer_input(params, latent, prosody)?;
    Ok(params.forward_cached(&input, dropout_rng).0)
}

pub(crate) fn transformer_input(params: &TransformerParams, latent: &Array2<f64>, prosody: &Array2<f64>) -> Result<Array2<f64>> {
    if latent.nrows() != prosody.nrows() {
        return Err(Error::invalid(format!(
            "latent has {} frames but prosody embedding has {}",
            latent.nrows(),
            prosody.nrows()
        )));
    }
    if latent.ncols() + prosody.ncols() != params.input_dim() {
        return Err(Error::invalid(format!(
            "transformer expects {} input columns, got {} + {}",
            params.input_dim(),
            latent.ncols(),
            prosody.ncols()
        )));
    }
    Ok(concatenate![Axis(1), *latent, *prosody])
}

/// Splits a gradient with respect to the concatenated input back into the
/// latent and prosody parts.
pub(crate) fn split_input_grad(d: &Array2<f64>, latent_dim: usize) -> (Array2<f64>, Array2<f64>) {
    (d.slice(s![.., ..latent_dim]).to_owned(), d.slice(s![.., latent_dim..]).to_owned())
}
