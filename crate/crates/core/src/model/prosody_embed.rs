use ndarray::Array2;
use rand::Rng;

use super::layers::{relu, relu_backward, Dense};
use super::params::Parameters;
use crate::error::{Error, Result};

pub const PROSODY_HIDDEN: usize = 32;
pub const PROSODY_EMBED_DIM: usize = 16;

/// Two-layer MLP mapping per-frame theta/beta wavelet statistics to a
/// prosody embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyEmbedParams {
    pub l1: Dense,
    pub l2: Dense,
}

#[derive(Debug, Clone)]
pub(crate) struct ProsodyCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

impl ProsodyEmbedParams {
    pub fn new(input_dim: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self { l1: Dense::new(input_dim, hidden, rng), l2: Dense::new(hidden, output, rng) }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.l2.output_dim()
    }

    pub(crate) fn forward_cached(&self, input: &Array2<f64>) -> (Array2<f64>, ProsodyCache) {
        let pre = self.l1.forward(input);
        let hidden = relu(&pre);
        let out = self.l2.forward(&hidden);
        (out, ProsodyCache { input: input.clone(), pre, hidden })
    }

    pub(crate) fn backward(&self, cache: &ProsodyCache, dp: &Array2<f64>, grad: &mut ProsodyEmbedParams) {
        let dh = self.l2.backward(&cache.hidden, dp, &mut grad.l2);
        let dpre = relu_backward(&cache.pre, &dh);
        self.l1.backward(&cache.input, &dpre, &mut grad.l1);
    }
}

impl Parameters for ProsodyEmbedParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.l1.visit(&format!("{prefix}.l1"), out);
        self.l2.visit(&format!("{prefix}.l2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.l1.visit_mut(&format!("{prefix}.l1"), out);
        self.l2.visit_mut(&format!("{prefix}.l2"), out);
    }
}

/// Embeds per-frame theta and beta statistics, concatenated column-wise.
pub fn prosody_embed(params: &ProsodyEmbedParams, c_theta: &Array2<f64>, c_beta: &Array2<f64>) -> Result<Array2<f64>> {
    if c_theta.nrows() != c_beta.nrows() {
        return Err(Error::invalid("theta and beta inputs have different frame counts"));
    }
    let input = ndarray::concatenate![ndarray::Axis(1), *c_theta, *c_beta];
    embed_concatenated(params, &input)
}

pub(crate) fn embed_concatenated(params: &ProsodyEmbedParams, input: &Array2<f64>) -> Result<Array2<f64>> {
    if input.ncols() != params.input_dim() {
        return Err(Error::invalid(format!(
            "prosody embedding expects {} inputs, got {}",
            params.input_dim(),
            input.ncols()
        )));
    }
    Ok(params.forward_cached(input).0)
}
