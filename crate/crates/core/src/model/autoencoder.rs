use ndarray::Array2;
use rand::Rng;

use super::layers::{relu, relu_backward, Dense};
use super::params::Parameters;
use crate::error::{Error, Result};

pub const AE_HIDDEN: usize = 256;
pub const AE_LATENT: usize = 64;

/// Fully connected autoencoder `D -> hidden -> latent -> hidden -> D` with
/// ReLU on the hidden layers and identity on the latent and output layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub enc1: Dense,
    pub enc2: Dense,
    pub dec1: Dense,
    pub dec2: Dense,
}

/// Activations kept from an encoder pass for backprop.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    input: Array2<f64>,
    pre1: Array2<f64>,
    h1: Array2<f64>,
}

impl AutoencoderParams {
    pub fn new(input_dim: usize, hidden: usize, latent: usize, rng: &mut impl Rng) -> Self {
        Self {
            enc1: Dense::new(input_dim, hidden, rng),
            enc2: Dense::new(hidden, latent, rng),
            dec1: Dense::new(latent, hidden, rng),
            dec2: Dense::new(hidden, input_dim, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc1.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc2.output_dim()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "autoencoder expects {} feature columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_cached(&self, x: &Array2<f64>) -> (Array2<f64>, EncoderCache) {
        let pre1 = self.enc1.forward(x);
        let h1 = relu(&pre1);
        let z = self.enc2.forward(&h1);
        (z, EncoderCache { input: x.clone(), pre1, h1 })
    }

    /// Accumulates encoder gradients for `dz = dL/dlatent`.
    pub(crate) fn encode_backward(&self, cache: &EncoderCache, dz: &Array2<f64>, grad: &mut AutoencoderParams) {
        let dh1 = self.enc2.backward(&cache.h1, dz, &mut grad.enc2);
        let dpre1 = relu_backward(&cache.pre1, &dh1);
        self.enc1.backward(&cache.input, &dpre1, &mut grad.enc1);
    }

    pub fn decode(&self, z: &Array2<f64>) -> Array2<f64> {
        self.dec2.forward(&relu(&self.dec1.forward(z)))
    }

    /// Mean squared reconstruction error and its gradient.
    pub(crate) fn reconstruction_loss_and_grad(&self, x: &Array2<f64>) -> (f64, AutoencoderParams) {
        let mut grad = self.zeros_like();
        let (z, enc) = self.encode_cached(x);
        let pre2 = self.dec1.forward(&z);
        let h2 = relu(&pre2);
        let y = self.dec2.forward(&h2);
        let diff = &y - x;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
        let dy = diff.mapv(|d| 2.0 * d / n);
        let dh2 = self.dec2.backward(&h2, &dy, &mut grad.dec2);
        let dpre2 = relu_backward(&pre2, &dh2);
        let dz = self.dec1.backward(&z, &dpre2, &mut grad.dec1);
        self.encode_backward(&enc, &dz, &mut grad);
        (loss, grad)
    }

    pub fn reconstruction_mse(&self, x: &Array2<f64>) -> Result<f64> {
        self.check_input(x)?;
        let y = self.decode(&self.encode_cached(x).0);
        Ok((&y - x).iter().map(|d| d * d).sum::<f64>() / x.len().max(1) as f64)
    }
}

impl Parameters for AutoencoderParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.enc1.visit(&format!("{prefix}.enc1"), out);
        self.enc2.visit(&format!("{prefix}.enc2"), out);
        self.dec1.visit(&format!("{prefix}.dec1"), out);
        self.dec2.visit(&format!("{prefix}.dec2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.enc1.visit_mut(&format!("{prefix}.enc1"), out);
        self.enc2.visit_mut(&format!("{prefix}.enc2"), out);
        self.dec1.visit_mut(&format!("{prefix}.dec1"), out);
        self.dec2.visit_mut(&format!("{prefix}.dec2"), out);
    }
}

/// Deterministic encoder pass producing the `T x latent` representation.
pub fn ae_encode(params: &AutoencoderParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    params.check_input(features)?;
    Ok(params.encode_cached(features).0)
}
