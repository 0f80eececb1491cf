use ndarray::{Array2, Axis};
use rand::Rng;

use super::params::Parameters;

/// Fully connected layer `y = x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((input, output), |_| rng.random_range(-limit..limit)),
            b: Array2::zeros((1, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

impl Parameters for Dense {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        out.push((format!("{prefix}.w"), &self.w));
        out.push((format!("{prefix}.b"), &self.b));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu_backward(pre: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut out = dy.clone();
    out.zip_mut_with(pre, |d, p| {
        if *p <= 0.0 {
            *d = 0.0;
        }
    });
    out
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-token layer normalization with learned scale and shift (`1 x d` each).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array2<f64>,
    pub beta: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    /// Normalized input before scale/shift.
    pub xhat: Array2<f64>,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self { gamma: Array2::ones((1, dim)), beta: Array2::zeros((1, dim)) }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let d = x.ncols() as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Array2<f64>, grad: &mut LayerNorm) -> Array2<f64> {
        grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (t, mut row) in dx.rows_mut().into_iter().enumerate() {
            let g = dxhat.row(t);
            let xh = cache.xhat.row(t);
            let mean_g = g.sum() / d;
            let mean_gx = g.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
            let inv = cache.inv_std[t];
            for ((o, gi), xi) in row.iter_mut().zip(g.iter()).zip(xh.iter()) {
                *o = inv * (gi - mean_g - xi * mean_gx);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        out.push((format!("{prefix}.gamma"), &self.gamma));
        out.push((format!("{prefix}.beta"), &self.beta));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        out.push((format!("{prefix}.gamma"), &mut self.gamma));
        out.push((format!("{prefix}.beta"), &mut self.beta));
    }
}

/// Inverted dropout mask: entries are 0 or `1 / (1 - rate)`.
pub fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut impl Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < rate { 0.0 } else { keep })
}
