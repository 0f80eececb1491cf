use ndarray::{s, Array2};
use rand::Rng;

use super::layers::Dense;
use super::params::Parameters;
use crate::error::{Error, Result};

/// Sinusoidal positional encoding, `T x d_model`.
pub fn positional_encoding(frames: usize, d_model: usize) -> Result<Array2<f64>> {
    if d_model == 0 || d_model % 2 != 0 {
        return Err(Error::invalid(format!("positional encoding needs an even d_model, got {d_model}")));
    }
    Ok(Array2::from_shape_fn((frames, d_model), |(t, c)| {
        let i = (c / 2) as f64;
        let angle = t as f64 / 10000f64.powf(2.0 * i / d_model as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

/// Query, key, value and output projections of one attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub q: Dense,
    pub k: Dense,
    pub v: Dense,
    pub o: Dense,
}

impl AttentionParams {
    pub fn new(d_model: usize, rng: &mut impl Rng) -> Self {
        Self {
            q: Dense::new(d_model, d_model, rng),
            k: Dense::new(d_model, d_model, rng),
            v: Dense::new(d_model, d_model, rng),
            o: Dense::new(d_model, d_model, rng),
        }
    }

    pub fn d_model(&self) -> usize {
        self.q.input_dim()
    }
}

impl Parameters for AttentionParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.q.visit(&format!("{prefix}.q"), out);
        self.k.visit(&format!("{prefix}.k"), out);
        self.v.visit(&format!("{prefix}.v"), out);
        self.o.visit(&format!("{prefix}.o"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>) {
        self.q.visit_mut(&format!("{prefix}.q"), out);
        self.k.visit_mut(&format!("{prefix}.k"), out);
        self.v.visit_mut(&format!("{prefix}.v"), out);
        self.o.visit_mut(&format!("{prefix}.o"), out);
    }
}

/// Intermediate values of a multi-head attention pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Row-stochastic attention weights, one `T x T` matrix per head.
    pub weights: Vec<Array2<f64>>,
    /// Concatenated head outputs before the output projection.
    pub heads: Array2<f64>,
    head_count: usize,
}

fn softmax_rows(mut s: Array2<f64>) -> Array2<f64> {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    s
}

pub(crate) fn attention_forward(x: &Array2<f64>, p: &AttentionParams, head_count: usize) -> (Array2<f64>, AttentionCache) {
    let d = p.d_model();
    let dk = d / head_count;
    let scale = 1.0 / (dk as f64).sqrt();
    let q = p.q.forward(x);
    let k = p.k.forward(x);
    let v = p.v.forward(x);
    let mut heads = Array2::zeros((x.nrows(), d));
    let mut weights = Vec::with_capacity(head_count);
    for h in 0..head_count {
        let cols = s![.., h * dk..(h + 1) * dk];
        let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        let a = softmax_rows(scores);
        heads.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        weights.push(a);
    }
    let out = p.o.forward(&heads);
    (out, AttentionCache { input: x.clone(), q, k, v, weights, heads, head_count })
}

pub(crate) fn attention_backward(
    p: &AttentionParams,
    cache: &AttentionCache,
    dout: &Array2<f64>,
    grad: &mut AttentionParams,
) -> Array2<f64> {
    let d = p.d_model();
    let dk = d / cache.head_count;
    let scale = 1.0 / (dk as f64).sqrt();
    let dheads = p.o.backward(&cache.heads, dout, &mut grad.o);
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk_all = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, a) in cache.weights.iter().enumerate() {
        let cols = s![.., h * dk..(h + 1) * dk];
        let dho = dheads.slice(cols);
        let da = dho.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&dho));
        let mut ds = da;
        for (mut drow, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
            let dot: f64 = drow.iter().zip(arow.iter()).map(|(x, y)| x * y).sum();
            for (dv, av) in drow.iter_mut().zip(arow.iter()) {
                *dv = av * (*dv - dot) * scale;
            }
        }
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk_all.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }
    let mut dx = p.q.backward(&cache.input, &dq, &mut grad.q);
    dx += &p.k.backward(&cache.input, &dk_all, &mut grad.k);
    dx += &p.v.backward(&cache.input, &dv, &mut grad.v);
    dx
}

/// Scaled dot-product attention over `head_count` heads, concatenated and
/// passed through the output projection.
pub fn multi_head_attention(x: &Array2<f64>, params: &AttentionParams, head_count: usize) -> Result<Array2<f64>> {
    Ok(multi_head_attention_cached(x, params, head_count)?.0)
}

/// Same as [`multi_head_attention`] but also returns the attention weights
/// and pre-projection head outputs.
pub fn multi_head_attention_cached(
    x: &Array2<f64>,
    params: &AttentionParams,
    head_count: usize,
) -> Result<(Array2<f64>, AttentionCache)> {
    let d = params.d_model();
    if head_count == 0 || d % head_count != 0 {
        return Err(Error::invalid(format!("d_model {d} is not divisible by {head_count} heads")));
    }
    if x.ncols() != d {
        return Err(Error::invalid(format!("attention input has {} columns, expected {d}", x.ncols())));
    }
    Ok(attention_forward(x, params, head_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(d: usize, seed: u64) -> AttentionParams {
        AttentionParams::new(d, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn positional_encoding_values() {
        let pe = positional_encoding(10, 8).unwrap();
        for c in 0..8 {
            assert_eq!(pe[[0, c]], if c % 2 == 0 { 0.0 } else { 1.0 });
        }
        assert!((pe[[1, 0]] - 0.84147).abs() < 1e-5);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(positional_encoding(4, 7).is_err());
    }

    #[test]
    fn single_token_attends_to_itself() {
        let p = params(8, 1);
        let x = Array2::from_shape_fn((1, 8), |(_, c)| c as f64 * 0.1);
        let (_, cache) = multi_head_attention_cached(&x, &p, 2).unwrap();
        assert!(cache.weights.iter().all(|a| (a[[0, 0]] - 1.0).abs() < 1e-15));
        let v = p.v.forward(&x);
        for (a, b) in cache.heads.iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_keys_give_uniform_weights() {
        let mut p = params(8, 2);
        p.k.w.fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((5, 8), |_| rng.random_range(-1.0..1.0));
        let (_, cache) = multi_head_attention_cached(&x, &p, 4).unwrap();
        for a in &cache.weights {
            assert!(a.iter().all(|w| (w - 0.2).abs() < 1e-12));
        }
        let v = p.v.forward(&x);
        let mean = v.mean_axis(ndarray::Axis(0)).unwrap();
        for row in cache.heads.rows() {
            for (a, b) in row.iter().zip(mean.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_outputs_are_convex() {
        let p = params(64, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((4, 64), |_| rng.random_range(-2.0..2.0));
        let (out, cache) = multi_head_attention_cached(&x, &p, 4).unwrap();
        assert_eq!(out.dim(), (4, 64));
        for a in &cache.weights {
            for row in a.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
        }
        let v = p.v.forward(&x);
        for c in 0..64 {
            let col = v.column(c);
            let lo = col.fold(f64::INFINITY, |a, &b| a.min(b));
            let hi = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            assert!(cache.heads.column(c).iter().all(|&h| h >= lo - 1e-12 && h <= hi + 1e-12));
        }
    }

    #[test]
    fn shape_errors() {
        let p = params(8, 5);
        assert!(multi_head_attention(&Array2::zeros((3, 6)), &p, 2).is_err());
        assert!(multi_head_attention(&Array2::zeros((3, 8)), &p, 3).is_err());
    }
}
