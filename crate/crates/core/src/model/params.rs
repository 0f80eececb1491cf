use ndarray::Array2;

/// A bundle of named parameter tensors. Gradients use the same type, so
/// optimizers and checkpoints can walk parameters and gradients in lockstep.
pub trait Parameters: Clone {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Array2<f64>)>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Array2<f64>)>);

    fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut v = Vec::new();
        self.visit("", &mut v);
        v.into_iter().map(|(n, t)| (n.trim_start_matches('.').to_string(), t)).collect()
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut v = Vec::new();
        self.visit_mut("", &mut v);
        v.into_iter().map(|(n, t)| (n.trim_start_matches('.').to_string(), t)).collect()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_mut() {
            t.fill(0.0);
        }
        z
    }

    fn scale(&mut self, k: f64) {
        for (_, t) in self.named_mut() {
            t.mapv_inplace(|v| v * k);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            *a += b;
        }
    }

    fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction, holding first/second moments per tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new<P: Parameters>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Array2<f64>> = params.named().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((_, p), (_, g)), (m, v)) in
            params.named_mut().into_iter().zip(grads.named()).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::Dense;
    use rand::SeedableRng;

    #[test]
    fn adam_minimizes_quadratic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut p = Dense::new(3, 2, &mut rng);
        let mut opt = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, &p);
        for _ in 0..2000 {
            // loss = sum(p^2), grad = 2p
            let mut g = p.clone();
            g.scale(2.0);
            opt.step(&mut p, &g);
        }
        assert!(p.named().iter().all(|(_, t)| t.iter().all(|v| v.abs() < 1e-3)));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p0 = Dense::new(4, 4, &mut rng);
        let mut p = p0.clone();
        let mut opt = Adam::new(AdamConfig { lr: 0.0, ..AdamConfig::default() }, &p);
        let g = Dense::new(4, 4, &mut rng);
        opt.step(&mut p, &g);
        assert_eq!(p, p0);
    }

    #[test]
    fn names_are_stable() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = Dense::new(2, 2, &mut rng);
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["w", "b"]);
        assert_eq!(p.parameter_count(), 6);
    }
}
