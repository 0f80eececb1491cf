use ndarray::Array2;

use crate::error::{Error, Result};

fn pearson_slices(a: impl Iterator<Item = f64> + Clone, b: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let n = a.clone().count() as f64;
    if n < 2.0 {
        return None;
    }
    let ma = a.clone().sum::<f64>() / n;
    let mb = b.clone().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn check_shapes(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<()> {
    if y.dim() != y_hat.dim() {
        return Err(Error::invalid(format!("shape mismatch: {:?} vs {:?}", y.dim(), y_hat.dim())));
    }
    Ok(())
}

/// Pearson correlation over all frames and bins, flattened.
pub fn pearson(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    pearson_slices(y.iter().copied(), y_hat.iter().copied())
        .ok_or_else(|| Error::CorrelationUndefined("fewer than 2 values or a constant input".into()))
}

/// Mean of the per-bin correlations of the bin trajectories over time.
/// Bins where either trajectory is constant are left out.
pub fn pearson_per_bin(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    let scores: Vec<f64> = y
        .columns()
        .into_iter()
        .zip(y_hat.columns())
        .filter_map(|(a, b)| pearson_slices(a.iter().copied(), b.iter().copied()))
        .collect();
    if scores.is_empty() {
        return Err(Error::CorrelationUndefined("every bin trajectory is constant".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Simplified intelligibility score: the mean over frames of the correlation
/// between clean and degraded spectral vectors. Frames where either vector
/// is constant are skipped.
pub fn stoi_simple(clean: &Array2<f64>, degraded: &Array2<f64>) -> Result<f64> {
    check_shapes(clean, degraded)?;
    let scores: Vec<f64> = clean
        .rows()
        .into_iter()
        .zip(degraded.rows())
        .filter_map(|(a, b)| pearson_slices(a.iter().copied(), b.iter().copied()))
        .collect();
    if scores.is_empty() {
        return Err(Error::StoiUndefined);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pearson_identities() {
        let y = random((20, 8), 1);
        assert!((pearson(&y, &y).unwrap() - 1.0).abs() <= 1e-12);
        let centered = &y - y.mean().unwrap();
        assert!((pearson(&centered, &centered.mapv(|v| -v)).unwrap() + 1.0).abs() <= 1e-12);
        assert!((pearson(&y, &y.mapv(|v| 2.0 * v + 3.0)).unwrap() - 1.0).abs() <= 1e-12);
        assert!((pearson_per_bin(&y, &y).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pearson_errors() {
        let y = random((4, 3), 2);
        assert!(matches!(pearson(&y, &Array2::from_elem((4, 3), 1.0)), Err(Error::CorrelationUndefined(_))));
        assert!(pearson(&y, &random((3, 4), 3)).is_err());
        assert!(pearson(&Array2::from_elem((1, 1), 1.0), &Array2::from_elem((1, 1), 2.0)).is_err());
    }

    #[test]
    fn stoi_identities() {
        let x = random((30, 40), 4);
        assert!((stoi_simple(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
        let mut scaled = x.clone();
        for (t, mut row) in scaled.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| v * (1.0 + t as f64));
        }
        assert!((stoi_simple(&x, &scaled).unwrap() - 1.0).abs() <= 1e-12);
        assert!(matches!(stoi_simple(&Array2::zeros((3, 4)), &x.slice(ndarray::s![..3, ..4]).to_owned()), Err(Error::StoiUndefined)));
    }

    #[test]
    fn stoi_of_independent_noise_is_near_zero() {
        for seed in 0..5 {
            let s = stoi_simple(&random((200, 128), 10 + seed), &random((200, 128), 100 + seed)).unwrap();
            assert!(s.abs() <= 0.1, "{s}");
        }
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(seed in 0u64..1000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let y = random((6, 5), seed);
            let y_hat = random((6, 5), seed + 1);
            let base = pearson(&y, &y_hat).unwrap();
            let moved = pearson(&y, &y_hat.mapv(|v| a * v + b)).unwrap();
            prop_assert!((base - moved).abs() <= 1e-12);
        }

        #[test]
        fn stoi_in_range(seed in 0u64..1000) {
            let s = stoi_simple(&random((5, 7), seed), &random((5, 7), seed + 7)).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }
}
