use ndarray::Array2;

use super::FeatureMatrix;
use crate::preprocess::SIGMA_FLOOR;
use crate::{Error, Result};

/// Per-column mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    /// Fits statistics over the rows of one or more matrices with equal column counts.
    pub fn fit<'a>(blocks: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut rows = 0usize;
        let blocks: Vec<&Array2<f64>> = blocks.into_iter().collect();
        for b in &blocks {
            if sum.is_empty() {
                sum = vec![0.0; b.ncols()];
            }
            if b.ncols() != sum.len() {
                return Err(Error::invalid("normalization blocks have different column counts"));
            }
            for row in b.rows() {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            rows += b.nrows();
        }
        if rows < 2 {
            return Err(Error::invalid("normalization needs at least 2 frames"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / rows as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for b in &blocks {
            for row in b.rows() {
                var.iter_mut().zip(row).zip(&mean).for_each(|((acc, v), m)| *acc += (v - m).powi(2));
            }
        }
        let std = var.iter().map(|v| (v / rows as f64).sqrt().max(SIGMA_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(data)?;
        let mut out = data.clone();
        for mut row in out.rows_mut() {
            row.iter_mut().zip(self.mean.iter().zip(&self.std)).for_each(|(v, (m, s))| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn invert(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(data)?;
        let mut out = data.clone();
        for mut row in out.rows_mut() {
            row.iter_mut().zip(self.mean.iter().zip(&self.std)).for_each(|(v, (m, s))| *v = *v * s + m);
        }
        Ok(out)
    }

    fn check(&self, data: &Array2<f64>) -> Result<()> {
        if data.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "matrix has {} columns, statistics cover {}",
                data.ncols(),
                self.mean.len()
            )));
        }
        Ok(())
    }
}

/// Z-scores each column. Supplied statistics (from training folds) are
/// applied as-is; otherwise they are fitted on `m`.
pub fn normalize_features(m: &FeatureMatrix, stats: Option<&NormalizationStats>) -> Result<(FeatureMatrix, NormalizationStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormalizationStats::fit([&m.data])?,
    };
    let data = stats.apply(&m.data)?;
    Ok((FeatureMatrix { data, ..m.clone() }, stats))
}
