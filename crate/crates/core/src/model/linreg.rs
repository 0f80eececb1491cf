use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub const RIDGE_LAMBDA: f64 = 1e-3;

/// Ridge regression from feature frames to mel frames with an unpenalized
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegBaseline {
    /// `D x B` weights applied to centered features.
    pub weights: Array2<f64>,
    pub feature_mean: Array1<f64>,
    pub intercept: Array1<f64>,
    pub lambda: f64,
}

fn stack(blocks: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::invalid(format!("inconsistent shapes: {e}")))
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solves `(XcᵀXc + λI) W = XcᵀYc` on centered data.
pub fn linreg_fit(features: &[Array2<f64>], mels: &[Array2<f64>], lambda: f64) -> Result<LinRegBaseline> {
    if features.is_empty() || features.len() != mels.len() {
        return Err(Error::invalid("need matching, non-empty lists of feature and mel matrices"));
    }
    if features.iter().zip(mels).any(|(f, m)| f.nrows() != m.nrows()) {
        return Err(Error::invalid("feature and mel frame counts differ"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("ridge lambda must be positive"));
    }
    let x = stack(features)?;
    let y = stack(mels)?;
    if x.nrows() == 0 {
        return Err(Error::invalid("no training frames"));
    }
    let feature_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let intercept = y.mean_axis(Axis(0)).expect("non-empty");
    let xc = &x - &feature_mean;
    let yc = &y - &intercept;
    let mut gram = to_na(&xc.t().dot(&xc));
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = to_na(&xc.t().dot(&yc));
    let chol = gram.cholesky().ok_or_else(|| Error::invalid("ridge system is not positive definite"))?;
    let w = chol.solve(&rhs);
    let weights = Array2::from_shape_fn((w.nrows(), w.ncols()), |(i, j)| w[(i, j)]);
    Ok(LinRegBaseline { weights, feature_mean, intercept, lambda })
}

pub fn linreg_predict(model: &LinRegBaseline, features: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != model.weights.nrows() {
        return Err(Error::invalid(format!(
            "baseline expects {} feature columns, got {}",
            model.weights.nrows(),
            features.ncols()
        )));
    }
    Ok((features - &model.feature_mean).dot(&model.weights) + &model.intercept)
}
