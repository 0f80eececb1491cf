use std::f64::consts::{LN_10, PI};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Cepstral coefficients kept for distortion measurements (c1..c13).
pub const MCD_COEFFICIENTS: usize = 13;

/// Orthonormal DCT-II of each log-mel frame, keeping coefficients
/// `1..=MCD_COEFFICIENTS` (the energy term c0 is dropped).
pub fn mel_cepstrum(log_mel: &Array2<f64>) -> Result<Array2<f64>> {
    let bins = log_mel.ncols();
    if bins <= MCD_COEFFICIENTS {
        return Err(Error::invalid(format!("need more than {MCD_COEFFICIENTS} mel bins, got {bins}")));
    }
    let n = bins as f64;
    let basis = Array2::from_shape_fn((bins, MCD_COEFFICIENTS), |(i, k)| {
        let k = (k + 1) as f64;
        (2.0 / n).sqrt() * (PI * k * (i as f64 + 0.5) / n).cos()
    });
    Ok(log_mel.dot(&basis))
}

/// Mean over frames of `(10 / ln 10) * sqrt(2 * sum_d (c_d - ĉ_d)^2)`.
pub fn mcd(c: &Array2<f64>, c_hat: &Array2<f64>) -> Result<f64> {
    if c.dim() != c_hat.dim() {
        return Err(Error::invalid(format!("cepstra shapes differ: {:?} vs {:?}", c.dim(), c_hat.dim())));
    }
    if c.nrows() == 0 {
        return Err(Error::invalid("no frames to compare"));
    }
    let k = 10.0 / LN_10;
    let total: f64 = c
        .rows()
        .into_iter()
        .zip(c_hat.rows())
        .map(|(a, b)| k * (2.0 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt())
        .sum();
    Ok(total / c.nrows() as f64)
}
