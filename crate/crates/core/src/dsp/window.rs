use std::f64::consts::PI;

use crate::{Error, Result};

/// Symmetric Hann window, `w[n] = 0.5 - 0.5 cos(2 pi n / (len - 1))`.
pub fn hann_window(len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::invalid(format!("hann window needs len >= 2, got {len}")));
    }
    let denom = (len - 1) as f64;
    Ok((0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / denom).cos()).collect())
}
