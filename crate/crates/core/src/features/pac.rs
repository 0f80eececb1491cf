use num_complex::Complex64;

use crate::dsp::analytic_signal;
use crate::preprocess::bandpass_signal;
use crate::{Error, Result};

pub const THETA_BAND: (f64, f64) = (4.0, 8.0);
pub const GAMMA_BAND: (f64, f64) = (70.0, 170.0);

/// Theta-phase / high-gamma-amplitude coupling of two band-limited signals.
///
/// `PAC = |mean_t A(t) e^{j phi(t)}|` where `A` is the Hilbert envelope of
/// `high_band` rescaled to unit mean and `phi` the Hilbert phase of
/// `low_band`. The unit-mean rescaling bounds the result to [0, 1].
pub fn pac(low_band: &[f64], high_band: &[f64], fs: f64) -> Result<f64> {
    if low_band.len() != high_band.len() {
        return Err(Error::invalid("pac inputs must have equal length"));
    }
    if (low_band.len() as f64) < 2.0 * fs {
        return Err(Error::invalid(format!("pac needs >= 2 s of signal ({} samples)", (2.0 * fs) as usize)));
    }
    let terms = coupling_terms(low_band, high_band)?;
    let sum: Complex64 = terms.iter().sum();
    Ok((sum.norm() / terms.len() as f64).min(1.0))
}

/// Per-sample `A(t) e^{j phi(t)}` with the unit-mean envelope.
pub(crate) fn coupling_terms(low_band: &[f64], high_band: &[f64]) -> Result<Vec<Complex64>> {
    let spread = |x: &[f64]| x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let (lo, hi) = spread(low_band);
    if hi - lo <= 0.0 {
        return Err(Error::PacUndefined("low band is constant, phase undefined".into()));
    }
    let phase = analytic_signal(low_band)?.instantaneous_phase_rad;
    let env = analytic_signal(high_band)?.amplitude_envelope;
    let mean_env = env.iter().sum::<f64>() / env.len() as f64;
    if mean_env <= 1e-12 {
        return Err(Error::PacUndefined("high band has no amplitude".into()));
    }
    Ok(env.iter().zip(&phase).map(|(a, p)| Complex64::from_polar(a / mean_env, *p)).collect())
}

/// Extracts the theta and high-gamma bands from a broadband signal.
pub fn pac_bands(x: &[f64], fs: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let theta = bandpass_signal(x, fs, THETA_BAND.0, THETA_BAND.1)?;
    let gamma = bandpass_signal(x, fs, GAMMA_BAND.0, GAMMA_BAND.1.min(0.45 * fs))?;
    Ok((theta, gamma))
}

/// PAC of a broadband signal after theta / high-gamma bandpass filtering.
pub fn pac_broadband(x: &[f64], fs: f64) -> Result<f64> {
    let (theta, gamma) = pac_bands(x, fs)?;
    pac(&theta, &gamma, fs)
}
