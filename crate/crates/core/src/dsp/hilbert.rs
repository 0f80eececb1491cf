use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Envelope and instantaneous phase of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    pub amplitude_envelope: Vec<f64>,
    /// Wrapped to (-pi, pi].
    pub instantaneous_phase_rad: Vec<f64>,
}

/// Maps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phase {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

pub(crate) fn analytic(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // h = [1, 2, ..., 2, (1 at n/2 for even n), 0, ...]
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v * scale).collect()
}

/// FFT-based analytic signal.
pub fn analytic_signal(x: &[f64]) -> Result<AnalyticSignal> {
    if x.len() < 8 {
        return Err(Error::invalid(format!("analytic signal needs >= 8 samples, got {}", x.len())));
    }
    let z = analytic(x);
    Ok(AnalyticSignal {
        amplitude_envelope: z.iter().map(|c| c.norm()).collect(),
        instantaneous_phase_rad: z.iter().map(|c| wrap_phase(c.arg())).collect(),
    })
}
