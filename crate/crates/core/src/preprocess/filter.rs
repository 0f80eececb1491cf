use std::f64::consts::PI;

use super::MultiChannelRecording;
use crate::{Error, Result};

/// Normalized second-order section (a0 = 1), run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a0: f64, a1: f64, a2: f64) -> Self {
        Self { b: [b[0] / a0, b[1] / a0, b[2] / a0], a: [a1 / a0, a2 / a0] }
    }

    pub fn lowpass(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let b = (1.0 - cos) / 2.0;
        Self::from_raw([b, 1.0 - cos, b], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn highpass(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let b = (1.0 + cos) / 2.0;
        Self::from_raw([b, -(1.0 + cos), b], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn notch(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        Self::from_raw([1.0, -2.0 * cos, 1.0], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    /// Gain at DC.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that holds the output steady for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        [g - self.b[0], z2]
    }

    /// Magnitude response at `f` Hz.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sos(pub Vec<Biquad>);

/// Q factors of the conjugate pole pairs of an even-order Butterworth prototype.
fn butterworth_qs(order: usize) -> Vec<f64> {
    (0..order / 2).map(|k| 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).cos())).collect()
}

const ORDER: usize = 4;

/// Ratio between the -3 dB point of one Butterworth pass and that of the
/// squared (forward-backward) response, in prewarped analog frequency.
fn filtfilt_cutoff_ratio(order: usize) -> f64 {
    (2f64.sqrt() - 1.0).powf(1.0 / (2 * order) as f64)
}

fn prewarped_shift(f: f64, fs: f64, factor: f64) -> f64 {
    let omega = (PI * f / fs).tan() * factor;
    omega.atan() * fs / PI
}

impl Sos {
    /// 4th-order Butterworth lowpass whose zero-phase response is -3 dB at `cutoff`.
    pub fn butter_lowpass(cutoff: f64, fs: f64) -> Self {
        let f = prewarped_shift(cutoff, fs, 1.0 / filtfilt_cutoff_ratio(ORDER));
        Sos(butterworth_qs(ORDER).into_iter().map(|q| Biquad::lowpass(f, fs, q)).collect())
    }

    /// 4th-order Butterworth highpass whose zero-phase response is -3 dB at `cutoff`.
    pub fn butter_highpass(cutoff: f64, fs: f64) -> Self {
        let f = prewarped_shift(cutoff, fs, filtfilt_cutoff_ratio(ORDER));
        Sos(butterworth_qs(ORDER).into_iter().map(|q| Biquad::highpass(f, fs, q)).collect())
    }

    pub fn butter_bandpass(lo: f64, hi: f64, fs: f64) -> Self {
        let mut s = Self::butter_highpass(lo, fs);
        s.0.extend(Self::butter_lowpass(hi, fs).0);
        s
    }

    /// Magnitude response of one forward pass.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        self.0.iter().map(|b| b.gain_at(f, fs)).product()
    }

    fn run(&self, x: &mut [f64], x0: f64) {
        let mut step_input = x0;
        for sec in &self.0 {
            let zi = sec.step_state();
            let mut z = [zi[0] * step_input, zi[1] * step_input];
            for v in x.iter_mut() {
                let input = *v;
                let y = sec.b[0] * input + z[0];
                z[0] = sec.b[1] * input - sec.a[0] * y + z[1];
                z[1] = sec.b[2] * input - sec.a[1] * y;
                *v = y;
            }
            step_input *= sec.dc_gain();
        }
    }
}

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions.
pub fn filtfilt(sos: &Sos, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 || sos.0.is_empty() {
        return x.to_vec();
    }
    let padlen = (3 * (2 * sos.0.len() + 1)).max(64).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let x0 = ext[0];
    sos.run(&mut ext, x0);
    ext.reverse();
    let x0 = ext[0];
    sos.run(&mut ext, x0);
    ext.reverse();
    ext[padlen..padlen + n].to_vec()
}

pub fn bandpass_signal(x: &[f64], fs: f64, lo_hz: f64, hi_hz: f64) -> Result<Vec<f64>> {
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0) {
        return Err(Error::invalid(format!(
            "band [{lo_hz}, {hi_hz}] Hz must satisfy 0 < lo < hi < {}",
            fs / 2.0
        )));
    }
    Ok(filtfilt(&Sos::butter_bandpass(lo_hz, hi_hz, fs), x))
}

/// Zero-phase 4th-order Butterworth bandpass applied per channel.
pub fn bandpass(rec: &MultiChannelRecording, lo_hz: f64, hi_hz: f64) -> Result<MultiChannelRecording> {
    let fs = f64::from(rec.sample_rate_hz);
    // validate once before touching any channel
    bandpass_signal(&[], fs, lo_hz, hi_hz)?;
    let sos = Sos::butter_bandpass(lo_hz, hi_hz, fs);
    Ok(rec.map_channels(|x| filtfilt(&sos, x)))
}

pub(crate) const NOTCH_Q: f64 = 30.0;

fn notch_cascade(fs: f64, mains_hz: f64, max_hz: f64) -> Result<Sos> {
    if !(mains_hz > 0.0 && mains_hz < fs / 2.0) {
        return Err(Error::invalid(format!("mains {mains_hz} Hz must lie in (0, {})", fs / 2.0)));
    }
    let limit = max_hz.min(fs / 2.0);
    let mut sections = Vec::new();
    let mut k = 1.0;
    while k * mains_hz < limit {
        sections.push(Biquad::notch(k * mains_hz, fs, NOTCH_Q));
        k += 1.0;
    }
    Ok(Sos(sections))
}

pub fn notch_signal(x: &[f64], fs: f64, mains_hz: f64, max_hz: f64) -> Result<Vec<f64>> {
    Ok(filtfilt(&notch_cascade(fs, mains_hz, max_hz)?, x))
}

/// Zero-phase Q = 30 notches at `mains_hz` and every harmonic below `max_hz`.
pub fn notch(rec: &MultiChannelRecording, mains_hz: f64, max_hz: f64) -> Result<MultiChannelRecording> {
    let sos = notch_cascade(f64::from(rec.sample_rate_hz), mains_hz, max_hz)?;
    Ok(rec.map_channels(|x| filtfilt(&sos, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    const FS: f64 = 1024.0;

    fn tone(freq: f64, secs: f64) -> Vec<f64> {
        (0..(FS * secs) as usize).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn interior(x: &[f64]) -> &[f64] {
        let edge = FS as usize;
        &x[edge..x.len() - edge]
    }

    fn rec(x: Vec<f64>) -> MultiChannelRecording {
        let n = x.len();
        MultiChannelRecording::with_default_labels(Array2::from_shape_vec((1, n), x).unwrap(), FS as u32).unwrap()
    }

    fn bp(x: Vec<f64>) -> Vec<f64> {
        bandpass(&rec(x), 0.5, 170.0).unwrap().data.row(0).to_vec()
    }

    #[test]
    fn butterworth_qs_order_four() {
        let q = butterworth_qs(4);
        assert!((q[0] - 0.541_196_100_146_197).abs() < 1e-12);
        assert!((q[1] - 1.306_562_964_876_376_5).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_response_is_minus_3db_at_cutoffs() {
        let sos = Sos::butter_bandpass(0.5, 170.0, FS);
        let g_hi = sos.gain_at(170.0, FS).powi(2);
        let g_lo = sos.gain_at(0.5, FS).powi(2);
        assert!((g_hi - std::f64::consts::FRAC_1_SQRT_2).abs() < 2e-3, "{g_hi}");
        assert!((g_lo - std::f64::consts::FRAC_1_SQRT_2).abs() < 2e-3, "{g_lo}");
    }

    #[test]
    fn passband_within_one_db() {
        let sos = Sos::butter_bandpass(0.5, 170.0, FS);
        let mut f = 1.0;
        while f <= 136.0 {
            let db = 20.0 * sos.gain_at(f, FS).powi(2).log10();
            assert!(db.abs() <= 1.0, "{f} Hz: {db} dB");
            f += 0.5;
        }
    }

    #[test]
    fn dc_offset_rejected() {
        let y = bp(vec![5.0; 8 * FS as usize]);
        let peak = interior(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 0.05, "residual {peak}");
    }

    #[test]
    fn sixty_hz_kept_four_hundred_rejected() {
        let x = tone(60.0, 6.0);
        let y = bp(x.clone());
        let ratio = rms(interior(&y)) / rms(interior(&x));
        assert!((ratio - 1.0).abs() <= 0.12, "{ratio}");
        let x = tone(400.0, 6.0);
        let y = bp(x.clone());
        let db = 20.0 * (rms(interior(&y)) / rms(interior(&x))).log10();
        assert!(db <= -20.0, "{db}");
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(bandpass(&rec(vec![0.0; 100]), 10.0, 5.0).is_err());
        assert!(bandpass(&rec(vec![0.0; 100]), 0.5, 600.0).is_err());
        assert!(bandpass(&rec(vec![0.0; 100]), 0.0, 100.0).is_err());
    }

    #[test]
    fn notch_response() {
        let n = |x: Vec<f64>| notch(&rec(x), 50.0, 170.0).unwrap().data.row(0).to_vec();
        let x = tone(50.0, 6.0);
        let db = 20.0 * (rms(interior(&n(x.clone()))) / rms(interior(&x))).log10();
        assert!(db <= -30.0, "{db}");
        let x = tone(30.0, 6.0);
        let ratio = rms(interior(&n(x.clone()))) / rms(interior(&x));
        assert!((ratio - 1.0).abs() <= 0.05);
        assert!(n(vec![0.0; 2048]).iter().all(|v| *v == 0.0));
        assert_eq!(notch_cascade(FS, 50.0, 170.0).unwrap().0.len(), 3);
    }

    #[test]
    fn symmetric_pulse_stays_centered() {
        let center = 8192;
        let len = 2 * center + 1;
        let x: Vec<f64> = (0..len).map(|i| (-((i as f64 - center as f64) / 6.0).powi(2)).exp()).collect();
        for y in [bp(x.clone()), notch(&rec(x.clone()), 50.0, 170.0).unwrap().data.row(0).to_vec()] {
            let peak = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!((peak as i64 - center as i64).abs() <= 1);
            for k in 1..200 {
                let d = (y[center - k] - y[center + k]).abs(); assert!(d < 1e-4, "k={k} d={d}");
            }
        }
    }
}
