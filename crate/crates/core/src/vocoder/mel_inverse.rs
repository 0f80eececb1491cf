use ndarray::Array2;

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};

/// Linear magnitude from a mel spectrogram.
///
/// Each mel band's power is spread back over the FFT bins it covers as a
/// per-bin power density (band power divided by filter area); a bin's power
/// is the filter-weighted average of the densities of the bands covering it.
/// A flat power spectrum is therefore recovered exactly inside the covered
/// range. Bins no filter touches get zero. The result is clamped at zero and
/// square-rooted.
pub fn mel_to_magnitude(mel: &MelSpectrogram, filterbank: &Array2<f64>) -> Result<Array2<f64>> {
    if filterbank.nrows() != mel.mel_bins() {
        return Err(Error::invalid(format!(
            "filterbank has {} filters but the spectrogram has {} mel bins",
            filterbank.nrows(),
            mel.mel_bins()
        )));
    }
    let power = mel.to_power().data;
    let area: Vec<f64> = filterbank.rows().into_iter().map(|r| r.sum()).collect();
    if area.iter().any(|&a| a <= 0.0) {
        return Err(Error::invalid("filterbank contains an empty filter"));
    }
    let mut density = power;
    for (mut col, a) in density.columns_mut().into_iter().zip(&area) {
        col.mapv_inplace(|v| v / a);
    }
    let coverage = filterbank.sum_axis(ndarray::Axis(0));
    let mut spread = density.dot(filterbank);
    for mut row in spread.rows_mut() {
        for (v, c) in row.iter_mut().zip(coverage.iter()) {
            *v = if *c > 0.0 { (*v / c).max(0.0).sqrt() } else { 0.0 };
        }
    }
    Ok(spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{mel_filterbank, MelConfig, MelScale};
    use std::f64::consts::PI;

    fn setup() -> (MelConfig, Array2<f64>) {
        let cfg = MelConfig::default();
        let fb = mel_filterbank(16000, 1024, &cfg).unwrap();
        (cfg, fb)
    }

    fn mel_of(power: &Array2<f64>, fb: &Array2<f64>, cfg: &MelConfig) -> MelSpectrogram {
        MelSpectrogram {
            data: power.dot(&fb.t()),
            scale: MelScale::Power,
            fmin_hz: cfg.fmin_hz,
            fmax_hz: cfg.fmax_hz,
            sample_rate_hz: 16000,
        }
    }

    fn bin_hz(k: usize) -> f64 {
        k as f64 * 16000.0 / 1024.0
    }

    #[test]
    fn flat_spectrum_round_trip() {
        let (cfg, fb) = setup();
        let flat = Array2::from_elem((3, 513), 2.0);
        let mag = mel_to_magnitude(&mel_of(&flat, &fb, &cfg), &fb).unwrap();
        for k in 0..513 {
            let f = bin_hz(k);
            if f >= cfg.fmin_hz && f <= cfg.fmax_hz && fb.column(k).sum() > 0.0 {
                assert!((mag[[0, k]] / 2f64.sqrt() - 1.0).abs() <= 0.2, "bin {k}");
            }
        }
    }

    #[test]
    fn zero_mel_gives_zero_magnitude() {
        let (cfg, fb) = setup();
        let mag = mel_to_magnitude(&mel_of(&Array2::zeros((2, 513)), &fb, &cfg), &fb).unwrap();
        assert!(mag.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smooth_spectrum_mel_round_trip() {
        let (cfg, fb) = setup();
        let power = Array2::from_shape_fn((2, 513), |(t, k)| 1.0 + 0.5 * (2.0 * PI * bin_hz(k) / 6000.0 + t as f64).cos());
        let mel = mel_of(&power, &fb, &cfg);
        let mag = mel_to_magnitude(&mel, &fb).unwrap();
        let again = mel_of(&mag.mapv(|m| m * m), &fb, &cfg);
        for (a, b) in again.data.iter().zip(mel.data.iter()) {
            assert!((a / b - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn log_input_and_mismatch() {
        let (cfg, fb) = setup();
        let flat = Array2::from_elem((1, 513), 1.0);
        let mel = mel_of(&flat, &fb, &cfg);
        let a = mel_to_magnitude(&mel, &fb).unwrap();
        let b = mel_to_magnitude(&mel.to_log(), &fb).unwrap();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-6));
        assert!(mel_to_magnitude(&mel, &fb.slice(ndarray::s![..39, ..]).to_owned()).is_err());
    }
}
