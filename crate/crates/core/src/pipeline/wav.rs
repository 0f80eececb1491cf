use std::path::Path;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32767.0;

/// Writes 16-bit PCM mono. Samples outside [-1, 1] are clipped; the number
/// of clipped samples is returned.
pub fn write_wav(path: &Path, x: &Waveform) -> Result<usize> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let fail = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), reason: other.to_string() },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(fail)?;
    let mut clipped = 0;
    for &s in &x.samples {
        if s.abs() > 1.0 {
            clipped += 1;
        }
        w.write_sample((s.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16).map_err(fail)?;
    }
    w.finalize().map_err(fail)?;
    Ok(clipped)
}

/// Reads a mono 16-bit PCM file into [-1, 1] samples.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let fail = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), reason: other.to_string() },
    };
    let mut r = hound::WavReader::open(path).map_err(fail)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format { path: path.to_path_buf(), reason: "expected 16-bit PCM mono".into() });
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(fail)?;
    Waveform::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_clipping() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x = Waveform::new(vec![0.0, 0.5, -0.25, 1.5, -2.0], 16000).unwrap();
        assert_eq!(write_wav(&p, &x).unwrap(), 2);
        let y = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate_hz, 16000);
        let expected = [0.0, 0.5, -0.25, 1.0, -1.0];
        for (a, b) in y.samples.iter().zip(expected) {
            assert!((a - b).abs() <= 0.5 / FULL_SCALE);
        }
        assert!(matches!(read_wav(&dir.path().join("missing.wav")), Err(Error::FileNotFound(_))));
    }
}
