use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NVTF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

/// Serializes a tensor as little-endian `f32` with a small header:
/// magic, version, dtype, rank, a reserved byte, then `rank` u64 dims.
pub fn encode_tensor(t: &ArrayD<f64>) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.ndim()).map_err(|_| Error::invalid("tensor rank exceeds 255"))?;
    let mut out = Vec::with_capacity(8 + 8 * t.ndim() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, rank, 0]);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.iter() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::invalid(format!("tensor value {v} is not representable as a finite f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> std::result::Result<ArrayD<f64>, String> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err("missing NVTF magic".into());
    }
    let (version, dtype, rank) = (bytes[4], bytes[5], bytes[6] as usize);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    if dtype != DTYPE_F32 {
        return Err(format!("unsupported dtype {dtype}"));
    }
    let header = 8 + 8 * rank;
    if bytes.len() < header {
        return Err("truncated header".into());
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")) as usize)
        .collect();
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or("dimension overflow")?;
    let payload = &bytes[header..];
    if payload.len() != count.checked_mul(4).ok_or("dimension overflow")? {
        return Err(format!("payload has {} bytes, expected {}", payload.len(), count * 4));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4-byte chunk"))))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), values).map_err(|e| e.to_string())
}

pub fn write_tensor(path: &Path, t: &ArrayD<f64>) -> Result<()> {
    let bytes = encode_tensor(t)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<ArrayD<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
}

pub fn matrix_from_tensor(t: ArrayD<f64>, path: &Path) -> Result<Array2<f64>> {
    t.into_dimensionality()
        .map_err(|_| Error::Format { path: path.to_path_buf(), reason: "expected a rank-2 tensor".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = ArrayD::from_shape_vec(IxDyn(&[2, 3]), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        let b = encode_tensor(&t).unwrap();
        assert_eq!(&b[..8], &[b'N', b'V', b'T', b'F', 1, 0, 2, 0]);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(b.len(), 24 + 24);
        assert_eq!(f32::from_le_bytes(b[44..48].try_into().unwrap()), 6.5);
        assert_eq!(decode_tensor(&b).unwrap(), t);
    }

    #[test]
    fn malformed_inputs() {
        let t = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.0, 2.0]).unwrap();
        let good = encode_tensor(&t).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_tensor(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(decode_tensor(&bad).is_err());
        assert!(decode_tensor(&good[..good.len() - 1]).is_err());
        assert!(encode_tensor(&ArrayD::from_elem(IxDyn(&[1]), f64::NAN)).is_err());
    }

    #[test]
    fn file_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.nvtf");
        let t = ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![0.5, -1.0, 2.0, 3.0]).unwrap();
        write_tensor(&p, &t).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), t);
        assert!(matches!(read_tensor(&dir.path().join("none.nvtf")), Err(Error::FileNotFound(_))));
    }

    proptest! {
        #[test]
        fn byte_exact_round_trip(values in proptest::collection::vec(-1e30f64..1e30, 0..64), split in 1usize..4) {
            let n = values.len() - values.len() % split;
            let t = ArrayD::from_shape_vec(IxDyn(&[split, n / split]), values[..n].to_vec()).unwrap();
            let bytes = encode_tensor(&t).unwrap();
            let again = encode_tensor(&decode_tensor(&bytes).unwrap()).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }
}
