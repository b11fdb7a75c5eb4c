//! `VDF1` feature files: one sample per row, 32-bit floats on disk.
//!
//! ```text
//! "VDF1" | u32 rows | u32 cols | rows*cols x f32 (little-endian, row-major)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"VDF1";
const HEADER_LEN: usize = 12;

pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_features(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_feature_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    fs::write(path, encode_features(m)?)?;
    Ok(())
}

pub fn encode_features(m: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::format("too many rows for VDF1"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::format("too many columns for VDF1"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("feature file shorter than its header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format("bad magic bytes, expected VDF1"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(format!("empty feature matrix {rows}x{cols}")));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = (rows as u64) * (cols as u64) * 4;
    if payload.len() as u64 != expected {
        return Err(Error::format(format!(
            "header declares {rows}x{cols} ({expected} bytes) but payload holds {} bytes",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_at_f32_precision() {
        let vals: Vec<f64> = (0..35).map(|i| (i as f64 * 0.7315).sin() * 13.0).collect();
        let m = Matrix::from_vec(7, 5, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vdf");
        write_feature_matrix(&path, &m).unwrap();
        let back = read_feature_matrix(&path).unwrap();
        assert_eq!(back.shape(), (7, 5));
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(*a as f32, *b as f32);
        }
        // a second pass is exact
        write_feature_matrix(&path, &back).unwrap();
        assert_eq!(read_feature_matrix(&path).unwrap(), back);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_features(&Matrix::identity(2)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_features(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn payload_shorter_than_header_claims() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"VDF1");
        bytes.extend_from_slice(&10u32.to_le_bytes());
        bytes.extend_from_slice(&10u32.to_le_bytes());
        bytes.extend(std::iter::repeat_n(0u8, 50 * 4));
        assert!(matches!(decode_features(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_feature_matrix("/nonexistent/features.vdf"),
            Err(Error::Io(_))
        ));
    }
}
