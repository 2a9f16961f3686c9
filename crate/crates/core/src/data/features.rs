use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::io::{put_f64s, read_bytes, write_atomic, Reader};

pub const FEATURE_MAGIC: &[u8; 4] = b"VSFT";
pub const FEATURE_VERSION: u8 = 1;

/// `magic | version u8 | T u32 | d u32 | T*d f64`, all little-endian.
pub fn encode_features(x: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * x.as_slice().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.push(FEATURE_VERSION);
    out.extend_from_slice(&(x.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(x.cols() as u32).to_le_bytes());
    put_f64s(&mut out, x.as_slice());
    out
}

pub fn decode_features(bytes: &[u8], context: &str) -> Result<Matrix> {
    let mut r = Reader::new(bytes, context);
    r.magic(FEATURE_MAGIC)?;
    let version = r.u8()?;
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            context: context.to_string(),
            found: version as u32,
            expected: FEATURE_VERSION as u32,
        });
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let data = r.f64s(rows * cols)?;
    r.finish()?;
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse {
            context: context.to_string(),
            offset: 13 + 8 * i,
            message: "non-finite feature value".into(),
        });
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_features(path: impl AsRef<Path>, x: &Matrix) -> Result<()> {
    write_atomic(path, &encode_features(x))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    decode_features(&read_bytes(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let x = Matrix::from_rows(&[[1.5, -0.0, 3e-300], [f64::MAX, 0.1, -7.25]]);
        let bytes = encode_features(&x);
        let back = decode_features(&bytes, "x").unwrap();
        assert_eq!(
            back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );

        let err = decode_features(&bytes[..20], "x").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 13, .. }), "{err}");
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_features(&bad, "x"),
            Err(Error::Version { found: 9, .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_features(&bad, "x"),
            Err(Error::Parse { offset: 0, .. })
        ));
        let mut nan = bytes;
        nan[13..21].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_features(&nan, "x").is_err());
    }
}
