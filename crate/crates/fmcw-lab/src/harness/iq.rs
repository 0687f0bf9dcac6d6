//! Binary IQ files: a 32-byte little-endian header ("MRIQ", u32 version,
//! f64 rate, f64 t0, u64 count) followed by interleaved f32 (I, Q) pairs.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::waveforms::IQBuffer;

pub const MAGIC: &[u8; 4] = b"MRIQ";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"MRIQ\"")]
    BadMagic([u8; 4]),
    #[error("format version {0}, expected {VERSION}")]
    Version(u32),
    #[error("truncated: header promises {expected} bytes of samples, found {found}")]
    Truncated { expected: u64, found: u64 },
}

pub fn encode_iq(buf: &IQBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * buf.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&buf.rate.to_le_bytes());
    out.extend_from_slice(&buf.t0.to_le_bytes());
    out.extend_from_slice(&(buf.len() as u64).to_le_bytes());
    for s in &buf.samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_iq(bytes: &[u8]) -> Result<IQBuffer, IqError> {
    if bytes.len() < HEADER_LEN {
        return Err(IqError::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(IqError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(IqError::Version(version));
    }
    let rate = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let t0 = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let count = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = count.saturating_mul(8);
    if (payload.len() as u64) < expected {
        return Err(IqError::Truncated {
            expected,
            found: payload.len() as u64,
        });
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64;
    let samples = payload[..expected as usize]
        .chunks_exact(8)
        .map(|c| Complex64::new(f(&c[0..4]), f(&c[4..8])))
        .collect();
    Ok(IQBuffer::new(samples, rate, t0))
}

pub fn write_iq(path: impl AsRef<Path>, buf: &IQBuffer) -> Result<(), IqError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode_iq(buf))?;
    f.flush()?;
    Ok(())
}

pub fn read_iq(path: impl AsRef<Path>) -> Result<IQBuffer, IqError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_iq(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_buf(n: usize) -> IQBuffer {
        let s = (0..n).map(|k| Complex64::new(k as f64 * 0.5, -(k as f64) * 0.25)).collect();
        IQBuffer::new(s, 25e6, 1.25e-3)
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.iq");
        let b = sample_buf(1000);
        write_iq(&p, &b).unwrap();
        let r = read_iq(&p).unwrap();
        assert_eq!(r, b);
    }

    #[test]
    fn million_samples_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.iq");
        write_iq(&p, &IQBuffer::zeros(1_000_000, 25e6, 0.0)).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 32 + 8_000_000);
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = encode_iq(&sample_buf(10));
        let e = decode_iq(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(e, IqError::Truncated { expected: 80, found: 77 }));
        assert!(matches!(decode_iq(&bytes[..20]), Err(IqError::Truncated { .. })));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_iq(&sample_buf(2));
        bytes[0] = b'X';
        assert!(matches!(decode_iq(&bytes), Err(IqError::BadMagic(_))));
        let mut bytes = encode_iq(&sample_buf(2));
        bytes[4] = 9;
        assert!(matches!(decode_iq(&bytes), Err(IqError::Version(9))));
    }
}
