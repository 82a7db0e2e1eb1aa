//! Model checkpoint: `b"MAQN"`, `u32` version, `u64` architecture hash, then
//! every parameter as little-endian `f32` in declaration order.

use std::path::Path;

use super::model::{DepthEncoding, QualityNet, PARAM_COUNT};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MAQN";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn architecture_hash(encoding: DepthEncoding) -> u64 {
    fnv1a64(QualityNet::init(0, encoding).descriptor().as_bytes())
}

pub fn encode_checkpoint(net: &QualityNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * PARAM_COUNT);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&fnv1a64(net.descriptor().as_bytes()).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<QualityNet> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::NotCheckpoint);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version(version));
    }
    let found = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let encoding = [DepthEncoding::MinMax, DepthEncoding::ZeroCentered]
        .into_iter()
        .find(|&e| architecture_hash(e) == found)
        .ok_or(Error::Architecture {
            expected: architecture_hash(DepthEncoding::MinMax),
            found,
        })?;
    let expected = HEADER_LEN + 4 * PARAM_COUNT;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::SizeMismatch(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let params = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    QualityNet::from_params(params, encoding)
}

pub fn save_checkpoint(path: &Path, net: &QualityNet) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<QualityNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        for enc in [DepthEncoding::MinMax, DepthEncoding::ZeroCentered] {
            let net = QualityNet::init(5, enc);
            let back = decode_checkpoint(&encode_checkpoint(&net)).unwrap();
            assert_eq!(back.encoding(), enc);
            for (a, b) in net.params().iter().zip(back.params()) {
                assert_eq!(*a as f32, *b as f32);
            }
            // A second pass is exact.
            assert_eq!(decode_checkpoint(&encode_checkpoint(&back)).unwrap(), back);
        }
    }

    #[test]
    fn rejects_foreign_and_damaged_files() {
        let bytes = encode_checkpoint(&QualityNet::init(1, DepthEncoding::MinMax));
        assert!(matches!(decode_checkpoint(b"MAQPxxxx"), Err(Error::NotCheckpoint)));
        let mut wrong_arch = bytes.clone();
        wrong_arch[8] ^= 0xff;
        assert!(matches!(
            decode_checkpoint(&wrong_arch),
            Err(Error::Architecture { .. })
        ));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn hashes_differ_by_encoding() {
        assert_ne!(
            architecture_hash(DepthEncoding::MinMax),
            architecture_hash(DepthEncoding::ZeroCentered)
        );
    }
}
