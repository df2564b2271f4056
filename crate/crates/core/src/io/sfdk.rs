//! SFDK v1: a little-endian binary container for feature matrices.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SFDK"
//! 4       4   u32     version (= 1)
//! 8       8   u64     rows
//! 16      8   u64     cols
//! 24      4   u32     flags (bit 0: labels present)
//! 28      4*rows*cols f32 features, row-major
//! ...     4*rows      i32 labels, -1 = unlabeled (only when flagged)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, LabeledDomain, UNLABELED};

pub const MAGIC: [u8; 4] = *b"SFDK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
pub const FLAG_HAS_LABELS: u32 = 1;

/// Exact file size for a matrix of the given shape.
pub fn encoded_len(rows: u64, cols: u64, has_labels: bool) -> Option<u64> {
    let payload = rows.checked_mul(cols)?.checked_mul(4)?;
    let labels = if has_labels { rows.checked_mul(4)? } else { 0 };
    (HEADER_LEN as u64).checked_add(payload)?.checked_add(labels)
}

/// Serializes a domain. Features are narrowed to 32-bit floats; a value that
/// does not fit is rejected as non-finite.
pub fn encode(domain: &LabeledDomain) -> Result<Vec<u8>> {
    let feats = domain.features();
    let has_labels = domain.has_labels();
    let len = encoded_len(feats.rows() as u64, feats.cols() as u64, has_labels)
        .expect("in-memory matrix fits in u64");
    let mut out = Vec::with_capacity(len as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(feats.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(feats.cols() as u64).to_le_bytes());
    let flags = if has_labels { FLAG_HAS_LABELS } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for (i, &v) in feats.as_slice().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::NonFiniteValue {
                row: i / feats.cols(),
                col: i % feats.cols(),
            });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    if has_labels {
        for &l in domain.labels() {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    debug_assert_eq!(out.len() as u64, len);
    Ok(out)
}

/// Parses SFDK bytes. The class count is inferred as `max label + 1` (at least 1).
pub fn decode(bytes: &[u8]) -> Result<LabeledDomain> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let flags = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
    if flags & !FLAG_HAS_LABELS != 0 {
        return Err(Error::UnknownFlags(flags & !FLAG_HAS_LABELS));
    }
    let has_labels = flags & FLAG_HAS_LABELS != 0;
    let expected = encoded_len(rows, cols, has_labels).unwrap_or(u64::MAX);
    if expected != bytes.len() as u64 {
        return Err(Error::TruncatedPayload {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let payload_end = HEADER_LEN + 4 * rows * cols;
    let values: Vec<f64> = bytes[HEADER_LEN..payload_end]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    let features = FeatureMatrix::new(rows, cols, values)?;
    let labels: Vec<i32> = if has_labels {
        bytes[payload_end..]
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
            .collect()
    } else {
        vec![UNLABELED; rows]
    };
    let num_classes = labels.iter().copied().max().unwrap_or(UNLABELED).max(0) as usize + 1;
    LabeledDomain::new(features, labels, num_classes)
}

pub fn read_sfdk(path: impl AsRef<Path>) -> Result<LabeledDomain> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_sfdk(domain: &LabeledDomain, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(domain)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_by_one() -> LabeledDomain {
        LabeledDomain::new(FeatureMatrix::from_rows(&[[1.0]]).unwrap(), vec![0], 1).unwrap()
    }

    #[test]
    fn byte_length_from_field_widths() {
        // magic 4 + version 4 + rows 8 + cols 8 + flags 4 + one f32 + one i32
        let oracle = 4 + 4 + 8 + 8 + 4 + 4 + 4;
        assert_eq!(oracle, 36);
        assert_eq!(encode(&one_by_one()).unwrap().len(), oracle);
    }

    #[test]
    fn exact_bytes_for_one_by_one() {
        let bytes = encode(&one_by_one()).unwrap();
        let mut expected = b"SFDK".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&[0, 0, 0, 0]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn unlabeled_has_no_label_block() {
        let d = LabeledDomain::unlabeled(FeatureMatrix::zeros(2, 3).unwrap(), 1).unwrap();
        let bytes = encode(&d).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()) & 1, 0);
        let back = decode(&bytes).unwrap();
        assert!(back.labels().iter().all(|&l| l == UNLABELED));
    }

    #[test]
    fn rejects_values_outside_f32() {
        let d = LabeledDomain::unlabeled(FeatureMatrix::from_rows(&[[1e300]]).unwrap(), 1).unwrap();
        assert!(matches!(encode(&d), Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn header_errors() {
        let good = encode(&one_by_one()).unwrap();
        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bad), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::UnsupportedVersion(2))));
        let mut bad = good.clone();
        bad[24] = 0b11;
        assert!(matches!(decode(&bad), Err(Error::UnknownFlags(2))));
    }

    #[test]
    fn short_payload_is_truncated() {
        let mut bytes = b"SFDK".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 12]);
        assert!(matches!(
            decode(&bytes),
            Err(Error::TruncatedPayload { expected: 44, actual: 40 })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.sfdk");
        let d = LabeledDomain::new(
            FeatureMatrix::from_rows(&[[0.1, -2.5], [3.0, 4.25]]).unwrap(),
            vec![1, -1],
            2,
        )
        .unwrap();
        write_sfdk(&d, &path).unwrap();
        let back = read_sfdk(&path).unwrap();
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.num_classes(), 2);
        assert_eq!(back.features().get(0, 0), f64::from(0.1f32));
        assert!(matches!(read_sfdk(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    fn domain_strategy() -> impl Strategy<Value = LabeledDomain> {
        (1usize..12, 1usize..6, any::<bool>()).prop_flat_map(|(rows, cols, labeled)| {
            (
                prop::collection::vec(-1e6f64..1e6, rows * cols),
                prop::collection::vec(-1i32..5, rows),
            )
                .prop_map(move |(vals, labels)| {
                    let labels = if labeled { labels } else { vec![UNLABELED; rows] };
                    LabeledDomain::new(FeatureMatrix::new(rows, cols, vals).unwrap(), labels, 5).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn truncation_is_always_detected(d in domain_strategy(), cut in any::<prop::sample::Index>()) {
            let bytes = encode(&d).unwrap();
            let keep = cut.index(bytes.len());
            prop_assert!(decode(&bytes[..keep]).is_err());
            let mut longer = bytes.clone();
            longer.push(0);
            prop_assert!(decode(&longer).is_err());
        }

        #[test]
        fn encode_is_stable_through_decode(d in domain_strategy()) {
            let bytes = encode(&d).unwrap();
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(encode(&back).unwrap(), bytes);
        }
    }
}
