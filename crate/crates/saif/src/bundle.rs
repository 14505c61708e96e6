// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `.saif` tensor-bundle container.
//!
//! ```text
//! "SAIF"                 4 bytes magic
//! version                u32 little-endian, currently 1
//! header_len             u64 little-endian
//! header                 UTF-8 JSON, compact, keys sorted:
//!                        {"<name>": {"dtype": "f32", "length": <bytes>,
//!                                    "offset": <bytes>, "shape": [..]}, ..}
//! payload                raw little-endian f32 data
//! ```
//!
//! Tensors are laid out back to back in name order, so writing is
//! deterministic and reading then writing reproduces the input bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use saif_core::tensor::{Tensor, TensorBundle};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

pub const MAGIC: &[u8; 4] = b"SAIF";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "saif";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("unknown dtype `{dtype}` for tensor `{name}`")]
    UnknownDtype { name: String, dtype: String },
    #[error("tensor `{name}` declares {length} bytes but its shape needs {expected}")]
    LengthMismatch { name: String, length: u64, expected: u64 },
    #[error("overlapping offsets between `{first}` and `{second}`")]
    OverlappingOffsets { first: String, second: String },
    #[error("truncated payload")]
    TruncatedPayload,
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(u64),
    #[error("tensor `{name}`: {source}")]
    Tensor {
        name: String,
        source: saif_core::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// Field order is the serialized key order; keep it alphabetical.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderEntry {
    dtype: String,
    length: u64,
    offset: u64,
    shape: Vec<usize>,
}

/// Header map that rejects duplicate tensor names.
struct Header(BTreeMap<String, HeaderEntry>);

impl<'de> Deserialize<'de> for Header {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct HeaderVisitor;

        impl<'de> Visitor<'de> for HeaderVisitor {
            type Value = Header;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from tensor name to entry")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Header, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((name, entry)) = map.next_entry::<String, HeaderEntry>()? {
                    if out.contains_key(&name) {
                        return Err(serde::de::Error::custom(format!("duplicate tensor name `{name}`")));
                    }
                    out.insert(name, entry);
                }
                Ok(Header(out))
            }
        }

        deserializer.deserialize_map(HeaderVisitor)
    }
}

/// Serialize `bundle`; returns the number of bytes written.
pub fn write_bundle<W: Write>(bundle: &TensorBundle, mut sink: W) -> Result<u64, BundleError> {
    let mut header = BTreeMap::new();
    let mut offset = 0u64;
    for (name, t) in bundle.iter() {
        let length = t.numel() as u64 * 4;
        header.insert(
            name.to_owned(),
            HeaderEntry {
                dtype: "f32".into(),
                length,
                offset,
                shape: t.shape().to_vec(),
            },
        );
        offset += length;
    }
    let header = serde_json::to_vec(&header).map_err(|e| BundleError::BadHeader(e.to_string()))?;

    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&(header.len() as u64).to_le_bytes())?;
    sink.write_all(&header)?;
    let mut buf = Vec::with_capacity(offset as usize);
    for (_, t) in bundle.iter() {
        for x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(4 + 4 + 8 + header.len() as u64 + offset)
}

/// Serialize into a fresh byte vector.
pub fn to_bytes(bundle: &TensorBundle) -> Vec<u8> {
    let mut out = Vec::new();
    write_bundle(bundle, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Option<&'a [u8]> {
    let s = bytes.get(*at..at.checked_add(n)?)?;
    *at += n;
    Some(s)
}

/// Parse a bundle from raw bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<TensorBundle, BundleError> {
    let mut at = 0usize;
    match take(bytes, &mut at, 4) {
        Some(m) if m == MAGIC => {}
        _ => return Err(BundleError::BadMagic),
    }
    let version = take(bytes, &mut at, 4).ok_or(BundleError::TruncatedHeader)?;
    let version = u32::from_le_bytes(version.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(BundleError::UnsupportedVersion(version));
    }
    let header_len = take(bytes, &mut at, 8).ok_or(BundleError::TruncatedHeader)?;
    let header_len = u64::from_le_bytes(header_len.try_into().expect("8 bytes"));
    let header_len = usize::try_from(header_len).map_err(|_| BundleError::TruncatedHeader)?;
    let header = take(bytes, &mut at, header_len).ok_or(BundleError::TruncatedHeader)?;
    let Header(header) = serde_json::from_slice(header).map_err(|e| BundleError::BadHeader(e.to_string()))?;
    let payload = &bytes[at..];

    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(header.len());
    for (name, e) in &header {
        if e.dtype != "f32" {
            return Err(BundleError::UnknownDtype {
                name: name.clone(),
                dtype: e.dtype.clone(),
            });
        }
        let expected = e
            .shape
            .iter()
            .try_fold(4u64, |acc, &s| acc.checked_mul(s as u64))
            .ok_or_else(|| BundleError::BadHeader(format!("shape of `{name}` overflows")))?;
        if e.length != expected {
            return Err(BundleError::LengthMismatch {
                name: name.clone(),
                length: e.length,
                expected,
            });
        }
        let end = e
            .offset
            .checked_add(e.length)
            .ok_or_else(|| BundleError::BadHeader(format!("offset of `{name}` overflows")))?;
        spans.push((e.offset, end, name));
    }
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(BundleError::OverlappingOffsets {
                first: w[0].2.to_owned(),
                second: w[1].2.to_owned(),
            });
        }
    }
    let used = spans.iter().map(|s| s.1).max().unwrap_or(0);
    if used > payload.len() as u64 {
        return Err(BundleError::TruncatedPayload);
    }
    if used < payload.len() as u64 {
        return Err(BundleError::TrailingBytes(payload.len() as u64 - used));
    }

    let mut bundle = TensorBundle::new();
    for (name, e) in header {
        let raw = &payload[e.offset as usize..(e.offset + e.length) as usize];
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(e.shape, data).map_err(|source| BundleError::Tensor {
            name: name.clone(),
            source,
        })?;
        bundle.insert(name, t);
    }
    Ok(bundle)
}

/// Read a whole bundle from a stream.
pub fn read_bundle<R: Read>(mut source: R) -> Result<TensorBundle, BundleError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn load_bundle(path: &Path) -> Result<TensorBundle, BundleError> {
    read_bundle(BufReader::new(File::open(path)?))
}

pub fn save_bundle(bundle: &TensorBundle, path: &Path) -> Result<u64, BundleError> {
    write_bundle(bundle, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use saif_core::tensor::DenseVector;

    fn one(name: &str, data: &[f32]) -> TensorBundle {
        let mut b = TensorBundle::new();
        b.insert(name, DenseVector::new(data.to_vec()).unwrap());
        b
    }

    #[test]
    fn empty_bundle_layout() {
        let bytes = to_bytes(&TensorBundle::new());
        assert_eq!(&bytes[..4], b"SAIF");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..], b"{}");
        assert!(from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn single_vector_round_trip() {
        let b = one("z", &[1.0, 0.0, -2.5]);
        let bytes = to_bytes(&b);
        let header = br#"{"z":{"dtype":"f32","length":12,"offset":0,"shape":[3]}}"#;
        assert_eq!(&bytes[16..16 + header.len()], header);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(to_bytes(&back), bytes);
        assert_eq!(write_bundle(&b, Vec::new()).unwrap(), bytes.len() as u64);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let mut a = TensorBundle::new();
        a.insert("b", DenseVector::new(vec![1.0]).unwrap());
        a.insert("a", DenseVector::new(vec![2.0, 3.0]).unwrap());
        let mut b = TensorBundle::new();
        b.insert("a", DenseVector::new(vec![2.0, 3.0]).unwrap());
        b.insert("b", DenseVector::new(vec![1.0]).unwrap());
        assert_eq!(to_bytes(&a), to_bytes(&b));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = to_bytes(&TensorBundle::new());
        bytes[3] = b'G';
        let err = from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, BundleError::BadMagic));
        assert_eq!(err.to_string(), "bad magic");
        assert!(matches!(from_bytes(b"SA"), Err(BundleError::BadMagic)));
    }

    #[test]
    fn truncated_payload() {
        let bytes = to_bytes(&one("z", &[1.0, 2.0]));
        let err = from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        assert_eq!(err.to_string(), "truncated payload");
    }

    #[test]
    fn unknown_version() {
        let mut bytes = to_bytes(&TensorBundle::new());
        bytes[4] = 2;
        assert!(matches!(from_bytes(&bytes), Err(BundleError::UnsupportedVersion(2))));
    }

    fn raw(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = b"SAIF".to_vec();
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn header_validation() {
        let bf16 = raw(r#"{"x":{"dtype":"bf16","length":2,"offset":0,"shape":[1]}}"#, &[0; 2]);
        assert!(matches!(from_bytes(&bf16), Err(BundleError::UnknownDtype { .. })));

        let overlap = raw(
            r#"{"a":{"dtype":"f32","length":8,"offset":0,"shape":[2]},"b":{"dtype":"f32","length":4,"offset":4,"shape":[1]}}"#,
            &[0; 8],
        );
        assert!(matches!(from_bytes(&overlap), Err(BundleError::OverlappingOffsets { .. })));

        let dup = raw(
            r#"{"a":{"dtype":"f32","length":4,"offset":0,"shape":[1]},"a":{"dtype":"f32","length":4,"offset":4,"shape":[1]}}"#,
            &[0; 8],
        );
        assert!(matches!(from_bytes(&dup), Err(BundleError::BadHeader(_))));

        let bad_len = raw(r#"{"a":{"dtype":"f32","length":8,"offset":0,"shape":[1]}}"#, &[0; 8]);
        assert!(matches!(from_bytes(&bad_len), Err(BundleError::LengthMismatch { .. })));

        let trailing = raw(r#"{"a":{"dtype":"f32","length":4,"offset":0,"shape":[1]}}"#, &[0; 5]);
        assert!(matches!(from_bytes(&trailing), Err(BundleError::TrailingBytes(1))));

        let nan = raw(r#"{"a":{"dtype":"f32","length":4,"offset":0,"shape":[1]}}"#, &f32::NAN.to_le_bytes());
        assert!(matches!(from_bytes(&nan), Err(BundleError::Tensor { .. })));

        let short_header = raw(r#"{"a":1"#, &[]);
        assert!(matches!(from_bytes(&short_header[..short_header.len() - 2]), Err(BundleError::TruncatedHeader)));
        assert!(matches!(from_bytes(&raw("[1]", &[])), Err(BundleError::BadHeader(_))));
    }

    #[test]
    fn matrices_keep_shape() {
        let mut b = TensorBundle::new();
        b.insert("w", Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let back = from_bytes(&to_bytes(&b)).unwrap();
        assert_eq!(back.require("w").unwrap().shape(), &[2, 3]);
    }
}
