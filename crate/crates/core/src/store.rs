//! Binary feature files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       5     magic "SSFT1"
//! 5       1     kind tag (stft 0, mfcc 1, sp 2, ap 3, f0 4, jitter-shimmer 5, pse 6)
//! 6       4     dims        u32
//! 10      4     num_frames  u32
//! 14      8     hop seconds f64
//! 22      ...   num_frames * dims f32, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};

pub const FEATURE_MAGIC: &[u8; 5] = b"SSFT1";
const HEADER_LEN: usize = 22;
pub const FEATURE_EXTENSION: &str = "ssft";

/// File name used for one utterance's feature of one kind.
pub fn feature_file_name(utt_id: &str, kind: FeatureKind) -> String {
    format!("{utt_id}.{kind}.{FEATURE_EXTENSION}")
}

pub fn encode_feature(m: &FeatureMatrix) -> Result<Vec<u8>> {
    if !m.kind().dims_ok(m.dims()) {
        return Err(Error::KindDimsMismatch {
            kind: m.kind(),
            dims: m.dims(),
        });
    }
    let dims =
        u32::try_from(m.dims()).map_err(|_| Error::InvalidFeature("dims overflow u32".into()))?;
    let frames = u32::try_from(m.num_frames())
        .map_err(|_| Error::InvalidFeature("frames overflow u32".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.push(m.kind().tag());
    out.extend_from_slice(&dims.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&m.hop.to_le_bytes());
    for &v in m.data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::InvalidFeature(format!("{v} does not fit in f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Decode a feature file image; `utt_id` becomes the matrix's utterance id.
pub fn decode_feature(bytes: &[u8], utt_id: &str) -> Result<FeatureMatrix> {
    if bytes.len() < FEATURE_MAGIC.len() || &bytes[..5] != FEATURE_MAGIC {
        return Err(Error::BadMagic(utt_id.to_string()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let kind = FeatureKind::from_tag(bytes[5])
        .ok_or_else(|| Error::InvalidFeature(format!("unknown kind tag {}", bytes[5])))?;
    let dims = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let hop = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    if !kind.dims_ok(dims) {
        return Err(Error::KindDimsMismatch { kind, dims });
    }
    let expected = dims * frames * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::InvalidFeature(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureMatrix::new(kind, data, frames, dims, hop, utt_id)
}

/// Write atomically: the bytes go to a temporary file in the same directory,
/// which is then renamed over `path`.
pub fn write_feature(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature(m)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes)
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Read a feature file. The utterance id is the file name up to `.<kind>.ssft`.
pub fn read_feature(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(&format!(".{FEATURE_EXTENSION}"))
        .unwrap_or(name);
    let utt_id = FeatureKind::ALL
        .iter()
        .find_map(|k| stem.strip_suffix(&format!(".{k}")))
        .unwrap_or(stem);
    decode_feature(&bytes, utt_id)
}
