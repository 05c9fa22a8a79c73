use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which extractor produced a [`FeatureMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Stft,
    Mfcc,
    Sp,
    Ap,
    F0,
    JitterShimmer,
    Pse,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Stft,
        FeatureKind::Mfcc,
        FeatureKind::Sp,
        FeatureKind::Ap,
        FeatureKind::F0,
        FeatureKind::JitterShimmer,
        FeatureKind::Pse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Stft => "stft",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Sp => "sp",
            FeatureKind::Ap => "ap",
            FeatureKind::F0 => "f0",
            FeatureKind::JitterShimmer => "jitter-shimmer",
            FeatureKind::Pse => "pse",
        }
    }

    /// Byte tag used in feature files.
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Stft => 0,
            FeatureKind::Mfcc => 1,
            FeatureKind::Sp => 2,
            FeatureKind::Ap => 3,
            FeatureKind::F0 => 4,
            FeatureKind::JitterShimmer => 5,
            FeatureKind::Pse => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// One row per utterance rather than per frame.
    pub fn is_utterance_level(self) -> bool {
        matches!(self, FeatureKind::JitterShimmer | FeatureKind::Pse)
    }

    pub fn dims_ok(self, dims: usize) -> bool {
        match self {
            FeatureKind::Mfcc => dims == 39,
            FeatureKind::F0 | FeatureKind::Pse => dims == 1,
            FeatureKind::JitterShimmer => dims == 2,
            // n_fft/2 + 1 with n_fft >= 2
            FeatureKind::Stft | FeatureKind::Sp => dims >= 2,
            FeatureKind::Ap => dims >= 1,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature kind {s:?}")))
    }
}

/// Frames-by-dims matrix of one feature kind, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    kind: FeatureKind,
    data: Vec<f64>,
    num_frames: usize,
    dims: usize,
    /// Seconds between rows.
    pub hop: f64,
    pub utt_id: String,
}

impl FeatureMatrix {
    pub fn new(
        kind: FeatureKind,
        data: Vec<f64>,
        num_frames: usize,
        dims: usize,
        hop: f64,
        utt_id: impl Into<String>,
    ) -> Result<Self> {
        if !kind.dims_ok(dims) {
            return Err(Error::KindDimsMismatch { kind, dims });
        }
        if data.len() != num_frames * dims {
            return Err(Error::InvalidFeature(format!(
                "{} values for {num_frames} x {dims}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature(format!("non-finite entry {bad}")));
        }
        match kind {
            FeatureKind::Ap if data.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                return Err(Error::InvalidFeature("aperiodicity outside [0, 1]".into()))
            }
            FeatureKind::Sp if data.iter().any(|&v| v < 0.0) => {
                return Err(Error::InvalidFeature("negative spectral envelope".into()))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            data,
            num_frames,
            dims,
            hop,
            utt_id: utt_id.into(),
        })
    }

    pub fn from_rows(
        kind: FeatureKind,
        rows: Vec<Vec<f64>>,
        dims: usize,
        hop: f64,
        utt_id: impl Into<String>,
    ) -> Result<Self> {
        let num_frames = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dims) {
            return Err(Error::DimMismatch {
                expected: dims,
                got: r.len(),
            });
        }
        Self::new(kind, rows.concat(), num_frames, dims, hop, utt_id)
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims).take(self.num_frames)
    }

    /// Column means; a zero vector when there are no frames.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dims];
        for row in self.rows() {
            acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        }
        if self.num_frames > 0 {
            acc.iter_mut().for_each(|a| *a /= self.num_frames as f64);
        }
        acc
    }
}
