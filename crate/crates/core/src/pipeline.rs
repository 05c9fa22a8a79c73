//! Audio file to feature matrix, and feature matrices to classifier inputs.

use std::path::{Path, PathBuf};

use crate::audio::{read_wav, resample, AudioBuffer};
use crate::config::RunConfig;
use crate::entropy::utterance_pse;
use crate::error::{Error, Result};
use crate::f0::estimate_f0;
use crate::features::{FeatureKind, FeatureMatrix};
use crate::perturbation::utterance_perturbation;
use crate::spectral::{band_aperiodicity, mfcc, spectral_envelope, stft_spectrogram};
use crate::store::{feature_file_name, read_feature};
use crate::trials::{CmClass, Manifest};

/// Read a WAV file and bring it to the configured rate.
pub fn load_audio(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<AudioBuffer> {
    let buf = read_wav(path)?;
    resample(&buf, cfg.sample_rate)
}

pub fn extract_feature(
    buf: &AudioBuffer,
    kind: FeatureKind,
    cfg: &RunConfig,
) -> Result<FeatureMatrix> {
    match kind {
        FeatureKind::Stft => stft_spectrogram(buf, &cfg.stft()),
        FeatureKind::Mfcc => mfcc(buf, &cfg.mfcc()),
        FeatureKind::Sp => {
            let contour = estimate_f0(buf, &cfg.f0())?;
            spectral_envelope(buf, &contour, &cfg.envelope())
        }
        FeatureKind::Ap => {
            let contour = estimate_f0(buf, &cfg.f0())?;
            band_aperiodicity(buf, &contour, &cfg.aperiodicity())
        }
        FeatureKind::F0 => {
            let contour = estimate_f0(buf, &cfg.f0())?;
            let n = contour.len();
            FeatureMatrix::new(FeatureKind::F0, contour.values, n, 1, contour.hop, "")
        }
        FeatureKind::JitterShimmer => {
            let p = utterance_perturbation(buf, &cfg.perturbation())?;
            FeatureMatrix::new(kind, vec![p.jitter, p.shimmer], 1, 2, 0.0, "")
        }
        FeatureKind::Pse => {
            let v = utterance_pse(buf, &cfg.pse())?;
            FeatureMatrix::new(kind, vec![v], 1, 1, 0.0, "")
        }
    }
}

/// One fixed-length vector per utterance: each matrix is averaged over frames
/// and the results are concatenated in the order given.
pub fn utterance_vector(features: &[FeatureMatrix]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in features {
        if m.num_frames() == 0 {
            return Err(Error::InvalidFeature(format!(
                "{} feature of '{}' has no frames",
                m.kind(),
                m.utt_id
            )));
        }
        out.extend(m.mean_row());
    }
    Ok(out)
}

/// Classifier input for one manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceInput {
    pub utt_id: String,
    pub class: CmClass,
    pub attack_id: Option<String>,
    pub vector: Vec<f64>,
}

pub fn feature_path(dir: &Path, utt_id: &str, kind: FeatureKind) -> PathBuf {
    dir.join(feature_file_name(utt_id, kind))
}

/// Read the stored features of every manifest row and pool them, in manifest order.
pub fn load_inputs(
    manifest: &Manifest,
    feature_dir: &Path,
    kinds: &[FeatureKind],
) -> Result<Vec<UtteranceInput>> {
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no feature kinds given".into()));
    }
    manifest
        .rows()
        .iter()
        .map(|row| {
            let mats = kinds
                .iter()
                .map(|&k| {
                    let path = feature_path(feature_dir, &row.utt_id, k);
                    if !path.is_file() {
                        return Err(Error::MissingFeatureFile(path));
                    }
                    read_feature(&path)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(UtteranceInput {
                utt_id: row.utt_id.clone(),
                class: row.role.class(),
                attack_id: row.attack_id.clone(),
                vector: utterance_vector(&mats)?,
            })
        })
        .collect()
}
