//! Power spectral entropy of an F0 sequence.
//!
//! The trimmed F0 contour is treated as a signal: its one-sided periodogram
//! `|X_k|^2 / N` is normalized into a distribution over frequency bins and
//! the Shannon entropy (natural log) of that distribution is reported. A
//! contour that barely moves puts all its mass in the DC bin and scores near
//! zero; a contour that wanders spreads mass across bins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, resample, AudioBuffer};
use crate::dsp::{one_sided_power, FftPair};
use crate::error::{Error, Result};
use crate::f0::{estimate_f0, trim_contour, F0Config};
use crate::trials::Manifest;

/// Power per one-sided DFT bin, `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdVector {
    pub values: Vec<f64>,
}

impl PsdVector {
    pub fn n_bins(&self) -> usize {
        self.values.len()
    }
}

pub fn power_spectral_density(seq: &[f64]) -> Result<PsdVector> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::SequenceTooShort(n));
    }
    let spectrum = FftPair::new(n).forward_real(seq);
    let values = one_sided_power(&spectrum)
        .into_iter()
        .map(|p| p / n as f64)
        .collect();
    Ok(PsdVector { values })
}

pub fn normalize_psd(psd: &PsdVector) -> Result<Vec<f64>> {
    let total: f64 = psd.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroPsd);
    }
    Ok(psd.values.iter().map(|p| p / total).collect())
}

/// Shannon entropy in nats of a probability vector of length `n`, clamped to `[0, ln n]`.
///
/// Mass at or below `64 N eps^2` is what an exactly-zero bin picks up from FFT
/// rounding, and counts as zero.
fn entropy_of(p: &[f64], seq_len: usize) -> f64 {
    let negligible = 64.0 * seq_len as f64 * f64::EPSILON * f64::EPSILON;
    let h: f64 = p
        .iter()
        .filter(|&&pi| pi > negligible)
        .map(|&pi| -pi * pi.ln())
        .sum();
    h.clamp(0.0, (p.len() as f64).ln())
}

/// Entropy (nats) of the normalized one-sided PSD of `seq`.
pub fn power_spectral_entropy(seq: &[f64]) -> Result<f64> {
    let p = normalize_psd(&power_spectral_density(seq)?)?;
    Ok(entropy_of(&p, seq.len()))
}

/// Remove the least-squares line from a sequence.
pub fn detrend(seq: &[f64]) -> Vec<f64> {
    let n = seq.len() as f64;
    if seq.len() < 2 {
        return seq.to_vec();
    }
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = seq.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in seq.iter().enumerate() {
        let dt = t as f64 - t_mean;
        num += dt * (y - y_mean);
        den += dt * dt;
    }
    let slope = num / den;
    seq.iter()
        .enumerate()
        .map(|(t, y)| y - y_mean - slope * (t as f64 - t_mean))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseConfig {
    pub f0: F0Config,
    /// Subtract a fitted line from the trimmed contour before the DFT.
    pub detrend: bool,
    /// Histogram bins in reports.
    pub hist_bins: usize,
}

impl Default for PseConfig {
    fn default() -> Self {
        Self {
            f0: F0Config::default(),
            detrend: false,
            hist_bins: 50,
        }
    }
}

/// F0 contour, trimmed of its unvoiced edges, reduced to its spectral entropy.
pub fn utterance_pse(buf: &AudioBuffer, cfg: &PseConfig) -> Result<f64> {
    let contour = trim_contour(&estimate_f0(buf, &cfg.f0)?)?;
    if cfg.detrend {
        power_spectral_entropy(&detrend(&contour.values))
    } else {
        power_spectral_entropy(&contour.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UttPse {
    pub label: String,
    /// PSE in nats, or the error message for a row that failed.
    pub value: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseSummary {
    pub per_utt: BTreeMap<String, UttPse>,
    pub histogram: Vec<HistogramBin>,
}

impl PseSummary {
    /// Build per-label histograms over a shared range of the successful values.
    pub fn from_values(per_utt: BTreeMap<String, UttPse>, bins: usize) -> Self {
        let ok: Vec<(&str, f64)> = per_utt
            .values()
            .filter_map(|u| u.value.as_ref().ok().map(|&v| (u.label.as_str(), v)))
            .collect();
        let mut histogram = Vec::new();
        if !ok.is_empty() && bins > 0 {
            let mut lo = ok.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let mut hi = ok.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                lo -= 0.5;
                hi += 0.5;
            }
            let width = (hi - lo) / bins as f64;
            let labels: std::collections::BTreeSet<&str> = ok.iter().map(|p| p.0).collect();
            for label in labels {
                let mut counts = vec![0usize; bins];
                for &(_, v) in ok.iter().filter(|p| p.0 == label) {
                    let b = (((v - lo) / width).floor() as usize).min(bins - 1);
                    counts[b] += 1;
                }
                for (b, count) in counts.into_iter().enumerate() {
                    histogram.push(HistogramBin {
                        label: label.to_string(),
                        lo: lo + b as f64 * width,
                        hi: if b + 1 == bins {
                            hi
                        } else {
                            lo + (b + 1) as f64 * width
                        },
                        count,
                    });
                }
            }
        }
        Self { per_utt, histogram }
    }

    /// `utt_id,label,pse` rows followed by `#histogram,label,bin_lo,bin_hi,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("utt_id,label,pse\n");
        for (utt, row) in &self.per_utt {
            match &row.value {
                Ok(v) => writeln!(out, "{utt},{},{v}", row.label),
                Err(_) => writeln!(out, "{utt},{},error", row.label),
            }
            .unwrap();
        }
        for bin in &self.histogram {
            writeln!(
                out,
                "#histogram,{},{},{},{}",
                bin.label, bin.lo, bin.hi, bin.count
            )
            .unwrap();
        }
        out
    }
}

/// PSE of every manifest row plus per-class histograms, written as CSV to `out`.
///
/// Rows that fail (unreadable audio, no voicing) are kept with an error marker.
/// Audio is resampled to `sample_rate` first. `jobs` bounds the worker
/// threads; output does not depend on it.
pub fn pse_report(
    manifest: &Manifest,
    out: impl AsRef<Path>,
    cfg: &PseConfig,
    sample_rate: u32,
    jobs: usize,
) -> Result<PseSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rows: Vec<(String, UttPse)> = pool.install(|| {
        manifest
            .rows()
            .par_iter()
            .map(|row| {
                let value = read_wav(&row.path)
                    .and_then(|buf| resample(&buf, sample_rate))
                    .and_then(|buf| utterance_pse(&buf, cfg))
                    .map_err(|e| e.to_string());
                (
                    row.utt_id.clone(),
                    UttPse {
                        label: row.role.class().name().to_string(),
                        value,
                    },
                )
            })
            .collect()
    });
    let summary = PseSummary::from_values(rows.into_iter().collect(), cfg.hist_bins);
    let out = out.as_ref();
    fs::write(out, summary.to_csv()).map_err(|e| Error::io(out, e))?;
    Ok(summary)
}
