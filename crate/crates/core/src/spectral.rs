//! Frame-level spectral features: log-magnitude STFT, 39-dim MFCC, a
//! cepstrally smoothed spectral envelope (SP) and band aperiodicity (AP).
//!
//! SP and AP are simplified stand-ins for WORLD's CheapTrick and D4C:
//!
//! * SP keeps the low quefrencies of the log power spectrum, below 0.8 of the
//!   pitch period for voiced frames and below 2.5 ms otherwise, so harmonic
//!   ripple is removed and the resonance shape remains.
//! * AP compares, per band, the energy between harmonics (scaled up to the
//!   whole band) with the total band energy. Bands are octaves below Nyquist,
//!   the lowest one reaching down to 0 Hz.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, AudioBuffer, WindowKind};
use crate::dsp::{centered_frame, one_sided_power, FftPair};
use crate::error::{Error, Result};
use crate::f0::{contour_frame_count, F0Contour};
use crate::features::{FeatureKind, FeatureMatrix};

/// Floor added before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 512,
            win_ms: 25.0,
            hop_ms: 10.0,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn win_samples(&self, rate: u32) -> usize {
        (self.win_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.hop_ms * rate as f64 / 1000.0).round() as usize
    }

    fn check(&self, rate: u32) -> Result<(usize, usize)> {
        let (win, hop) = (self.win_samples(rate), self.hop_samples(rate));
        if self.n_fft < 2 || win == 0 || hop == 0 || win > self.n_fft {
            return Err(Error::InvalidConfig(format!(
                "STFT needs 0 < window ({win}) <= n_fft ({}) and hop > 0",
                self.n_fft
            )));
        }
        Ok((win, hop))
    }
}

/// Windowed full-length FFT of every frame.
pub fn stft_frames(buf: &AudioBuffer, cfg: &StftConfig) -> Result<Vec<Vec<Complex64>>> {
    let (win, hop) = cfg.check(buf.sample_rate())?;
    if buf.len() < win {
        return Err(Error::InputTooShort {
            needed: win,
            got: buf.len(),
        });
    }
    let window = cfg.window.coefficients(win);
    let fft = FftPair::new(cfg.n_fft);
    let frames = frame_signal(buf, win, hop)?;
    Ok(frames
        .frames()
        .map(|f| {
            let w: Vec<f64> = f.iter().zip(&window).map(|(x, w)| x * w).collect();
            fft.forward_real(&w)
        })
        .collect())
}

/// `ln(|X| + 1e-10)` of the one-sided spectrum, `n_fft/2 + 1` columns.
pub fn stft_spectrogram(buf: &AudioBuffer, cfg: &StftConfig) -> Result<FeatureMatrix> {
    let dims = cfg.n_fft / 2 + 1;
    let rows: Vec<Vec<f64>> = stft_frames(buf, cfg)?
        .into_iter()
        .map(|spec| {
            spec[..dims]
                .iter()
                .map(|c| (c.norm() + LOG_FLOOR).ln())
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(FeatureKind::Stft, rows, dims, cfg.hop_ms / 1000.0, "")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub stft: StftConfig,
    pub n_mels: usize,
    pub n_ceps: usize,
    pub f_min: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max: Option<f64>,
    /// Sinusoidal lifter coefficient; 0 disables liftering.
    pub lifter: f64,
    pub delta_window: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            n_mels: 26,
            n_ceps: 13,
            f_min: 0.0,
            f_max: None,
            lifter: 0.0,
            delta_window: 2,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters evaluated at the one-sided FFT bin frequencies.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    rate: u32,
    f_min: f64,
    f_max: f64,
) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    (0..n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * rate as f64 / n_fft as f64;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Static cepstra, then first and second regression deltas appended.
pub fn mfcc(buf: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    if cfg.n_mels == 0 || cfg.n_ceps == 0 || cfg.n_ceps > cfg.n_mels {
        return Err(Error::InvalidConfig(format!(
            "need 0 < n_ceps ({}) <= n_mels ({})",
            cfg.n_ceps, cfg.n_mels
        )));
    }
    let rate = buf.sample_rate();
    let f_max = cfg.f_max.unwrap_or(rate as f64 / 2.0);
    let bank = mel_filterbank(cfg.n_mels, cfg.stft.n_fft, rate, cfg.f_min, f_max);
    let m = cfg.n_mels as f64;

    let statics: Vec<Vec<f64>> = stft_frames(buf, &cfg.stft)?
        .iter()
        .map(|spec| {
            let power = one_sided_power(spec);
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                    (e + LOG_FLOOR).ln()
                })
                .collect();
            (0..cfg.n_ceps)
                .map(|k| {
                    let scale = if k == 0 {
                        (1.0 / m).sqrt()
                    } else {
                        (2.0 / m).sqrt()
                    };
                    let c: f64 = log_mel
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                        .sum();
                    let lift = if cfg.lifter > 0.0 {
                        1.0 + 0.5 * cfg.lifter * (PI * k as f64 / cfg.lifter).sin()
                    } else {
                        1.0
                    };
                    scale * c * lift
                })
                .collect()
        })
        .collect();

    let d1 = delta(&statics, cfg.delta_window);
    let d2 = delta(&d1, cfg.delta_window);
    let dims = 3 * cfg.n_ceps;
    let rows = statics
        .into_iter()
        .zip(d1)
        .zip(d2)
        .map(|((s, a), b)| [s, a, b].concat())
        .collect();
    FeatureMatrix::from_rows(FeatureKind::Mfcc, rows, dims, cfg.stft.hop_ms / 1000.0, "")
}

/// Regression deltas over `±window` frames, replicating the edge frames.
pub fn delta(m: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = m.len() as isize;
    if t_len == 0 || window == 0 {
        return m.iter().map(|r| vec![0.0; r.len()]).collect();
    }
    let denom = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let at = |t: isize| &m[t.clamp(0, t_len - 1) as usize];
    (0..t_len)
        .map(|t| {
            let mut out = vec![0.0; m[t as usize].len()];
            for n in 1..=window as isize {
                let (next, prev) = (at(t + n), at(t - n));
                for (o, (a, b)) in out.iter_mut().zip(next.iter().zip(prev)) {
                    *o += n as f64 * (a - b);
                }
            }
            out.iter_mut().for_each(|o| *o /= denom);
            out
        })
        .collect()
}

fn check_alignment(buf: &AudioBuffer, contour: &F0Contour) -> Result<usize> {
    let hop = ((contour.hop * buf.sample_rate() as f64).round() as usize).max(1);
    let expected = contour_frame_count(buf.len(), hop);
    if contour.len() != expected {
        return Err(Error::AlignmentMismatch {
            expected,
            got: contour.len(),
        });
    }
    Ok(hop)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub n_fft: usize,
    /// Lifter cutoff as a fraction of the pitch period, voiced frames.
    pub period_fraction: f64,
    /// Lifter cutoff in seconds, unvoiced frames.
    pub unvoiced_cutoff: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            period_fraction: 0.8,
            unvoiced_cutoff: 0.0025,
        }
    }
}

/// Smooth nonnegative power envelope, one row per contour frame, `n_fft/2 + 1` columns.
pub fn spectral_envelope(
    buf: &AudioBuffer,
    contour: &F0Contour,
    cfg: &EnvelopeConfig,
) -> Result<FeatureMatrix> {
    if cfg.n_fft < 4 {
        return Err(Error::InvalidConfig(
            "envelope n_fft must be at least 4".into(),
        ));
    }
    let hop = check_alignment(buf, contour)?;
    let rate = buf.sample_rate() as f64;
    let n = cfg.n_fft;
    let window = WindowKind::Hann.coefficients(n);
    let fft = FftPair::new(n);
    let dims = n / 2 + 1;

    let rows = contour
        .values
        .iter()
        .enumerate()
        .map(|(i, &f0)| {
            let frame: Vec<f64> = centered_frame(buf.samples(), i * hop, n)
                .iter()
                .zip(&window)
                .map(|(x, w)| x * w)
                .collect();
            let mut ceps: Vec<Complex64> = fft
                .forward_real(&frame)
                .iter()
                .map(|c| Complex64::new((c.norm_sqr() + LOG_FLOOR).ln(), 0.0))
                .collect();
            fft.inverse_in_place(&mut ceps);
            let cutoff = if f0 > 0.0 {
                (cfg.period_fraction * rate / f0).floor() as usize
            } else {
                (cfg.unvoiced_cutoff * rate).round() as usize
            };
            let lifted: Vec<f64> = ceps
                .iter()
                .enumerate()
                .map(|(q, c)| {
                    if q <= cutoff || q >= n - cutoff {
                        c.re / n as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            fft.forward_real(&lifted)[..dims]
                .iter()
                .map(|c| c.re.exp())
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(FeatureKind::Sp, rows, dims, contour.hop, "")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AperiodicityConfig {
    pub n_fft: usize,
    pub n_bands: usize,
}

impl Default for AperiodicityConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            n_bands: 5,
        }
    }
}

/// Band edges in Hz: octaves below Nyquist, the lowest band starting at 0.
pub fn aperiodicity_band_edges(n_bands: usize, rate: u32) -> Vec<f64> {
    let nyquist = rate as f64 / 2.0;
    std::iter::once(0.0)
        .chain((1..=n_bands).map(|k| nyquist / 2f64.powi((n_bands - k) as i32)))
        .collect()
}

/// Largest distance (in bins) from a harmonic at which a bin counts as harmonic.
const HARMONIC_HALF_WIDTH: f64 = 2.5;

/// Per-band aperiodic energy ratio in `[0, 1]`; unvoiced frames are 1 in every band.
pub fn band_aperiodicity(
    buf: &AudioBuffer,
    contour: &F0Contour,
    cfg: &AperiodicityConfig,
) -> Result<FeatureMatrix> {
    if cfg.n_bands == 0 || cfg.n_fft < 4 {
        return Err(Error::InvalidConfig(
            "aperiodicity needs n_bands >= 1 and n_fft >= 4".into(),
        ));
    }
    let hop = check_alignment(buf, contour)?;
    let rate = buf.sample_rate();
    let n = cfg.n_fft;
    let window = WindowKind::Hann.coefficients(n);
    let fft = FftPair::new(n);
    let edges = aperiodicity_band_edges(cfg.n_bands, rate);
    let bin_hz = rate as f64 / n as f64;
    let n_bins = n / 2 + 1;
    // bin index range of each band; the top band keeps the Nyquist bin
    let band_bins: Vec<std::ops::Range<usize>> = edges
        .windows(2)
        .enumerate()
        .map(|(b, e)| {
            let lo = (e[0] / bin_hz).ceil() as usize;
            let hi = if b + 1 == cfg.n_bands {
                n_bins
            } else {
                ((e[1] / bin_hz).ceil() as usize).min(n_bins)
            };
            lo..hi.max(lo)
        })
        .collect();

    let rows = contour
        .values
        .iter()
        .enumerate()
        .map(|(i, &f0)| {
            if f0 <= 0.0 {
                return vec![1.0; cfg.n_bands];
            }
            let frame: Vec<f64> = centered_frame(buf.samples(), i * hop, n)
                .iter()
                .zip(&window)
                .map(|(x, w)| x * w)
                .collect();
            let power = one_sided_power(&fft.forward_real(&frame));
            let spacing = f0 / bin_hz;
            let half_width = HARMONIC_HALF_WIDTH.min(spacing / 2.5);
            let is_harmonic = |k: usize| {
                let h = (k as f64 / spacing).round();
                (k as f64 - h * spacing).abs() < half_width
            };
            band_bins
                .iter()
                .map(|bins| {
                    let total: f64 = power[bins.clone()].iter().sum();
                    if bins.is_empty() || total <= 0.0 {
                        return 1.0;
                    }
                    let residual: Vec<f64> = bins
                        .clone()
                        .filter(|&k| !is_harmonic(k))
                        .map(|k| power[k])
                        .collect();
                    let density = if residual.is_empty() {
                        power[bins.clone()]
                            .iter()
                            .copied()
                            .fold(f64::INFINITY, f64::min)
                    } else {
                        residual.iter().sum::<f64>() / residual.len() as f64
                    };
                    (density * bins.len() as f64 / total).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(FeatureKind::Ap, rows, cfg.n_bands, contour.hop, "")
}
