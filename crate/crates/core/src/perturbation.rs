//! Cycle-to-cycle jitter and shimmer.
//!
//! Glottal cycles are marked by picking waveform peaks spaced roughly one F0
//! period apart inside each voiced region of the contour. This is a
//! peak-picking approximation to Praat's waveform-matching period marks,
//! good enough for utterance-level averages.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::parabolic_peak;
use crate::error::{Error, Result};
use crate::f0::{estimate_f0, F0Config, F0Contour};

/// Search window for the next peak, as fractions of the local period.
const NEXT_PEAK_WINDOW: (f64, f64) = (0.7, 1.3);
/// A candidate peak weaker than this fraction of the previous one ends the chain.
const MIN_PEAK_RATIO: f64 = 0.2;

/// Glottal cycles of one voiced stretch: the duration and peak amplitude of each cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSequence {
    /// Seconds.
    pub periods: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl CycleSequence {
    pub fn new(periods: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        if periods.len() != amplitudes.len() {
            return Err(Error::DimMismatch {
                expected: periods.len(),
                got: amplitudes.len(),
            });
        }
        if periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig(
                "cycle periods must be positive".into(),
            ));
        }
        if amplitudes.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig(
                "cycle amplitudes must be nonnegative".into(),
            ));
        }
        Ok(Self {
            periods,
            amplitudes,
        })
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterVariant {
    /// Mean absolute difference of consecutive periods over the mean period.
    #[default]
    Local,
    /// Relative average perturbation: deviation from the 3-point moving average.
    Rap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShimmerVariant {
    #[default]
    Local,
    /// Three-point amplitude perturbation quotient.
    Apq3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub f0: F0Config,
    pub jitter: JitterVariant,
    pub shimmer: ShimmerVariant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationFeatures {
    pub jitter: f64,
    pub shimmer: f64,
    pub num_cycles: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_abs_successive_diff(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64
}

fn three_point_perturbation(v: &[f64]) -> f64 {
    v.windows(3)
        .map(|w| (w[1] - (w[0] + w[1] + w[2]) / 3.0).abs())
        .sum::<f64>()
        / (v.len() - 2) as f64
}

pub fn jitter_local(c: &CycleSequence) -> Result<f64> {
    if c.len() < 2 {
        return Err(Error::TooFewCycles(c.len()));
    }
    Ok(mean_abs_successive_diff(&c.periods) / mean(&c.periods))
}

pub fn shimmer_local(c: &CycleSequence) -> Result<f64> {
    if c.len() < 2 {
        return Err(Error::TooFewCycles(c.len()));
    }
    let m = mean(&c.amplitudes);
    if m <= 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    Ok(mean_abs_successive_diff(&c.amplitudes) / m)
}

pub fn jitter(c: &CycleSequence, variant: JitterVariant) -> Result<f64> {
    match variant {
        JitterVariant::Local => jitter_local(c),
        JitterVariant::Rap => {
            if c.len() < 3 {
                return Err(Error::TooFewCycles(c.len()));
            }
            Ok(three_point_perturbation(&c.periods) / mean(&c.periods))
        }
    }
}

pub fn shimmer(c: &CycleSequence, variant: ShimmerVariant) -> Result<f64> {
    match variant {
        ShimmerVariant::Local => shimmer_local(c),
        ShimmerVariant::Apq3 => {
            if c.len() < 3 {
                return Err(Error::TooFewCycles(c.len()));
            }
            let m = mean(&c.amplitudes);
            if m <= 0.0 {
                return Err(Error::ZeroAmplitude);
            }
            Ok(three_point_perturbation(&c.amplitudes) / m)
        }
    }
}

/// Mark glottal cycles inside each voiced region of `contour`.
///
/// Returns one sequence per unbroken chain of peaks; a region yields more than
/// one chain when the waveform drops out inside it. No cycle ever spans two regions.
pub fn extract_cycles(buf: &AudioBuffer, contour: &F0Contour) -> Result<Vec<CycleSequence>> {
    let regions = contour.voiced_regions();
    if regions.is_empty() {
        return Err(Error::NoVoicedRegion);
    }
    let rate = buf.sample_rate() as f64;
    let hop = ((contour.hop * rate).round() as usize).max(1);
    let x = buf.samples();

    let mut out = Vec::new();
    for region in regions {
        let start = (region.start * hop).saturating_sub(hop / 2).min(x.len());
        let end = ((region.end - 1) * hop + hop / 2 + 1).min(x.len());
        if end <= start + 2 {
            continue;
        }
        let period_at = |pos: f64| -> f64 {
            let frame = ((pos / hop as f64).round() as usize).clamp(region.start, region.end - 1);
            rate / contour.values[frame]
        };
        let seg = &x[start..end];
        let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = seg.iter().copied().fold(f64::INFINITY, f64::min);
        let sign = if max >= -min { 1.0 } else { -1.0 };
        let y: Vec<f64> = seg.iter().map(|v| sign * v).collect();
        let offset = start as f64;
        for chain in mark_chains(&y, |p| period_at(p + offset)) {
            if chain.len() >= 2 {
                let periods = chain.windows(2).map(|w| (w[1].0 - w[0].0) / rate).collect();
                let amplitudes = chain[..chain.len() - 1].iter().map(|p| p.1).collect();
                out.push(CycleSequence::new(periods, amplitudes)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoVoicedRegion);
    }
    Ok(out)
}

/// Peak chains in `y` as (fractional position, amplitude) lists.
fn mark_chains(y: &[f64], period_at: impl Fn(f64) -> f64) -> Vec<Vec<(f64, f64)>> {
    let n = y.len();
    let argmax = |lo: usize, hi: usize| -> usize {
        let mut best = lo;
        for i in lo..hi {
            if y[i] > y[best] {
                best = i;
            }
        }
        // climb to the local maximum if the window edge cut the rise short
        while best + 1 < n && y[best + 1] > y[best] {
            best += 1;
        }
        best
    };
    let refine = |i: usize| -> (f64, f64) {
        if i == 0 || i + 1 >= n {
            return (i as f64, y[i]);
        }
        let (off, val) = parabolic_peak(y[i - 1], y[i], y[i + 1]);
        (i as f64 + off, val)
    };

    let mut chains = Vec::new();
    let mut chain: Vec<(f64, f64)> = Vec::new();
    let mut search_from = 0usize;
    while search_from < n {
        if chain.is_empty() {
            let span = period_at(search_from as f64).ceil() as usize;
            let hi = (search_from + span.max(1)).min(n);
            let q = argmax(search_from, hi);
            if y[q] > 0.0 {
                chain.push(refine(q));
                search_from = q + 1;
            } else {
                search_from = hi;
            }
            continue;
        }
        let (pos, amp) = *chain.last().unwrap();
        let period = period_at(pos);
        let lo = (pos + NEXT_PEAK_WINDOW.0 * period).ceil() as usize;
        let hi = ((pos + NEXT_PEAK_WINDOW.1 * period).floor() as usize + 1).min(n);
        if lo >= hi {
            break;
        }
        let q = argmax(lo, hi);
        if y[q] > 0.0 && y[q] >= MIN_PEAK_RATIO * amp {
            chain.push(refine(q));
        } else {
            chains.push(std::mem::take(&mut chain));
            search_from = hi;
        }
    }
    if !chain.is_empty() {
        chains.push(chain);
    }
    chains
}

/// Utterance-wise jitter and shimmer: per-chain values averaged with cycle-count weights.
pub fn utterance_perturbation(
    buf: &AudioBuffer,
    cfg: &PerturbationConfig,
) -> Result<PerturbationFeatures> {
    let contour = estimate_f0(buf, &cfg.f0)?;
    let chains = extract_cycles(buf, &contour)?;
    let min_cycles = match (cfg.jitter, cfg.shimmer) {
        (JitterVariant::Local, ShimmerVariant::Local) => 2,
        _ => 3,
    };
    let (mut jw, mut sw, mut total) = (0.0, 0.0, 0usize);
    for c in chains.iter().filter(|c| c.len() >= min_cycles) {
        let n = c.len();
        jw += n as f64 * jitter(c, cfg.jitter)?;
        sw += n as f64 * shimmer(c, cfg.shimmer)?;
        total += n;
    }
    if total == 0 {
        return Err(Error::TooFewCycles(
            chains.iter().map(|c| c.len()).max().unwrap_or(0),
        ));
    }
    Ok(PerturbationFeatures {
        jitter: jw / total as f64,
        shimmer: sw / total as f64,
        num_cycles: total,
    })
}
