//! Fundamental-frequency contours.
//!
//! The estimator is a frame-wise normalized cross-correlation: for each lag
//! in the search band the frame is correlated with its own shifted copy and
//! divided by the energies of the two overlapping parts, so the peak value is
//! independent of signal level. The smallest lag whose peak is close to the
//! best one wins, which keeps pure tones from being reported an octave low.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::{centered_frame, parabolic_peak, FftPair};
use crate::error::{Error, Result};

/// Candidate peaks must reach this fraction of the best peak to be preferred
/// for having a shorter lag.
const OCTAVE_PREFERENCE: f64 = 0.85;

/// Analysis frame length in periods of the lowest allowed F0.
const PERIODS_PER_FRAME: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Config {
    /// Lowest reportable F0 in Hz.
    pub floor: f64,
    /// Highest reportable F0 in Hz.
    pub ceil: f64,
    /// Frame hop in seconds.
    pub hop: f64,
    /// Minimum normalized correlation for a frame to count as voiced.
    pub voicing_threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            floor: 75.0,
            ceil: 500.0,
            hop: 0.005,
            voicing_threshold: 0.3,
        }
    }
}

impl F0Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.ceil > self.floor) {
            return Err(Error::InvalidConfig(format!(
                "F0 band [{}, {}] is empty",
                self.floor, self.ceil
            )));
        }
        if !(self.hop > 0.0) {
            return Err(Error::InvalidConfig("F0 hop must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return Err(Error::InvalidConfig(
                "voicing threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Hop in whole samples at `rate`.
    pub fn hop_samples(&self, rate: u32) -> usize {
        ((self.hop * rate as f64).round() as usize).max(1)
    }
}

/// Per-frame F0 in Hz; 0.0 marks an unvoiced frame. Frame `i` is centred at `i * hop` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    pub values: Vec<f64>,
    pub hop: f64,
    pub floor: f64,
    pub ceil: f64,
}

impl F0Contour {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Maximal runs of voiced frames as half-open index ranges.
    pub fn voiced_regions(&self) -> Vec<std::ops::Range<usize>> {
        let mut regions = Vec::new();
        let mut start = None;
        for (i, &v) in self.values.iter().enumerate() {
            match (v > 0.0, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    regions.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            regions.push(s..self.values.len());
        }
        regions
    }
}

/// Number of contour frames for a signal of `n` samples: one centre per hop inside the signal.
pub fn contour_frame_count(n: usize, hop_samples: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) / hop_samples + 1
    }
}

pub fn estimate_f0(buf: &AudioBuffer, cfg: &F0Config) -> Result<F0Contour> {
    cfg.validate()?;
    let rate = buf.sample_rate() as f64;
    let needed = (2.0 * rate / cfg.floor).ceil() as usize;
    if buf.len() < needed {
        return Err(Error::InputTooShort {
            needed,
            got: buf.len(),
        });
    }

    let hop = cfg.hop_samples(buf.sample_rate());
    let frame_len = (PERIODS_PER_FRAME * rate / cfg.floor).round() as usize;
    let lag_min = ((rate / cfg.ceil).floor() as usize).max(2);
    let lag_max = (rate / cfg.floor).ceil() as usize;
    if lag_max + 2 >= frame_len {
        return Err(Error::InvalidConfig(
            "F0 band too wide for frame length".into(),
        ));
    }
    let fft = FftPair::new((2 * frame_len).next_power_of_two());

    let values = (0..contour_frame_count(buf.len(), hop))
        .map(|i| {
            let frame = centered_frame(buf.samples(), i * hop, frame_len);
            frame_f0(&frame, rate, lag_min, lag_max, cfg, &fft)
        })
        .collect();

    Ok(F0Contour {
        values,
        hop: cfg.hop,
        floor: cfg.floor,
        ceil: cfg.ceil,
    })
}

fn frame_f0(
    frame: &[f64],
    rate: f64,
    lag_min: usize,
    lag_max: usize,
    cfg: &F0Config,
    fft: &FftPair,
) -> f64 {
    let n = frame.len();
    let mean = frame.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();

    // cumulative energy; energy of x[a..b] = cum[b] - cum[a]
    let mut cum = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        cum[i + 1] = cum[i] + v * v;
    }
    if cum[n] <= f64::MIN_POSITIVE {
        return 0.0;
    }

    let mut spec = fft.forward_real(&x);
    spec.iter_mut().for_each(|c| *c *= c.conj());
    fft.inverse_in_place(&mut spec);
    let scale = 1.0 / fft.size() as f64;

    let norm_corr = |lag: usize| -> f64 {
        let head = cum[n - lag];
        let tail = cum[n] - cum[lag];
        let denom = (head * tail).sqrt();
        if denom <= f64::MIN_POSITIVE {
            0.0
        } else {
            spec[lag].re * scale / denom
        }
    };
    let corr: Vec<f64> = (lag_min - 1..=lag_max + 1).map(norm_corr).collect();
    let at = |lag: usize| corr[lag + 1 - lag_min];

    let peaks: Vec<usize> = (lag_min..=lag_max)
        .filter(|&lag| at(lag) > at(lag - 1) && at(lag) >= at(lag + 1))
        .collect();
    let best = peaks
        .iter()
        .map(|&l| at(l))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best >= cfg.voicing_threshold) {
        return 0.0;
    }
    let Some(&lag) = peaks.iter().find(|&&l| at(l) >= OCTAVE_PREFERENCE * best) else {
        return 0.0;
    };
    let (offset, _) = parabolic_peak(at(lag - 1), at(lag), at(lag + 1));
    let f0 = rate / (lag as f64 + offset);
    if f0 < cfg.floor || f0 > cfg.ceil {
        0.0
    } else {
        f0
    }
}

/// Drop the leading and trailing unvoiced frames. Interior zeros stay.
pub fn trim_contour(c: &F0Contour) -> Result<F0Contour> {
    let first = c.values.iter().position(|&v| v != 0.0);
    let last = c.values.iter().rposition(|&v| v != 0.0);
    match (first, last) {
        (Some(a), Some(b)) => Ok(F0Contour {
            values: c.values[a..=b].to_vec(),
            ..c.clone()
        }),
        _ => Err(Error::EmptyAfterTrim),
    }
}
