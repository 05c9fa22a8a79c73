//! Small FFT helpers shared by the analysis modules.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// A forward/inverse transform pair of one fixed size.
pub(crate) struct FftPair {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub(crate) fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub(crate) fn size(&self) -> usize {
        self.size
    }

    /// Full complex spectrum of `input`, zero-padded (or truncated) to the transform size.
    pub(crate) fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = input
            .iter()
            .take(self.size)
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf
    }

    /// Unnormalized inverse transform in place; callers divide by the size.
    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// One-sided power spectrum `|X_k|^2`, k = 0..=n/2.
pub(crate) fn one_sided_power(spectrum: &[Complex64]) -> Vec<f64> {
    spectrum[..spectrum.len() / 2 + 1]
        .iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// Copy `len` samples centred on `center`, zero outside the signal.
pub(crate) fn centered_frame(signal: &[f64], center: usize, len: usize) -> Vec<f64> {
    let start = center as isize - (len / 2) as isize;
    (0..len as isize)
        .map(|i| {
            let idx = start + i;
            if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Parabolic interpolation through three equally spaced samples around a peak.
/// Returns the (offset, value) of the vertex; offset lies in [-0.5, 0.5] for a true peak.
pub(crate) fn parabolic_peak(left: f64, center: f64, right: f64) -> (f64, f64) {
    let denom = left - 2.0 * center + right;
    if denom >= 0.0 || !denom.is_finite() {
        return (0.0, center);
    }
    let offset = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
    (offset, center - 0.25 * (left - right) * offset)
}
