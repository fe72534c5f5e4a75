//! Clock-phase recovery at two samples per symbol.
//!
//! The detector correlates the upper and lower roll-off bands of the signal
//! spectrum, which are images of each other spaced by exactly the symbol
//! rate. For a shaped signal the data spectrum cancels in that product and
//! its argument reads the clock phase directly; a square-law detector working
//! on the same spectral line would see the identical quantity. Correction is
//! a cyclic 4-point cubic interpolation at the estimated fractional delay.

use num_complex::Complex64;

use crate::txdsp::DualPolWaveform;
use crate::util::fft_inplace;
use crate::{Error, Result};

/// Detector output.
#[derive(Debug, Clone, Copy)]
pub struct TimingEstimate {
    /// Signal delay relative to the sampling grid, unit intervals in
    /// [-0.5, 0.5).
    pub offset_ui: f64,
    /// Coherence of the band correlation in [0, 1]; near zero means no
    /// usable clock line.
    pub lock_strength: f64,
}

const LOCK_THRESHOLD: f64 = 0.1;

/// Estimate the fractional clock phase of a 2 sps waveform.
pub fn estimate_timing_offset(waveform: &DualPolWaveform) -> Result<TimingEstimate> {
    waveform.validate()?;
    let n = waveform.len();
    let fs = waveform.sample_rate;
    let rs = waveform.symbol_rate;
    if ((fs / rs) - 2.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "timing detector needs 2 samples per symbol, got {:.4}",
            fs / rs
        )));
    }
    if n < 64 || n % 2 != 0 {
        return Err(Error::InsufficientData(format!(
            "need an even record of >= 64 samples, got {n}"
        )));
    }
    let mut g = Complex64::ZERO;
    let mut norm = 0.0;
    for rail in [&waveform.x, &waveform.y] {
        let mut spec = rail.to_vec();
        fft_inplace(&mut spec);
        // Positive-frequency roll-off region around rs/2; its pair sits one
        // symbol rate lower, in the negative roll-off region. Keep the band
        // tight: bins outside the spectral overlap |f - rs/2| <= beta*rs/2
        // only dilute the coherence once noise is present.
        let lo = ((0.45 * rs) / fs * n as f64).floor() as usize;
        let hi = (((0.55 * rs) / fs * n as f64).ceil() as usize).min(n / 2 - 1);
        for m in lo..=hi {
            let pair = (m + n / 2) % n;
            let prod = spec[m] * spec[pair].conj();
            g += prod;
            norm += prod.norm();
        }
    }
    if norm <= 0.0 {
        return Err(Error::LockFailure("signal has no clock line".into()));
    }
    let lock_strength = g.norm() / norm;
    if lock_strength < LOCK_THRESHOLD {
        return Err(Error::LockFailure(format!(
            "clock-line coherence {lock_strength:.3} below {LOCK_THRESHOLD}"
        )));
    }
    Ok(TimingEstimate { offset_ui: -g.arg() / (2.0 * std::f64::consts::PI), lock_strength })
}

/// Evaluate the cyclic 4-point cubic (Lagrange) interpolant of `rail` at
/// fractional position `base + mu` with `mu` in [0, 1).
fn cubic_at(rail: &[Complex64], base: i64, mu: f64) -> Complex64 {
    let n = rail.len() as i64;
    let at = |i: i64| rail[(i.rem_euclid(n)) as usize];
    let (x0, x1, x2, x3) = (at(base - 1), at(base), at(base + 1), at(base + 2));
    let c0 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    let c1 = (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0;
    let c2 = -(mu + 1.0) * mu * (mu - 2.0) / 2.0;
    let c3 = (mu + 1.0) * mu * (mu - 1.0) / 6.0;
    x0 * c0 + x1 * c1 + x2 * c2 + x3 * c3
}

/// Shift a rail by `delay_samples` (cyclically): output[k] = input(k + delay).
fn interpolate_shift(rail: &[Complex64], delay_samples: f64) -> Vec<Complex64> {
    let base_shift = delay_samples.floor();
    let mu = delay_samples - base_shift;
    (0..rail.len())
        .map(|k| cubic_at(rail, k as i64 + base_shift as i64, mu))
        .collect()
}

/// Estimate and remove the fractional clock phase so symbol instants land on
/// even sample indices. Returns the corrected waveform and the estimate.
pub fn timing_recovery(waveform: &DualPolWaveform) -> Result<(DualPolWaveform, TimingEstimate)> {
    let estimate = estimate_timing_offset(waveform)?;
    let delay_samples = estimate.offset_ui * 2.0;
    if delay_samples.abs() < 1e-6 {
        return Ok((waveform.clone(), estimate));
    }
    let out = DualPolWaveform {
        x: interpolate_shift(&waveform.x, delay_samples),
        y: interpolate_shift(&waveform.y, delay_samples),
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    };
    Ok((out, estimate))
}
