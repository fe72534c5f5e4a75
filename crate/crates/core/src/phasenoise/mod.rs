//! Laser frequency-noise modeling and phase-record characterization.
//!
//! The central object is a three-coefficient one-sided PSD of instantaneous
//! frequency,
//!
//! ```text
//! S(f) = white + flicker / f + random_walk / f^2      [Hz^2/Hz]
//! ```
//!
//! from which two linewidth figures follow: a short-term (Lorentzian) width
//! `pi * white` set by the white floor alone, and an observation-time
//! dependent effective (Gaussian) width obtained by band-integrating the PSD
//! between `1/observation_time` and a self-consistent upper bound where the
//! spectrum stops contributing Gaussian-regime broadening.
//!
//! Synthesis ([`synthesize_phase`]) and analysis ([`PhaseRecord::estimate_fm_spectrum`],
//! [`fit_fm_model`]) are mutual inverses up to estimator noise, which the
//! round-trip tests pin down.

mod fit;
mod io;
mod spectrum;
mod synth;
mod variance;

pub use fit::{fit_fm_model, FmModelFit};
pub use io::read_phase_record;
pub use spectrum::SmoothingPolicy;
pub use variance::{linewidth_from_variance_slope, PhaseVarianceCurve, SlopeLinewidthEstimate};

pub use synth::synthesize_phase;

use crate::{Error, Result};

/// Constant relating the spectrum/line crossing used for the upper
/// integration bound: the bound is `(4 ln 4 / pi^2) * f`.
pub const GAUSSIAN_BOUND_SLOPE: f64 = 4.0 * std::f64::consts::LN_2 * 2.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Bisection bracket for the upper integration frequency, in Hz.
const CROSSING_BRACKET: (f64, f64) = (1.0, 1e12);

/// Three-term FM-noise model: white, flicker (1/f) and random-walk (1/f^2)
/// frequency noise. Coefficients are one-sided PSD levels referenced to 1 Hz;
/// units are Hz^2/Hz, Hz^2, and Hz^3 respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmNoiseModel {
    pub white: f64,
    pub flicker: f64,
    pub random_walk: f64,
}

impl FmNoiseModel {
    /// Build a model, rejecting negative or non-finite coefficients.
    pub fn new(white: f64, flicker: f64, random_walk: f64) -> Result<Self> {
        for (name, v) in [("white", white), ("flicker", flicker), ("random_walk", random_walk)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "FM-noise coefficient {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { white, flicker, random_walk })
    }

    /// All-zero (noiseless) model.
    pub fn zero() -> Self {
        Self { white: 0.0, flicker: 0.0, random_walk: 0.0 }
    }

    /// White-only model with the given Lorentzian linewidth (`white = lw / pi`).
    pub fn from_lorentzian_linewidth(linewidth_hz: f64) -> Result<Self> {
        if !linewidth_hz.is_finite() || linewidth_hz < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "linewidth must be finite and >= 0, got {linewidth_hz}"
            )));
        }
        Self::new(linewidth_hz / std::f64::consts::PI, 0.0, 0.0)
    }

    /// One-sided PSD of instantaneous frequency at `f` (> 0), in Hz^2/Hz.
    pub fn psd(&self, f: f64) -> f64 {
        self.white + self.flicker / f + self.random_walk / (f * f)
    }

    pub fn is_zero(&self) -> bool {
        self.white == 0.0 && self.flicker == 0.0 && self.random_walk == 0.0
    }

    /// Model with all three coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.white * factor, self.flicker * factor, self.random_walk * factor)
    }

    /// Short-term (Lorentzian) linewidth `pi * white`, in Hz.
    pub fn lorentzian_linewidth(&self) -> f64 {
        std::f64::consts::PI * self.white
    }

    /// Upper integration frequency for the effective-linewidth integral: the
    /// unique crossing of the PSD with the line `(4 ln 4 / pi^2) * f`,
    /// located by bisection on [1 Hz, 1e12 Hz] to 1e-6 relative tolerance.
    ///
    /// The PSD is non-increasing and the bound is increasing, so at most one
    /// crossing exists; if the spectrum is entirely below (or above) the line
    /// on the bracket, [`Error::NoCrossing`] is returned.
    pub fn integration_upper_frequency(&self) -> Result<f64> {
        let (mut lo, mut hi) = CROSSING_BRACKET;
        let g = |f: f64| self.psd(f) - GAUSSIAN_BOUND_SLOPE * f;
        if g(lo) <= 0.0 || g(hi) >= 0.0 {
            return Err(Error::NoCrossing { lo, hi });
        }
        // ~70 halvings take the bracket from 1e12 down past relative 1e-6.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-6 * mid {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Effective (Gaussian) linewidth for a given observation time, in Hz.
    ///
    /// Integrates the PSD from `f_low = 1/observation_time` to the
    /// self-consistent upper bound and returns `sqrt(8 ln 2 * A)` where `A`
    /// is the band integral. Valid only while the band is comfortably wide
    /// (`f_high > 5 f_low`); otherwise [`Error::ApproximationInvalid`] is
    /// returned. Use [`Self::gaussian_linewidth_report`] to force evaluation
    /// anyway.
    pub fn gaussian_linewidth(&self, observation_time: f64) -> Result<f64> {
        Ok(self.gaussian_linewidth_report(observation_time, false)?.linewidth_hz)
    }

    /// As [`Self::gaussian_linewidth`], but reports the integration band and,
    /// with `force`, evaluates even when the validity margin is not met
    /// (the result is then marked unreliable).
    pub fn gaussian_linewidth_report(
        &self,
        observation_time: f64,
        force: bool,
    ) -> Result<GaussianLinewidthReport> {
        if !observation_time.is_finite() || observation_time <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "observation time must be positive, got {observation_time}"
            )));
        }
        if self.is_zero() {
            return Ok(GaussianLinewidthReport {
                linewidth_hz: 0.0,
                f_low_hz: 1.0 / observation_time,
                f_high_hz: 1.0 / observation_time,
                reliable: true,
            });
        }
        let f_low = 1.0 / observation_time;
        let f_high = self.integration_upper_frequency()?;
        if f_high <= f_low {
            return Err(Error::ApproximationInvalid(format!(
                "integration band is empty: f_high {f_high:.3e} Hz <= f_low {f_low:.3e} Hz"
            )));
        }
        let reliable = f_high > 5.0 * f_low;
        if !reliable && !force {
            return Err(Error::ApproximationInvalid(format!(
                "f_high {f_high:.3e} Hz does not exceed 5 * f_low ({:.3e} Hz)",
                5.0 * f_low
            )));
        }
        let a = self.white * (f_high - f_low)
            + self.flicker * (f_high / f_low).ln()
            + self.random_walk * (1.0 / f_low - 1.0 / f_high);
        let linewidth_hz = (8.0 * std::f64::consts::LN_2 * a).sqrt();
        Ok(GaussianLinewidthReport { linewidth_hz, f_low_hz: f_low, f_high_hz: f_high, reliable })
    }
}

/// Result of an effective-linewidth evaluation.
#[derive(Debug, Clone, Copy)]
pub struct GaussianLinewidthReport {
    pub linewidth_hz: f64,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    /// False when the validity margin `f_high > 5 f_low` was not met.
    pub reliable: bool,
}

/// A sampled carrier-phase trajectory, in radians, on a uniform time grid.
#[derive(Debug, Clone)]
pub struct PhaseRecord {
    phases: Vec<f64>,
    sample_interval: f64,
    seed: u64,
}

impl PhaseRecord {
    /// Wrap an existing phase trajectory. Requires at least two samples, a
    /// positive sample interval and finite phases.
    pub fn new(phases: Vec<f64>, sample_interval: f64, seed: u64) -> Result<Self> {
        if phases.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "phase record needs >= 2 samples, got {}",
                phases.len()
            )));
        }
        if !sample_interval.is_finite() || sample_interval <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sample interval must be positive, got {sample_interval}"
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("phase record contains non-finite samples".into()));
        }
        Ok(Self { phases, sample_interval, seed })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Time step between samples, in seconds.
    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_interval
    }

    /// Record duration `n * sample_interval`, in seconds.
    pub fn duration(&self) -> f64 {
        self.phases.len() as f64 * self.sample_interval
    }

    /// Seed the record was synthesized from (0 for ingested data).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Discrete instantaneous frequency, `(phi[k+1] - phi[k]) / (2 pi dt)`,
    /// one sample shorter than the record.
    pub fn instantaneous_frequency(&self) -> Vec<f64> {
        let scale = 1.0 / (std::f64::consts::TAU * self.sample_interval);
        self.phases.windows(2).map(|w| (w[1] - w[0]) * scale).collect()
    }
}

/// One-sided FM-noise spectrum on an ascending positive frequency grid.
#[derive(Debug, Clone)]
pub struct FmSpectrum {
    frequencies: Vec<f64>,
    psd: Vec<f64>,
}

impl FmSpectrum {
    /// Wrap a spectrum; frequencies must be ascending and positive, PSD
    /// values non-negative, lengths equal.
    pub fn new(frequencies: Vec<f64>, psd: Vec<f64>) -> Result<Self> {
        if frequencies.len() != psd.len() {
            return Err(Error::InvalidArgument(format!(
                "frequency/PSD length mismatch: {} vs {}",
                frequencies.len(),
                psd.len()
            )));
        }
        if frequencies.is_empty() {
            return Err(Error::InsufficientData("empty spectrum".into()));
        }
        if frequencies[0] <= 0.0 || frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "frequencies must be positive and strictly ascending".into(),
            ));
        }
        if psd.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument("PSD values must be finite and >= 0".into()));
        }
        Ok(Self { frequencies, psd })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Trapezoidal band integral of the PSD over `[lo, hi]`, in Hz^2.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.frequencies.len() {
            let (f0, f1) = (self.frequencies[i - 1], self.frequencies[i]);
            if f1 <= lo || f0 >= hi {
                continue;
            }
            let a = f0.max(lo);
            let b = f1.min(hi);
            // Linear interpolation of the PSD across the clipped interval.
            let t0 = (a - f0) / (f1 - f0);
            let t1 = (b - f0) / (f1 - f0);
            let p0 = self.psd[i - 1] + t0 * (self.psd[i] - self.psd[i - 1]);
            let p1 = self.psd[i - 1] + t1 * (self.psd[i] - self.psd[i - 1]);
            acc += 0.5 * (p0 + p1) * (b - a);
        }
        acc
    }
}
