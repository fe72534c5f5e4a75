//! Comb source: a grid of equally spaced carrier lines, each with its own
//! phase-noise realization and a carrier-to-noise figure.
//!
//! Lines are represented individually at complex baseband; nothing here
//! builds a full-band multi-line field.

use crate::phasenoise::{synthesize_phase, FmNoiseModel, PhaseRecord};
use crate::util::derive_seed;
use crate::{Error, Result};

/// Reference bandwidth for carrier-to-noise ratios, in Hz.
pub const OCNR_REFERENCE_BANDWIDTH: f64 = 12.5e9;

/// Static description of a comb source.
#[derive(Debug, Clone)]
pub struct CombSpec {
    /// Optical frequency of the grid center, in Hz.
    pub center_frequency: f64,
    /// Line spacing (free spectral range), in Hz.
    pub fsr: f64,
    /// Number of lines on the grid.
    pub n_lines: usize,
    /// Per-line power envelope in dB relative to the flat level; empty means
    /// flat. When non-empty its length must equal `n_lines`.
    pub envelope_db: Vec<f64>,
    /// FM-noise model shared by every line (realizations stay independent).
    pub line_noise: FmNoiseModel,
    /// Optical carrier-to-noise ratio per line in dB, referred to
    /// [`OCNR_REFERENCE_BANDWIDTH`]. `f64::INFINITY` disables carrier noise.
    pub ocnr_db: f64,
}

impl CombSpec {
    fn validate(&self) -> Result<()> {
        if !self.center_frequency.is_finite() || self.center_frequency <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "center frequency must be positive, got {}",
                self.center_frequency
            )));
        }
        if !self.fsr.is_finite() || self.fsr <= 0.0 {
            return Err(Error::InvalidArgument(format!("FSR must be positive, got {}", self.fsr)));
        }
        if self.n_lines == 0 {
            return Err(Error::InvalidArgument("comb needs at least one line".into()));
        }
        if !self.envelope_db.is_empty() && self.envelope_db.len() != self.n_lines {
            return Err(Error::InvalidArgument(format!(
                "envelope has {} entries for {} lines",
                self.envelope_db.len(),
                self.n_lines
            )));
        }
        if self.envelope_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("envelope contains non-finite values".into()));
        }
        if self.ocnr_db.is_nan() {
            return Err(Error::InvalidArgument("OCNR must not be NaN".into()));
        }
        Ok(())
    }

    /// Optical frequency of line `index` (0-based). Lines are centered on
    /// `center_frequency`: index `(n_lines - 1)/2` sits at (or next to) it.
    pub fn line_frequency(&self, index: usize) -> f64 {
        let offset = index as f64 - (self.n_lines as f64 - 1.0) / 2.0;
        self.center_frequency + offset * self.fsr
    }
}

/// One comb line: its grid position, power, and carrier-phase trajectory.
#[derive(Debug, Clone)]
pub struct CarrierTone {
    pub line_index: usize,
    /// Absolute optical frequency, in Hz.
    pub frequency: f64,
    /// Linear power (flat level = 1.0).
    pub power: f64,
    pub phase: PhaseRecord,
}

/// Generate every line of the comb over `duration` at `sample_rate`.
///
/// Each line's phase realization is drawn from an independent substream
/// keyed by (seed, line index); runs are reproducible and insensitive to
/// generation order.
pub fn generate_comb(
    spec: &CombSpec,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<Vec<CarrierTone>> {
    spec.validate()?;
    if !duration.is_finite() || duration <= 0.0 {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let n_samples = (duration * sample_rate).round() as usize;
    (0..spec.n_lines).map(|i| generate_line(spec, i, n_samples, sample_rate, seed)).collect()
}

/// Generate a single comb line; see [`generate_comb`].
pub fn generate_line(
    spec: &CombSpec,
    line_index: usize,
    n_samples: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<CarrierTone> {
    spec.validate()?;
    if line_index >= spec.n_lines {
        return Err(Error::InvalidArgument(format!(
            "line index {line_index} out of range for {} lines",
            spec.n_lines
        )));
    }
    let line_seed = derive_seed(seed, &[0x636f_6d62, line_index as u64]);
    let phase = synthesize_phase(&spec.line_noise, n_samples, sample_rate, line_seed)?;
    let power = if spec.envelope_db.is_empty() {
        1.0
    } else {
        10f64.powf(spec.envelope_db[line_index] / 10.0)
    };
    Ok(CarrierTone { line_index, frequency: spec.line_frequency(line_index), power, phase })
}

/// Which lines to keep when de-interleaving the comb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineSelection {
    /// Lines with odd index.
    Odd,
    /// Lines with even index.
    Even,
    /// Explicit set of line indices.
    Indices(Vec<usize>),
}

/// Keep the selected lines, optionally flattening their powers to the
/// weakest selected line (an attenuating equalizer cannot add power).
pub fn select_lines(
    tones: &[CarrierTone],
    selection: &LineSelection,
    flatten: bool,
) -> Result<Vec<CarrierTone>> {
    let mut picked: Vec<CarrierTone> = match selection {
        LineSelection::Odd => {
            tones.iter().filter(|t| t.line_index % 2 == 1).cloned().collect()
        }
        LineSelection::Even => {
            tones.iter().filter(|t| t.line_index % 2 == 0).cloned().collect()
        }
        LineSelection::Indices(idx) => {
            let mut out = Vec::with_capacity(idx.len());
            for &i in idx {
                let tone = tones
                    .iter()
                    .find(|t| t.line_index == i)
                    .ok_or_else(|| Error::InvalidArgument(format!("no line with index {i}")))?;
                out.push(tone.clone());
            }
            out
        }
    };
    if picked.is_empty() {
        return Err(Error::InvalidArgument("selection keeps no lines".into()));
    }
    if flatten {
        let floor = picked.iter().map(|t| t.power).fold(f64::INFINITY, f64::min);
        for t in &mut picked {
            t.power = floor;
        }
    }
    Ok(picked)
}

/// One-sided noise PSD implied by the line's OCNR, in W/Hz per unit line
/// power unit: `line_power / (10^(ocnr/10) * 12.5 GHz)`.
pub fn ocnr_noise_floor(spec: &CombSpec, line_power: f64) -> f64 {
    if spec.ocnr_db.is_infinite() {
        return 0.0;
    }
    line_power / (10f64.powf(spec.ocnr_db / 10.0) * OCNR_REFERENCE_BANDWIDTH)
}
