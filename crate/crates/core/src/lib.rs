//! Building blocks for simulating coherent WDM transmission on a multi-line
//! optical carrier (frequency comb).
//!
//! The crate is organized along the signal path:
//!
//! * [`phasenoise`] - laser frequency-noise models, phase-record synthesis and
//!   characterization (spectra, model fits, linewidth figures).
//! * [`comb`] - comb source description and per-line carrier generation.
//! * [`txdsp`] - bit sources, constellation mapping, pulse shaping,
//!   polarization multiplexing.
//! * [`channel`] - ASE loading, chromatic dispersion, polarization rotation,
//!   local-oscillator mixing.
//! * [`rxdsp`] - receiver chain: resampling, timing recovery, butterfly
//!   equalizer, frequency-offset estimation, carrier-phase recovery, decision.
//! * [`metrics`] - BER/EVM counting, FEC classification, rate accounting.
//!
//! All signals are complex baseband per comb line; there is no full-band
//! multi-channel field. Every stochastic operation takes an explicit seed and
//! is reproducible bit-for-bit.

pub mod channel;
pub mod comb;
pub mod metrics;
pub mod phasenoise;
pub mod rxdsp;
pub mod txdsp;

pub(crate) mod util;

pub use util::derive_seed;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Record too short for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Requested delays do not fall on the record's sample grid.
    #[error("delay grid mismatch: {0}")]
    GridMismatch(String),

    /// Spectral fit cannot be performed on the given band.
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    /// No crossing of the noise spectrum with the linewidth integration bound.
    #[error("no crossing found in [{lo:.3e}, {hi:.3e}] Hz")]
    NoCrossing { lo: f64, hi: f64 },

    /// Closed-form linewidth approximation outside its validity region.
    #[error("approximation invalid: {0}")]
    ApproximationInvalid(String),

    /// An estimator produced a value it cannot stand behind.
    #[error("unreliable estimate: {0}")]
    UnreliableEstimate(String),

    /// Sample-rate or duration mismatch between two records.
    #[error("incompatible records: {0}")]
    Incompatible(String),

    /// Timing recovery could not find a clock tone.
    #[error("timing lock failure: {0}")]
    LockFailure(String),

    /// Butterfly equalizer converged to a singular (duplicate-output) solution.
    #[error("equalizer singularity persists after re-initialization")]
    EqualizerSingularity,

    /// Bit streams could not be aligned above the correlation floor.
    #[error("alignment failure: best agreement {best_agreement:.3} below floor {floor:.3}")]
    AlignmentFailure { best_agreement: f64, floor: f64 },

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
