//! Phase-record synthesis by spectral shaping of white frequency noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FmNoiseModel, PhaseRecord};
use crate::util::{bin_frequency, fft_inplace, ifft_inplace};
use crate::{Error, Result};

/// Smallest record the synthesizer accepts; shorter records leave the shaped
/// band too sparse to mean anything.
pub const MIN_SYNTHESIS_SAMPLES: usize = 1 << 10;

/// Synthesize a phase record whose instantaneous-frequency process follows
/// the model PSD over `[1/duration, sample_rate/2]`.
///
/// White Gaussian frequency noise is shaped in the frequency domain by
/// `sqrt(S(f) / S_white_ref)` and integrated to phase; the DC bin is zeroed,
/// which truncates fluctuations slower than the record itself. The result is
/// deterministic in `seed`.
pub fn synthesize_phase(
    model: &FmNoiseModel,
    n_samples: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<PhaseRecord> {
    if n_samples < MIN_SYNTHESIS_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "synthesis needs >= {MIN_SYNTHESIS_SAMPLES} samples, got {n_samples}"
        )));
    }
    if !sample_rate.is_finite() || sample_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let dt = 1.0 / sample_rate;

    if model.is_zero() {
        return PhaseRecord::new(vec![0.0; n_samples], dt, seed);
    }

    // Unit-variance white noise has one-sided PSD 2/fs; shaping each bin by
    // sqrt(S(f) / (2/fs)) turns it into the target process.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..n_samples)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft_inplace(&mut buf);

    let white_ref = 2.0 / sample_rate;
    buf[0] = Complex64::ZERO;
    for k in 1..n_samples {
        let f = bin_frequency(k, n_samples, sample_rate).abs();
        let gain = (model.psd(f) / white_ref).sqrt();
        buf[k] *= gain;
    }
    ifft_inplace(&mut buf);

    // The shaped spectrum is Hermitian, so the imaginary parts are roundoff.
    let scale = std::f64::consts::TAU * dt;
    let mut phases = Vec::with_capacity(n_samples);
    let mut acc = 0.0;
    phases.push(0.0);
    for v in buf.iter().take(n_samples - 1) {
        acc += v.re * scale;
        phases.push(acc);
    }
    PhaseRecord::new(phases, dt, seed)
}
