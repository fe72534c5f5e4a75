//! Band-limited rational resampling by spectral slicing.

use num_complex::Complex64;

use crate::txdsp::DualPolWaveform;
use crate::util::{fft_inplace, ifft_inplace};
use crate::{Error, Result};

/// Resample to exactly two samples per symbol by keeping the spectral band
/// `|f| < symbol_rate` of the whole record (circular convolution semantics).
///
/// The input must be sampled at or above two samples per symbol and its
/// length must map to a whole number of output samples.
pub fn resample_to_2sps(waveform: &DualPolWaveform) -> Result<DualPolWaveform> {
    waveform.validate()?;
    let fs_in = waveform.sample_rate;
    let fs_out = 2.0 * waveform.symbol_rate;
    if fs_in < fs_out * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "input sampled at {fs_in:.3e} Hz is below two samples per symbol ({fs_out:.3e} Hz)"
        )));
    }
    if (fs_in - fs_out).abs() <= 1e-9 * fs_out {
        return Ok(waveform.clone());
    }
    let n_in = waveform.len();
    let n_out_f = n_in as f64 * fs_out / fs_in;
    let n_out = n_out_f.round() as usize;
    if (n_out_f - n_out as f64).abs() > 1e-6 || n_out < 4 || n_out % 2 != 0 {
        return Err(Error::Incompatible(format!(
            "record of {n_in} samples does not divide evenly into the 2 sps grid \
             ({n_out_f} output samples)"
        )));
    }

    let gain = n_out as f64 / n_in as f64;
    let slice = |rail: &[Complex64]| -> Vec<Complex64> {
        let mut spec = rail.to_vec();
        fft_inplace(&mut spec);
        let half = n_out / 2;
        let mut out = vec![Complex64::ZERO; n_out];
        out[..half].copy_from_slice(&spec[..half]);
        out[half + 1..].copy_from_slice(&spec[n_in - half + 1..]);
        // The shared output Nyquist bin aggregates both input edge bins; the
        // signal band is strictly inside, so this only matters for noise.
        out[half] = spec[half] + spec[n_in - half];
        for v in out.iter_mut() {
            *v *= gain;
        }
        ifft_inplace(&mut out);
        out
    };
    Ok(DualPolWaveform {
        x: slice(&waveform.x),
        y: slice(&waveform.y),
        sample_rate: fs_out,
        symbol_rate: waveform.symbol_rate,
    })
}
