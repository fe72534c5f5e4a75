//! FM-noise spectrum estimation (segment-averaged periodogram) and smoothing.

use num_complex::Complex64;

use super::{FmSpectrum, PhaseRecord};
use crate::util::{fft_inplace, mean};
use crate::{Error, Result};

/// Minimum number of averaging segments the estimator insists on.
const MIN_SEGMENTS: usize = 8;
/// Smallest segment length considered meaningful.
const MIN_SEGMENT_LEN: usize = 256;

/// Spectrum smoothing policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingPolicy {
    /// Moving average over a constant relative bandwidth, output on the input
    /// grid. `decades` is the full window width in decades.
    RelativeBandwidth { decades: f64 },
    /// Average into log-spaced bins; output on a decimated geometric grid.
    LogBins { bins_per_decade: usize },
}

impl Default for SmoothingPolicy {
    fn default() -> Self {
        SmoothingPolicy::RelativeBandwidth { decades: 0.1 }
    }
}

impl PhaseRecord {
    /// One-sided PSD of the instantaneous-frequency process, from a
    /// Hann-windowed, mean-detrended, 50%-overlapped segment average.
    ///
    /// Segments are the largest power of two allowing at least 8 averages;
    /// records too short for that are rejected. The band integral of the
    /// returned spectrum matches the sample variance of the frequency series
    /// to within a few percent (windowing residue).
    pub fn estimate_fm_spectrum(&self) -> Result<FmSpectrum> {
        let f_inst = self.instantaneous_frequency();
        let n = f_inst.len();
        let fs = self.sample_rate();

        // Largest power-of-two segment with >= MIN_SEGMENTS half-overlapped copies.
        let max_len = 2 * n / (MIN_SEGMENTS + 1);
        if max_len < MIN_SEGMENT_LEN {
            return Err(Error::InsufficientData(format!(
                "record of {n} frequency samples cannot supply {MIN_SEGMENTS} segments of >= {MIN_SEGMENT_LEN}"
            )));
        }
        let seg_len = 1usize << max_len.ilog2();
        let hop = seg_len / 2;
        let n_segments = (n - seg_len) / hop + 1;
        debug_assert!(n_segments >= MIN_SEGMENTS);

        let window: Vec<f64> = (0..seg_len)
            .map(|j| 0.5 * (1.0 - (std::f64::consts::TAU * j as f64 / seg_len as f64).cos()))
            .collect();
        let window_power: f64 = window.iter().map(|w| w * w).sum();

        let mut accum = vec![0.0f64; seg_len / 2 + 1];
        let mut buf = vec![Complex64::ZERO; seg_len];
        for s in 0..n_segments {
            let seg = &f_inst[s * hop..s * hop + seg_len];
            let mu = mean(seg);
            for (b, (&x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
                *b = Complex64::new((x - mu) * w, 0.0);
            }
            fft_inplace(&mut buf);
            for (a, v) in accum.iter_mut().zip(buf.iter().take(seg_len / 2 + 1)) {
                *a += v.norm_sqr();
            }
        }

        // One-sided normalization; the Nyquist bin has no mirror image.
        let scale = 1.0 / (fs * window_power * n_segments as f64);
        let mut frequencies = Vec::with_capacity(seg_len / 2);
        let mut psd = Vec::with_capacity(seg_len / 2);
        for k in 1..=seg_len / 2 {
            let one_sided = if k == seg_len / 2 { 1.0 } else { 2.0 };
            frequencies.push(k as f64 * fs / seg_len as f64);
            psd.push(accum[k] * one_sided * scale);
        }
        FmSpectrum::new(frequencies, psd)
    }
}

impl FmSpectrum {
    /// Smoothed copy of the spectrum; see [`SmoothingPolicy`].
    pub fn smoothed(&self, policy: SmoothingPolicy) -> Result<FmSpectrum> {
        match policy {
            SmoothingPolicy::RelativeBandwidth { decades } => {
                if !decades.is_finite() || decades <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "window width must be positive, got {decades} decades"
                    )));
                }
                let half = 10f64.powf(decades / 2.0);
                let f = self.frequencies();
                let p = self.psd();
                let mut out = Vec::with_capacity(p.len());
                let (mut lo, mut hi) = (0usize, 0usize);
                for i in 0..f.len() {
                    let (fl, fh) = (f[i] / half, f[i] * half);
                    while f[lo] < fl {
                        lo += 1;
                    }
                    if hi < lo {
                        hi = lo;
                    }
                    while hi + 1 < f.len() && f[hi + 1] <= fh {
                        hi += 1;
                    }
                    let count = (hi - lo + 1) as f64;
                    out.push(p[lo..=hi].iter().sum::<f64>() / count);
                }
                FmSpectrum::new(f.to_vec(), out)
            }
            SmoothingPolicy::LogBins { bins_per_decade } => {
                if bins_per_decade == 0 {
                    return Err(Error::InvalidArgument("bins_per_decade must be >= 1".into()));
                }
                let binned = log_band_averages(self, self.frequencies()[0], *self.frequencies().last().unwrap(), bins_per_decade);
                let (freqs, psd): (Vec<f64>, Vec<f64>) = binned.into_iter().unzip();
                FmSpectrum::new(freqs, psd)
            }
        }
    }
}

/// Average the spectrum into geometric bins covering `[lo, hi]`.
/// Returns (geometric-center frequency, mean PSD) for each non-empty bin.
pub(super) fn log_band_averages(
    spec: &FmSpectrum,
    lo: f64,
    hi: f64,
    bins_per_decade: usize,
) -> Vec<(f64, f64)> {
    let ratio = 10f64.powf(1.0 / bins_per_decade as f64);
    let mut out = Vec::new();
    let f = spec.frequencies();
    let p = spec.psd();
    let mut edge = lo;
    let mut i = f.partition_point(|&v| v < lo);
    while edge < hi && i < f.len() {
        let next = (edge * ratio).min(hi * (1.0 + 1e-12));
        let mut sum = 0.0;
        let mut count = 0usize;
        while i < f.len() && f[i] < next {
            if f[i] >= edge {
                sum += p[i];
                count += 1;
            }
            i += 1;
        }
        if count > 0 {
            out.push(((edge * next).sqrt(), sum / count as f64));
        }
        edge = next;
    }
    out
}
