//! Small shared numerics: FFT wrappers, least squares, seed derivation.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward FFT (unnormalized, rustfft convention).
pub fn fft_inplace(buf: &mut [Complex64]) {
    let fft = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(buf);
}

/// In-place inverse FFT, normalized by 1/N so that ifft(fft(x)) == x.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    fft.process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Baseband frequency of FFT bin `k` for an `n`-point transform at `sample_rate`.
/// Bins above n/2 map to negative frequencies.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let signed = if k <= (n_i - 1) / 2 { k } else { k - n_i };
    signed as f64 * sample_rate / n as f64
}

/// Ordinary least squares line y = a + b*x. Returns (a, b).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < f64::EPSILON * n * sxx.max(1.0) {
        return (sy / n, 0.0);
    }
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    (a, b)
}

/// Proportional fit y = s*x through the origin.
pub fn proportional_fit(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|v| v * v).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Mean of a slice; 0 for empty input.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean power (|x|^2 averaged) of a complex slice.
pub fn mean_power(v: &[Complex64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
    }
}

/// Unwrap a phase sequence in place: remove jumps larger than pi between
/// consecutive samples.
pub fn unwrap_phase(phases: &mut [f64]) {
    let mut offset = 0.0;
    let mut prev_raw = match phases.first() {
        Some(&p) => p,
        None => return,
    };
    for p in phases.iter_mut().skip(1) {
        let raw = *p;
        let mut d = raw - prev_raw;
        while d > std::f64::consts::PI {
            offset -= 2.0 * std::f64::consts::PI;
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            offset += 2.0 * std::f64::consts::PI;
            d += 2.0 * std::f64::consts::PI;
        }
        prev_raw = raw;
        *p = raw + offset;
    }
}

/// Deterministic stream-seed derivation (splitmix64 finalizer over the parts).
/// Used so that parallel execution order never changes a stream's seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = splitmix64(h.wrapping_add(splitmix64(p)));
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
