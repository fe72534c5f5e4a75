//! Carrier frequency-offset estimation and removal on symbol-rate frames.
//!
//! The estimator raises symbols to the 4th power to strip the quadrant
//! modulation. Square-QAM inputs are first partitioned by ring: only the
//! inner and outer rings carry 4-phase structure, so only those symbols
//! enter the statistic. A lag-1 correlation gives a coarse estimate inside
//! the +/- symbol_rate/8 unambiguous range; a linear fit to the unwrapped
//! 4th-power phase of segment averages refines it. Offsets beyond the
//! unambiguous range alias and are not detected.

use num_complex::Complex64;

use super::SymbolFrame;
use crate::txdsp::{Constellation, ModulationFormat};
use crate::util::linear_fit;
use crate::{Error, Result};

const MIN_SYMBOLS: usize = 10_000;
const SEGMENT_LEN: usize = 256;

/// Indices of symbols whose phase is congruent to pi/4 modulo pi/2 (all of
/// QPSK; the inner and outer rings of 16QAM on unit-power streams).
fn four_phase_selection(symbols: &[Complex64], constellation: &Constellation) -> Vec<bool> {
    match constellation.format() {
        ModulationFormat::Qpsk => vec![true; symbols.len()],
        ModulationFormat::Qam16 => {
            let radii = constellation.ring_radii();
            let lo = (radii[0] + radii[1]) / 2.0;
            let hi = (radii[1] + radii[2]) / 2.0;
            symbols
                .iter()
                .map(|s| {
                    let r = s.norm();
                    r < lo || r > hi
                })
                .collect()
        }
    }
}

/// Unit-modulus 4th powers of the selected symbols (zero where deselected).
fn fourth_powers(symbols: &[Complex64], selected: &[bool]) -> Vec<Complex64> {
    symbols
        .iter()
        .zip(selected)
        .map(|(&s, &keep)| {
            let r = s.norm();
            if keep && r > 0.0 {
                (s / r).powu(4)
            } else {
                Complex64::ZERO
            }
        })
        .collect()
}

/// Estimate the residual carrier frequency offset of a frame, in Hz, within
/// the unambiguous range of +/- symbol_rate/8.
pub fn estimate_frequency_offset(
    frame: &SymbolFrame,
    constellation: &Constellation,
) -> Result<f64> {
    if frame.len() < MIN_SYMBOLS {
        return Err(Error::InsufficientData(format!(
            "frequency estimation needs >= {MIN_SYMBOLS} symbols, got {}",
            frame.len()
        )));
    }
    let rs = frame.symbol_rate;
    let rails: Vec<(Vec<Complex64>, Vec<bool>)> = [&frame.x, &frame.y]
        .into_iter()
        .map(|rail| {
            let sel = four_phase_selection(rail, constellation);
            (fourth_powers(rail, &sel), sel)
        })
        .collect();

    // Coarse stage: lag-1 correlation of the 4th powers over pairs where
    // both symbols are selected.
    let mut r1 = Complex64::ZERO;
    for (v, sel) in &rails {
        for k in 1..v.len() {
            if sel[k] && sel[k - 1] {
                r1 += v[k] * v[k - 1].conj();
            }
        }
    }
    if r1.norm() == 0.0 {
        return Err(Error::InsufficientData("no usable symbol pairs".into()));
    }
    let coarse = r1.arg() * rs / (8.0 * std::f64::consts::PI);

    // Fine stage: remove the coarse rotation, average the 4th powers over
    // segments, unwrap the segment phases, and fit a line per polarization.
    let mut slope_acc = 0.0;
    let mut weight_acc = 0.0;
    for (v, sel) in &rails {
        let mut ks = Vec::new();
        let mut thetas = Vec::new();
        let mut seg_start = 0;
        while seg_start < v.len() {
            let seg_end = (seg_start + SEGMENT_LEN).min(v.len());
            let mut acc = Complex64::ZERO;
            let mut center = 0.0;
            let mut count = 0usize;
            for k in seg_start..seg_end {
                if sel[k] {
                    let derot = -8.0 * std::f64::consts::PI * coarse * k as f64 / rs;
                    acc += v[k] * Complex64::from_polar(1.0, derot);
                    center += k as f64;
                    count += 1;
                }
            }
            if count > 0 {
                ks.push(center / count as f64);
                thetas.push(acc.arg());
            }
            seg_start = seg_end;
        }
        if thetas.len() < 2 {
            continue;
        }
        crate::util::unwrap_phase(&mut thetas);
        let (_, slope) = linear_fit(&ks, &thetas);
        let weight = thetas.len() as f64;
        slope_acc += slope * weight;
        weight_acc += weight;
    }
    if weight_acc == 0.0 {
        return Ok(coarse);
    }
    let slope = slope_acc / weight_acc; // rad per symbol of the 4x phase
    Ok(coarse + slope * rs / (8.0 * std::f64::consts::PI))
}

/// Rotate the frame by `exp(-j 2 pi offset k / symbol_rate)` and record the
/// removed offset in the metadata.
pub fn correct_frequency_offset(frame: &SymbolFrame, offset_hz: f64) -> Result<SymbolFrame> {
    if !offset_hz.is_finite() {
        return Err(Error::InvalidArgument(format!("offset must be finite, got {offset_hz}")));
    }
    let step = -2.0 * std::f64::consts::PI * offset_hz / frame.symbol_rate;
    let rotate = |rail: &[Complex64]| -> Vec<Complex64> {
        rail.iter()
            .enumerate()
            .map(|(k, &s)| s * Complex64::from_polar(1.0, step * k as f64))
            .collect()
    };
    let mut out = SymbolFrame::new(rotate(&frame.x), rotate(&frame.y), frame.symbol_rate)?;
    out.meta = frame.meta.clone();
    out.meta.frequency_offset_hz += offset_hz;
    Ok(out)
}
