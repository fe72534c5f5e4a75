//! Three-coefficient FM-noise model fit.

use super::spectrum::log_band_averages;
use super::{FmNoiseModel, FmSpectrum};
use crate::{Error, Result};

/// Log-band resolution used to condition the fit. Each band enters with unit
/// weight, which makes every decade count the same regardless of how many
/// raw FFT bins fall into it.
const FIT_BINS_PER_DECADE: usize = 20;
/// Minimum number of usable log bands.
const MIN_FIT_BANDS: usize = 6;

/// Fit of [`FmNoiseModel`] to a spectrum, with the relative residual left
/// after the fit and the band actually used.
#[derive(Debug, Clone)]
pub struct FmModelFit {
    pub model: FmNoiseModel,
    /// RMS of (data - model)/data over the fitted log bands.
    pub residual_rms: f64,
    pub band_hz: (f64, f64),
}

/// Fit `white + flicker/f + random_walk/f^2` to the spectrum restricted to
/// `band`, by non-negative least squares over ~20 log-spaced band averages
/// per decade, each weighted by its inverse level (relative error).
///
/// The band must span at least one decade inside the spectrum's support;
/// narrower requests are rejected as degenerate. Coefficients come back
/// non-negative by construction.
pub fn fit_fm_model(spectrum: &FmSpectrum, band: (f64, f64)) -> Result<FmModelFit> {
    let (req_lo, req_hi) = band;
    if !(req_lo.is_finite() && req_hi.is_finite()) || req_lo <= 0.0 || req_hi <= req_lo {
        return Err(Error::InvalidArgument(format!(
            "fit band must satisfy 0 < lo < hi, got ({req_lo}, {req_hi})"
        )));
    }
    let f = spectrum.frequencies();
    let lo = req_lo.max(f[0]);
    let hi = req_hi.min(f[f.len() - 1]);
    if hi <= lo || (hi / lo) < 10.0 {
        return Err(Error::FitDegenerate(format!(
            "usable band ({lo:.3e}, {hi:.3e}) Hz spans less than one decade"
        )));
    }

    let bands = log_band_averages(spectrum, lo, hi, FIT_BINS_PER_DECADE);
    let usable: Vec<(f64, f64)> = bands.iter().copied().filter(|&(_, p)| p > 0.0).collect();
    if usable.is_empty() && bands.len() >= MIN_FIT_BANDS {
        // An identically-zero spectrum is legitimately fit by the zero model.
        return Ok(FmModelFit { model: FmNoiseModel::zero(), residual_rms: 0.0, band_hz: (lo, hi) });
    }
    if usable.len() < MIN_FIT_BANDS {
        return Err(Error::FitDegenerate(format!(
            "only {} usable band averages in ({lo:.3e}, {hi:.3e}) Hz",
            usable.len()
        )));
    }

    // Rows (1, 1/f, 1/f^2) / P approximate the all-ones target: relative error
    // least squares, linear in the coefficients.
    let m = usable.len();
    let mut a = vec![[0.0f64; 3]; m];
    for (row, &(fc, p)) in a.iter_mut().zip(&usable) {
        *row = [1.0 / p, 1.0 / (fc * p), 1.0 / (fc * fc * p)];
    }

    // Column equilibration keeps the normal equations well scaled across the
    // ~10 decades separating the three columns.
    let mut col_scale = [0.0f64; 3];
    for j in 0..3 {
        let rms = (a.iter().map(|r| r[j] * r[j]).sum::<f64>() / m as f64).sqrt();
        col_scale[j] = if rms > 0.0 { rms } else { 1.0 };
        for row in a.iter_mut() {
            row[j] /= col_scale[j];
        }
    }

    let x = nnls3(&a);
    let model = FmNoiseModel::new(
        x[0] / col_scale[0],
        x[1] / col_scale[1],
        x[2] / col_scale[2],
    )?;

    let mut ss = 0.0;
    for &(fc, p) in &usable {
        let r = (p - model.psd(fc)) / p;
        ss += r * r;
    }
    let residual_rms = (ss / m as f64).sqrt();
    Ok(FmModelFit { model, residual_rms, band_hz: (lo, hi) })
}

/// Non-negative least squares for `A x ~ 1` with three unknowns: enumerate
/// the eight active sets, solve each unconstrained subproblem, keep the
/// feasible one with the smallest residual.
fn nnls3(a: &[[f64; 3]]) -> [f64; 3] {
    let mut best = [0.0f64; 3];
    let mut best_res = residual3(a, &best);
    for mask in 1u8..8 {
        let idx: Vec<usize> = (0..3).filter(|j| mask & (1 << j) != 0).collect();
        if let Some(sol) = solve_subset(a, &idx) {
            if sol.iter().all(|&v| v >= 0.0) {
                let mut x = [0.0f64; 3];
                for (&j, &v) in idx.iter().zip(&sol) {
                    x[j] = v;
                }
                let r = residual3(a, &x);
                if r < best_res {
                    best_res = r;
                    best = x;
                }
            }
        }
    }
    best
}

fn residual3(a: &[[f64; 3]], x: &[f64; 3]) -> f64 {
    a.iter()
        .map(|row| {
            let y = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] - 1.0;
            y * y
        })
        .sum()
}

/// Least squares on the selected columns via normal equations (<= 3x3),
/// Gaussian elimination with partial pivoting. None if singular.
fn solve_subset(a: &[[f64; 3]], idx: &[usize]) -> Option<Vec<f64>> {
    let k = idx.len();
    let mut ata = vec![vec![0.0f64; k]; k];
    let mut atb = vec![0.0f64; k];
    for row in a {
        for (p, &jp) in idx.iter().enumerate() {
            atb[p] += row[jp];
            for (q, &jq) in idx.iter().enumerate() {
                ata[p][q] += row[jp] * row[jq];
            }
        }
    }
    // Augment and eliminate.
    for p in 0..k {
        let (pivot_row, pivot) = (p..k)
            .map(|r| (r, ata[r][p].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pivot <= 1e-300 {
            return None;
        }
        ata.swap(p, pivot_row);
        atb.swap(p, pivot_row);
        for r in p + 1..k {
            let factor = ata[r][p] / ata[p][p];
            for c in p..k {
                ata[r][c] -= factor * ata[p][c];
            }
            atb[r] -= factor * atb[p];
        }
    }
    let mut x = vec![0.0f64; k];
    for p in (0..k).rev() {
        let mut acc = atb[p];
        for c in p + 1..k {
            acc -= ata[p][c] * x[c];
        }
        if ata[p][p].abs() <= 1e-300 {
            return None;
        }
        x[p] = acc / ata[p][p];
    }
    Some(x)
}
