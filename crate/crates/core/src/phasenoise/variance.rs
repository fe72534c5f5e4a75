//! Delay-dependent phase variance and the small-delay linewidth estimator.

use super::PhaseRecord;
use crate::util::proportional_fit;
use crate::{Error, Result};

/// Variance of the phase increment over a set of delays.
#[derive(Debug, Clone)]
pub struct PhaseVarianceCurve {
    delays: Vec<f64>,
    variances: Vec<f64>,
}

impl PhaseVarianceCurve {
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

impl PhaseRecord {
    /// Variance of `phi(t + tau) - phi(t)` for each requested delay, with the
    /// sample-mean drift removed per delay.
    ///
    /// Delays must be ascending, lie on the record's sample grid (within
    /// floating-point slack) and stay below a quarter of the record duration
    /// so that each variance still averages over plenty of independent spans.
    pub fn phase_variance(&self, delays: &[f64]) -> Result<PhaseVarianceCurve> {
        if delays.is_empty() {
            return Err(Error::InvalidArgument("no delays requested".into()));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("delays must be strictly ascending".into()));
        }
        let dt = self.sample_interval();
        let max_delay = self.duration() / 4.0;
        let phases = self.phases();
        let mut variances = Vec::with_capacity(delays.len());
        for &tau in delays {
            if !tau.is_finite() || tau < 0.0 {
                return Err(Error::GridMismatch(format!("delay {tau} is not a valid time")));
            }
            if tau >= max_delay {
                return Err(Error::GridMismatch(format!(
                    "delay {tau:.3e}s exceeds a quarter of the record duration ({max_delay:.3e}s)"
                )));
            }
            let steps = tau / dt;
            let m = steps.round();
            if (steps - m).abs() > 1e-6 * m.max(1.0) {
                return Err(Error::GridMismatch(format!(
                    "delay {tau:.6e}s is not a multiple of the sample interval {dt:.6e}s"
                )));
            }
            let m = m as usize;
            if m == 0 {
                variances.push(0.0);
                continue;
            }
            let n_pairs = phases.len() - m;
            let mut sum = 0.0;
            for i in 0..n_pairs {
                sum += phases[i + m] - phases[i];
            }
            let mu = sum / n_pairs as f64;
            let mut ss = 0.0;
            for i in 0..n_pairs {
                let d = phases[i + m] - phases[i] - mu;
                ss += d * d;
            }
            variances.push(ss / n_pairs as f64);
        }
        Ok(PhaseVarianceCurve { delays: delays.to_vec(), variances })
    }
}

/// Linewidth inferred from the small-delay limit of the variance curve.
#[derive(Debug, Clone, Copy)]
pub struct SlopeLinewidthEstimate {
    pub linewidth_hz: f64,
    /// RMS relative deviation of the fitted points from the linear law.
    pub residual_rel_rms: f64,
    /// False when the slope keeps growing with delay, i.e. the record is not
    /// in the white-noise-dominated regime and the limit has not converged.
    pub reliable: bool,
}

/// Extrapolate `sigma^2(tau) / (2 pi tau)` to `tau -> 0` by a
/// through-the-origin linear fit over the smallest delays.
///
/// Requires at least four positive delays. A non-increasing or negative-slope
/// curve is rejected outright; a curve whose local slope grows materially
/// between the first four and first eight delays is returned with
/// `reliable = false` (colored noise dominates and the limit is not trusted).
pub fn linewidth_from_variance_slope(curve: &PhaseVarianceCurve) -> Result<SlopeLinewidthEstimate> {
    let pos: Vec<(f64, f64)> = curve
        .delays()
        .iter()
        .zip(curve.variances())
        .filter(|&(&d, _)| d > 0.0)
        .map(|(&d, &v)| (d, v))
        .collect();
    if pos.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "slope fit needs >= 4 positive delays, got {}",
            pos.len()
        )));
    }
    let head = &pos[..4];
    for w in head.windows(2) {
        if w[1].1 < w[0].1 * 0.99 {
            return Err(Error::UnreliableEstimate(
                "variance curve is non-monotone over the smallest delays".into(),
            ));
        }
    }
    let (taus, vars): (Vec<f64>, Vec<f64>) = head.iter().copied().unzip();
    let slope = proportional_fit(&taus, &vars);
    if slope <= 0.0 {
        return Err(Error::UnreliableEstimate("variance slope is not positive".into()));
    }
    let linewidth_hz = slope / std::f64::consts::TAU;

    let mut ss = 0.0;
    for (t, v) in head {
        let r = (v - slope * t) / (slope * t);
        ss += r * r;
    }
    let residual_rel_rms = (ss / head.len() as f64).sqrt();

    // Convergence probe: compare against the slope over a wider delay range.
    let wide = &pos[..pos.len().min(8)];
    let (tw, vw): (Vec<f64>, Vec<f64>) = wide.iter().copied().unzip();
    let slope_wide = proportional_fit(&tw, &vw);
    let reliable = slope_wide <= slope * 1.25 && residual_rel_rms < 0.25;

    Ok(SlopeLinewidthEstimate { linewidth_hz, residual_rel_rms, reliable })
}
