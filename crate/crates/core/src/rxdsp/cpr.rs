//! Carrier phase recovery.
//!
//! Two estimators share the 4th-power phase convention: a block-wise
//! estimator that removes one constant phase per block (the classic
//! instrument-style baseline), and a per-symbol blind phase search that
//! scores a grid of test rotations over a sliding window of slicer errors.
//! Both resolve the pi/2 ambiguity only locally, by unwrapping consecutive
//! estimates; the remaining global quadrant ambiguity is left to the bit
//! aligner.

use num_complex::Complex64;

use super::SymbolFrame;
use crate::txdsp::{Constellation, ModulationFormat};
use crate::{Error, Result};

const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

/// Wrap into [-pi/4, pi/4), the fundamental interval of the 4th-power phase.
fn wrap_quarter(phi: f64) -> f64 {
    phi - FRAC_PI_2 * (phi / FRAC_PI_2).round()
}

/// Selection mask for symbols with 4-phase structure (see the frequency
/// estimator): everything for QPSK, inner and outer rings for 16QAM.
fn four_phase_mask(symbols: &[Complex64], constellation: &Constellation) -> Vec<bool> {
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

/// Remove one constant phase per block of `block_length` symbols, estimated
/// from the summed 4th powers of the ring-selected symbols in the block. No
/// tracking happens inside a block; consecutive block phases are unwrapped
/// across the pi/2 ambiguity. The recovered staircase trajectory is stored
/// in the metadata.
pub fn cpr_blockwise(
    frame: &SymbolFrame,
    constellation: &Constellation,
    block_length: usize,
) -> Result<SymbolFrame> {
    if block_length < 64 {
        return Err(Error::InvalidArgument(format!(
            "block length must be >= 64 symbols, got {block_length}"
        )));
    }
    if frame.is_empty() {
        return Err(Error::InsufficientData("empty frame".into()));
    }
    let recover = |rail: &[Complex64]| -> (Vec<Complex64>, Vec<f64>) {
        let mask = four_phase_mask(rail, constellation);
        let mut out = Vec::with_capacity(rail.len());
        let mut trajectory = Vec::with_capacity(rail.len());
        let mut prev = 0.0;
        let mut start = 0;
        while start < rail.len() {
            let end = (start + block_length).min(rail.len());
            let mut acc = Complex64::ZERO;
            for k in start..end {
                if mask[k] {
                    let r = rail[k].norm();
                    if r > 0.0 {
                        acc += (rail[k] / r).powu(4);
                    }
                }
            }
            // Ideal 4-phase points sit at odd multiples of pi/4, whose 4th
            // power points at pi; the deviation from pi is 4x the phase.
            let psi = if acc.norm() > 0.0 {
                wrap_quarter((acc.arg() - std::f64::consts::PI) / 4.0)
            } else {
                prev
            };
            let unwrapped = psi + FRAC_PI_2 * ((prev - psi) / FRAC_PI_2).round();
            let rot = Complex64::from_polar(1.0, -unwrapped);
            for k in start..end {
                out.push(rail[k] * rot);
                trajectory.push(unwrapped);
            }
            prev = unwrapped;
            start = end;
        }
        (out, trajectory)
    };
    let (x, tx) = recover(&frame.x);
    let (y, ty) = recover(&frame.y);
    let mut out = SymbolFrame::new(x, y, frame.symbol_rate)?;
    out.meta = frame.meta.clone();
    out.meta.phase_trajectory_x = Some(tx);
    out.meta.phase_trajectory_y = Some(ty);
    Ok(out)
}

/// Blind-phase-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpsConfig {
    /// Number of equidistant test phases across the ambiguity interval.
    pub n_test_phases: usize,
    /// Half of the unambiguous phase interval, degrees (pi/4 for square QAM).
    pub unambiguity_half_range_deg: f64,
    /// Sliding window length in symbols (truncated at frame edges).
    pub window_n: usize,
}

impl Default for BpsConfig {
    fn default() -> Self {
        Self { n_test_phases: 45, unambiguity_half_range_deg: 45.0, window_n: 30 }
    }
}

impl BpsConfig {
    fn validate(&self, frame_len: usize) -> Result<()> {
        if self.n_test_phases < 3 || self.n_test_phases > 64 {
            return Err(Error::InvalidArgument(format!(
                "test-phase count {} out of range 3..=64",
                self.n_test_phases
            )));
        }
        if !(self.unambiguity_half_range_deg > 0.0 && self.unambiguity_half_range_deg <= 90.0)
        {
            return Err(Error::InvalidArgument(format!(
                "half range {} degrees out of (0, 90]",
                self.unambiguity_half_range_deg
            )));
        }
        if self.window_n == 0 || self.window_n > 256 {
            return Err(Error::InvalidArgument(format!(
                "window of {} symbols out of range 1..=256",
                self.window_n
            )));
        }
        if self.window_n > frame_len {
            return Err(Error::InvalidArgument(format!(
                "window of {} symbols exceeds frame of {frame_len}",
                self.window_n
            )));
        }
        Ok(())
    }

    /// Test-phase spacing, radians.
    fn spacing(&self) -> f64 {
        2.0 * self.unambiguity_half_range_deg.to_radians() / self.n_test_phases as f64
    }

    /// Test phase for index `t`: the grid is centered so that zero is a test
    /// phase when `n_test_phases` is odd.
    fn phase(&self, t: usize) -> f64 {
        -self.unambiguity_half_range_deg.to_radians() + (t as f64 + 0.5) * self.spacing()
    }
}

const CHUNK: usize = 8192;
const TIE_TOLERANCE: f64 = 1e-9;

/// Per-symbol blind phase search.
///
/// Every symbol is scored under each test rotation by the squared distance
/// to the nearest constellation point, the scores are summed over a window
/// centered on the symbol (truncated at the frame edges), and the rotation
/// with the smallest sum wins. Ties prefer the candidate closest to the
/// previous symbol's unwrapped phase (smallest magnitude at the first
/// symbol). The per-symbol phases are unwrapped across the pi/2 ambiguity in
/// a sequential pass, the symbols are de-rotated, and the trajectory is
/// stored in the metadata.
pub fn cpr_bps(
    frame: &SymbolFrame,
    constellation: &Constellation,
    config: &BpsConfig,
) -> Result<SymbolFrame> {
    config.validate(frame.len())?;
    let n_phases = config.n_test_phases;
    let half_lo = (config.window_n - 1) / 2;
    let half_hi = config.window_n / 2;

    let recover = |rail: &[Complex64]| -> (Vec<Complex64>, Vec<f64>) {
        let n = rail.len();
        let rotors: Vec<Complex64> = (0..n_phases)
            .map(|t| Complex64::from_polar(1.0, config.phase(t)))
            .collect();
        // Per symbol: metric of the best phase and the bitmask of phases
        // tying with it.
        let mut best = vec![f64::INFINITY; n];
        let mut ties = vec![0u64; n];
        let mut dists = Vec::new();
        let mut prefix = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let margin_lo = start.saturating_sub(half_lo);
            let margin_hi = (end + half_hi).min(n);
            for (t, rot) in rotors.iter().enumerate() {
                dists.clear();
                dists.extend(
                    rail[margin_lo..margin_hi]
                        .iter()
                        .map(|&s| constellation.nearest_sq_dist(s * rot)),
                );
                prefix.clear();
                prefix.push(0.0);
                let mut acc = 0.0;
                for &d in &dists {
                    acc += d;
                    prefix.push(acc);
                }
                for k in start..end {
                    let w_lo = k.saturating_sub(half_lo).max(margin_lo) - margin_lo;
                    let w_hi = (k + half_hi + 1).min(margin_hi) - margin_lo;
                    let metric = prefix[w_hi] - prefix[w_lo];
                    let tol = TIE_TOLERANCE * (1.0 + metric.abs());
                    if metric < best[k] - tol {
                        best[k] = metric;
                        ties[k] = 1 << t;
                    } else if (metric - best[k]).abs() <= tol {
                        ties[k] |= 1 << t;
                    }
                }
            }
            start = end;
        }

        // Sequential unwrap over the per-symbol candidate sets. The carrier
        // phase estimate is the negative of the applied test rotation.
        let mut trajectory = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        let mut prev = 0.0;
        for k in 0..n {
            let mut chosen = f64::NAN;
            let mut chosen_key = (f64::INFINITY, f64::INFINITY);
            for t in 0..n_phases {
                if ties[k] & (1 << t) == 0 {
                    continue;
                }
                let psi = -config.phase(t);
                let key = if k == 0 {
                    (psi.abs(), psi)
                } else {
                    let unwrapped = psi + FRAC_PI_2 * ((prev - psi) / FRAC_PI_2).round();
                    ((unwrapped - prev).abs(), unwrapped)
                };
                if key < chosen_key {
                    chosen_key = key;
                    chosen = psi;
                }
            }
            let unwrapped = if k == 0 {
                chosen
            } else {
                chosen + FRAC_PI_2 * ((prev - chosen) / FRAC_PI_2).round()
            };
            trajectory.push(unwrapped);
            out.push(rail[k] * Complex64::from_polar(1.0, -unwrapped));
            prev = unwrapped;
        }
        (out, trajectory)
    };

    let (x, tx) = recover(&frame.x);
    let (y, ty) = recover(&frame.y);
    let mut out = SymbolFrame::new(x, y, frame.symbol_rate)?;
    out.meta = frame.meta.clone();
    out.meta.phase_trajectory_x = Some(tx);
    out.meta.phase_trajectory_y = Some(ty);
    Ok(out)
}

/// Remove the constant residual phase a grid-based recovery leaves behind:
/// per polarization, rotate by the decision-directed maximum-likelihood
/// estimate `arg(sum s * conj(decision(s)))`. With correct decisions this
/// cancels a constant offset exactly, so a test-phase grid's quantization
/// step no longer bounds the output accuracy.
pub fn refine_phase_dd(frame: &SymbolFrame, constellation: &Constellation) -> Result<SymbolFrame> {
    if frame.is_empty() {
        return Err(Error::InsufficientData("empty frame".into()));
    }
    let refine = |rail: &[Complex64]| -> Vec<Complex64> {
        let acc: Complex64 = rail
            .iter()
            .map(|&s| s * constellation.points()[constellation.decide(s)].conj())
            .sum();
        if acc.norm_sqr() == 0.0 {
            return rail.to_vec();
        }
        let back = Complex64::from_polar(1.0, -acc.arg());
        rail.iter().map(|&s| s * back).collect()
    };
    let mut out = SymbolFrame::new(refine(&frame.x), refine(&frame.y), frame.symbol_rate)?;
    out.meta = frame.meta.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdsp::prbs11;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn clean_frame(format: ModulationFormat, n: usize, seed_taps: u16) -> SymbolFrame {
        let c = Constellation::new(format);
        let bits = prbs11(seed_taps, n * c.bits_per_symbol()).unwrap();
        let syms = c.map_bits(&bits).unwrap();
        SymbolFrame::new(syms.clone(), syms, 38e9).unwrap()
    }

    fn rotate_frame(frame: &SymbolFrame, phi: f64) -> SymbolFrame {
        let rot = Complex64::from_polar(1.0, phi);
        let mut out = frame.clone();
        for v in out.x.iter_mut().chain(out.y.iter_mut()) {
            *v *= rot;
        }
        out
    }

    fn max_error(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(&u, &v)| (u - v).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn blockwise_recovers_constant_offset_exactly() {
        for format in [ModulationFormat::Qpsk, ModulationFormat::Qam16] {
            let frame = clean_frame(format, 4096, 0x71);
            let rotated = rotate_frame(&frame, 20f64.to_radians());
            let c = Constellation::new(format);
            let out = cpr_blockwise(&rotated, &c, 1024).unwrap();
            let err = max_error(&out.x, &frame.x);
            assert!(err < 1e-9, "{format}: residual {err}");
            let traj = out.meta.phase_trajectory_x.unwrap();
            assert!((traj[0] - 20f64.to_radians()).abs() < 1e-9);
        }
    }

    #[test]
    fn blockwise_residual_on_ramp_matches_constant_fit() {
        let n = 8192;
        let block = 1024;
        let frame = clean_frame(ModulationFormat::Qpsk, n, 0x5d);
        let drift_per_block = 10f64.to_radians();
        let mut ramped = frame.clone();
        for (k, v) in ramped.x.iter_mut().enumerate() {
            let phi = drift_per_block * k as f64 / block as f64;
            *v *= Complex64::from_polar(1.0, phi);
        }
        for (k, v) in ramped.y.iter_mut().enumerate() {
            let phi = drift_per_block * k as f64 / block as f64;
            *v *= Complex64::from_polar(1.0, phi);
        }
        let c = Constellation::qpsk();
        let out = cpr_blockwise(&ramped, &c, block).unwrap();
        let mut acc = 0.0;
        for (got, want) in out.x.iter().zip(&frame.x) {
            let e = (got * want.conj()).arg();
            acc += e * e;
        }
        let rms = (acc / n as f64).sqrt();
        let expected = drift_per_block / 12f64.sqrt();
        assert!(
            (rms - expected).abs() < 0.2 * expected,
            "residual RMS {rms} vs constant-fit prediction {expected}"
        );
    }

    #[test]
    fn blockwise_rejects_tiny_blocks() {
        let frame = clean_frame(ModulationFormat::Qpsk, 512, 0x11);
        let c = Constellation::qpsk();
        assert!(cpr_blockwise(&frame, &c, 32).is_err());
    }

    #[test]
    fn bps_zero_rotation_is_identity() {
        let frame = clean_frame(ModulationFormat::Qpsk, 512, 0x2c);
        let c = Constellation::qpsk();
        let out = cpr_bps(&frame, &c, &BpsConfig::default()).unwrap();
        assert!(max_error(&out.x, &frame.x) < 1e-12);
        assert!(out.meta.phase_trajectory_x.unwrap().iter().all(|&p| p.abs() < 1e-12));
    }

    #[test]
    fn bps_constant_offset_residual_bounded_by_half_step() {
        let frame = clean_frame(ModulationFormat::Qpsk, 256, 0x33);
        let c = Constellation::qpsk();
        let config = BpsConfig { window_n: 1, ..BpsConfig::default() };
        // Scan offsets across the unambiguous interval, including points
        // exactly between two test phases.
        for offset_deg in [-41.0f64, -20.5, -1.0, 0.7, 10.0, 20.0, 21.0, 33.3, 44.0] {
            let rotated = rotate_frame(&frame, offset_deg.to_radians());
            let out = cpr_bps(&rotated, &c, &config).unwrap();
            let traj = out.meta.phase_trajectory_x.unwrap();
            for &p in &traj {
                let err = (p - offset_deg.to_radians()).abs();
                assert!(
                    err <= 1f64.to_radians() + 1e-9,
                    "offset {offset_deg} deg: trajectory error {} deg",
                    err.to_degrees()
                );
            }
        }
    }

    #[test]
    fn bps_tie_at_first_symbol_prefers_smaller_magnitude() {
        let frame = clean_frame(ModulationFormat::Qpsk, 64, 0x7f);
        let c = Constellation::qpsk();
        let config = BpsConfig { window_n: 1, ..BpsConfig::default() };
        // 21 degrees sits exactly between the 20 and 22 degree test phases.
        let out = cpr_bps(&rotate_frame(&frame, 21f64.to_radians()), &c, &config).unwrap();
        let traj = out.meta.phase_trajectory_x.unwrap();
        assert!((traj[0] - 20f64.to_radians()).abs() < 1e-9);
        // And later symbols stick with the earlier decision.
        assert!((traj[32] - 20f64.to_radians()).abs() < 1e-9);
    }

    #[test]
    fn bps_output_commutes_with_quadrant_rotation() {
        let frame = clean_frame(ModulationFormat::Qam16, 1024, 0x155);
        let c = Constellation::qam16();
        let base = cpr_bps(&rotate_frame(&frame, 0.15), &c, &BpsConfig::default()).unwrap();
        let turned =
            cpr_bps(&rotate_frame(&frame, 0.15 + FRAC_PI_2), &c, &BpsConfig::default())
                .unwrap();
        let matched = (0..4).any(|m| {
            let rot = Complex64::i().powu(m);
            max_error(
                &turned.x.iter().map(|&v| v * rot).collect::<Vec<_>>(),
                &base.x,
            ) < 1e-9
        });
        assert!(matched, "90 degree input rotation must map to a quadrant ambiguity");
    }

    #[test]
    fn bps_window_averaging_reduces_trajectory_variance() {
        let n = 4096;
        let frame = clean_frame(ModulationFormat::Qpsk, n, 0x69);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut noisy = rotate_frame(&frame, 10f64.to_radians());
        let sigma = 0.15;
        for v in noisy.x.iter_mut().chain(noisy.y.iter_mut()) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sigma / 2f64.sqrt();
        }
        let c = Constellation::qpsk();
        let mut variances = Vec::new();
        for window_n in [4usize, 16, 64] {
            let config = BpsConfig { window_n, ..BpsConfig::default() };
            let out = cpr_bps(&noisy, &c, &config).unwrap();
            let traj = out.meta.phase_trajectory_x.unwrap();
            let mean = traj.iter().sum::<f64>() / traj.len() as f64;
            let var =
                traj.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / traj.len() as f64;
            variances.push(var);
        }
        assert!(
            variances[0] > variances[1] && variances[1] > variances[2],
            "variances {variances:?} must decrease with window length"
        );
    }

    #[test]
    fn bps_window_must_fit_frame() {
        let frame = clean_frame(ModulationFormat::Qpsk, 64, 0x2c);
        let c = Constellation::qpsk();
        let config = BpsConfig { window_n: 65, ..BpsConfig::default() };
        assert!(matches!(cpr_bps(&frame, &c, &config), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bps_16qam_middle_ring_contributes_to_metric() {
        // A pure middle-ring frame still locks: the metric uses slicer
        // distances, not ring partitions.
        let c = Constellation::qam16();
        let ring: Vec<Complex64> = (0..512)
            .map(|k| {
                let pts = c.points();
                // indices of middle-ring points (|p|^2 = 1.0): bit patterns
                // with exactly one of the two axes at +/-3.
                let mids: [usize; 8] =
                    [0b0001, 0b0011, 0b1001, 0b1011, 0b0100, 0b0110, 0b1100, 0b1110];
                pts[mids[k % 8]]
            })
            .collect();
        let frame = SymbolFrame::new(ring.clone(), ring, 38e9).unwrap();
        let rotated = rotate_frame(&frame, 5f64.to_radians());
        let out = cpr_bps(&rotated, &c, &BpsConfig::default()).unwrap();
        let traj = out.meta.phase_trajectory_x.unwrap();
        assert!((traj[200] - 5f64.to_radians()).abs() < 2f64.to_radians());
    }

    #[test]
    fn dd_refinement_cancels_a_constant_offset_exactly() {
        let c = Constellation::qam16();
        let frame = clean_frame(ModulationFormat::Qam16, 2000, 0x57);
        let rotated = rotate_frame(&frame, 1.3f64.to_radians());
        let out = refine_phase_dd(&rotated, &c).unwrap();
        assert!(max_error(&out.x, &frame.x) < 1e-9);
        assert!(max_error(&out.y, &frame.y) < 1e-9);
    }

    #[test]
    fn dd_refinement_beats_the_grid_step_after_phase_search() {
        let c = Constellation::qpsk();
        let frame = clean_frame(ModulationFormat::Qpsk, 4096, 0x133);
        // An offset straddling two test phases leaves ~1 degree after the
        // grid search; the refinement removes it.
        let rotated = rotate_frame(&frame, 21.0f64.to_radians());
        let coarse = cpr_bps(&rotated, &c, &BpsConfig::default()).unwrap();
        let residual_before = max_error(&coarse.x, &frame.x);
        let fine = refine_phase_dd(&coarse, &c).unwrap();
        let residual_after = max_error(&fine.x, &frame.x);
        assert!(residual_before > 1e-3, "expected a quantization residual");
        assert!(residual_after < 1e-9, "residual {residual_after}");
    }

    #[test]
    fn dd_refinement_handles_rails_independently() {
        let c = Constellation::qpsk();
        let frame = clean_frame(ModulationFormat::Qpsk, 1024, 0x2a1);
        let mut rotated = frame.clone();
        let rx = Complex64::from_polar(1.0, 0.02);
        let ry = Complex64::from_polar(1.0, -0.015);
        for v in rotated.x.iter_mut() {
            *v *= rx;
        }
        for v in rotated.y.iter_mut() {
            *v *= ry;
        }
        let out = refine_phase_dd(&rotated, &c).unwrap();
        assert!(max_error(&out.x, &frame.x) < 1e-9);
        assert!(max_error(&out.y, &frame.y) < 1e-9);
    }
}
