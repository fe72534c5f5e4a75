//! Blind 2x2 polarization demultiplexing with a constant-modulus cost.

use num_complex::Complex64;

use super::{FrameMeta, SymbolFrame};
use crate::txdsp::DualPolWaveform;
use crate::{Error, Result};

/// Constant-modulus equalizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerConfig {
    /// Taps per filter, T/2 spaced.
    pub n_taps: usize,
    /// LMS-style update gain.
    pub step_size: f64,
    /// Full passes over the record before the output pass.
    pub n_training_passes: usize,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self { n_taps: 30, step_size: 2e-4, n_training_passes: 2 }
    }
}

impl EqualizerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_taps < 2 || self.n_taps > 512 {
            return Err(Error::InvalidArgument(format!(
                "tap count {} out of range 2..=512",
                self.n_taps
            )));
        }
        if !(self.step_size > 0.0 && self.step_size < 0.1) {
            return Err(Error::InvalidArgument(format!(
                "step size must be in (0, 0.1), got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// One butterfly row: taps applied to the x and y input rails.
#[derive(Clone)]
struct Row {
    wx: Vec<Complex64>,
    wy: Vec<Complex64>,
}

impl Row {
    fn zeros(n: usize) -> Self {
        Self { wx: vec![Complex64::ZERO; n], wy: vec![Complex64::ZERO; n] }
    }

    fn output(&self, ux: &[Complex64], uy: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for i in 0..self.wx.len() {
            acc += self.wx[i] * ux[i] + self.wy[i] * uy[i];
        }
        acc
    }

    fn update(&mut self, ux: &[Complex64], uy: &[Complex64], scale: Complex64) {
        for i in 0..self.wx.len() {
            self.wx[i] += scale * ux[i].conj();
            self.wy[i] += scale * uy[i].conj();
        }
    }

    /// Normalized inner product with another row's tap vector.
    fn correlation(&self, other: &Row) -> f64 {
        let mut dot = Complex64::ZERO;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..self.wx.len() {
            dot += self.wx[i] * other.wx[i].conj() + self.wy[i] * other.wy[i].conj();
            na += self.wx[i].norm_sqr() + self.wy[i].norm_sqr();
            nb += other.wx[i].norm_sqr() + other.wy[i].norm_sqr();
        }
        if na <= 0.0 || nb <= 0.0 {
            return 1.0;
        }
        dot.norm() / (na * nb).sqrt()
    }

    /// Tap set orthogonal to `other` for a unitary 2x2 channel: time-reverse
    /// and swap the rails with conjugation.
    fn orthogonal_to(other: &Row) -> Self {
        let n = other.wx.len();
        let mut row = Row::zeros(n);
        for i in 0..n {
            row.wx[i] = -other.wy[n - 1 - i].conj();
            row.wy[i] = other.wx[n - 1 - i].conj();
        }
        row
    }
}

const COST_BLOCK: usize = 2048;
const SINGULARITY_CORRELATION: f64 = 0.9;
const MAX_REINITS: usize = 2;

/// Demultiplex the polarizations of a 2 sps waveform with a T/2-spaced 2x2
/// butterfly adapted under the unit-ring constant-modulus cost, and decimate
/// to symbol rate.
///
/// The same cost is used for every format; for constellations with several
/// rings it converges to a scaled output, so both streams are re-normalized
/// to unit mean power afterwards. A collapse of both rows onto one
/// polarization (tap correlation above 0.9) triggers an orthogonal
/// re-initialization of the second row, flagged in the frame metadata;
/// repeated collapse is an error.
pub fn cma_equalize(
    waveform: &DualPolWaveform,
    config: &EqualizerConfig,
) -> Result<SymbolFrame> {
    config.validate()?;
    waveform.validate()?;
    let fs = waveform.sample_rate;
    let rs = waveform.symbol_rate;
    if ((fs / rs) - 2.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "equalizer needs 2 samples per symbol, got {:.4}",
            fs / rs
        )));
    }
    let n_taps = config.n_taps;
    let n_in = waveform.len();
    let n_out = n_in / 2;
    let k0 = n_taps.div_ceil(2); // first symbol with a full input window
    if n_out < k0 + 10_000 {
        return Err(Error::InsufficientData(format!(
            "record of {n_out} symbols is too short for equalizer convergence"
        )));
    }

    // Normalize input so the step size is power-independent.
    let p = waveform.total_power() / 2.0;
    if p <= 0.0 {
        return Err(Error::InsufficientData("waveform has no power".into()));
    }
    let inv = 1.0 / p.sqrt();
    let ux: Vec<Complex64> = waveform.x.iter().map(|&v| v * inv).collect();
    let uy: Vec<Complex64> = waveform.y.iter().map(|&v| v * inv).collect();

    let mut row_x = Row::zeros(n_taps);
    let mut row_y = Row::zeros(n_taps);
    row_x.wx[n_taps / 2] = Complex64::ONE;
    row_y.wy[n_taps / 2] = Complex64::ONE;

    let mut cost_trace = Vec::new();
    let mut reinits = 0usize;
    let mut out_x = Vec::with_capacity(n_out - k0);
    let mut out_y = Vec::with_capacity(n_out - k0);

    for pass in 0..=config.n_training_passes {
        let emit = pass == config.n_training_passes;
        let mut cost_acc = 0.0;
        let mut cost_n = 0usize;
        for k in k0..n_out {
            let lo = 2 * k + 1 - n_taps;
            let wx = &ux[lo..lo + n_taps];
            let wy = &uy[lo..lo + n_taps];
            let zx = row_x.output(wx, wy);
            let zy = row_y.output(wx, wy);
            let ex = 1.0 - zx.norm_sqr();
            let ey = 1.0 - zy.norm_sqr();
            row_x.update(wx, wy, zx * (config.step_size * ex));
            row_y.update(wx, wy, zy * (config.step_size * ey));
            cost_acc += ex * ex + ey * ey;
            cost_n += 1;
            if cost_n == COST_BLOCK {
                cost_trace.push(cost_acc / cost_n as f64);
                cost_acc = 0.0;
                cost_n = 0;
            }
            if emit {
                out_x.push(zx);
                out_y.push(zy);
            }
        }
        if cost_n > 0 {
            cost_trace.push(cost_acc / cost_n as f64);
        }
        if row_x.correlation(&row_y) > SINGULARITY_CORRELATION {
            reinits += 1;
            if reinits > MAX_REINITS || emit {
                return Err(Error::EqualizerSingularity);
            }
            row_y = Row::orthogonal_to(&row_x);
            out_x.clear();
            out_y.clear();
        }
    }

    // Energy-normalize each stream.
    for rail in [&mut out_x, &mut out_y] {
        let p = crate::util::mean_power(rail);
        if p > 0.0 {
            let g = 1.0 / p.sqrt();
            for v in rail.iter_mut() {
                *v *= g;
            }
        }
    }

    let meta = FrameMeta {
        cma_reinitialized: reinits > 0,
        cma_cost_trace: cost_trace,
        ..FrameMeta::default()
    };
    let mut frame = SymbolFrame::new(out_x, out_y, rs)?;
    frame.meta = meta;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_polarization_rotation, load_ase_noise, JonesMatrix};
    use crate::rxdsp::resample_to_2sps;
    use crate::txdsp::{
        emulate_pdm, prbs11, shape_pulses, Constellation, ModulationFormat, PulseShape,
    };

    fn tx_symbols(format: ModulationFormat, n_symbols: usize) -> Vec<Complex64> {
        let c = Constellation::new(format);
        let bits = prbs11(0x59, n_symbols * c.bits_per_symbol()).unwrap();
        c.map_bits(&bits).unwrap()
    }

    fn two_sps(format: ModulationFormat, syms: &[Complex64], rs: f64) -> DualPolWaveform {
        let shape = PulseShape::for_format(format);
        let wf = shape_pulses(syms, &shape, rs).unwrap();
        let dual = emulate_pdm(&wf, 5.3e-9).unwrap();
        resample_to_2sps(&dual).unwrap()
    }

    /// RMS error of `got` against the reference stream, minimized over a
    /// constant phase and a window of whole-symbol cyclic delays wide enough
    /// to cover the equalizer delay and the polarization-multiplex shift.
    fn aligned_evm(got: &[Complex64], reference: &[Complex64]) -> f64 {
        let probe = got.len().min(2000);
        let n_ref = reference.len() as i64;
        let mut best = f64::INFINITY;
        for delay in -260i64..260 {
            // A constant-phase trim absorbs the arbitrary CMA output phase.
            let mut corr = Complex64::ZERO;
            for k in 0..probe {
                let refk = reference[((k as i64 + delay).rem_euclid(n_ref)) as usize];
                corr += refk * got[k].conj();
            }
            if corr.norm() == 0.0 {
                continue;
            }
            let trim = corr / corr.norm();
            let mut err = 0.0;
            for k in 0..probe {
                let refk = reference[((k as i64 + delay).rem_euclid(n_ref)) as usize];
                err += (got[k] * trim - refk).norm_sqr();
            }
            best = best.min(err / probe as f64);
        }
        best.sqrt()
    }

    #[test]
    fn identity_channel_converges_cleanly() {
        let syms = tx_symbols(ModulationFormat::Qpsk, 20000);
        let wf = two_sps(ModulationFormat::Qpsk, &syms, 40e9);
        let frame = cma_equalize(&wf, &EqualizerConfig::default()).unwrap();
        assert!(!frame.meta.cma_reinitialized);
        let p = crate::util::mean_power(&frame.x);
        assert!((p - 1.0).abs() < 0.02, "output power {p}");
        let evm = aligned_evm(&frame.x, &syms) * 100.0;
        assert!(evm < 2.0, "noiseless identity EVM {evm}%");
        let trace = &frame.meta.cma_cost_trace;
        let q = trace.len() / 4;
        let head = trace[..q].iter().sum::<f64>() / q as f64;
        let tail = trace[trace.len() - q..].iter().sum::<f64>() / q as f64;
        assert!(tail <= head + 1e-12, "cost did not decrease: head {head}, tail {tail}");
    }

    #[test]
    fn rotated_channel_recovers_both_streams() {
        let syms = tx_symbols(ModulationFormat::Qpsk, 30000);
        let wf = two_sps(ModulationFormat::Qpsk, &syms, 40e9);
        let rotated =
            apply_polarization_rotation(&wf, &JonesMatrix::rotation(45f64.to_radians()))
                .unwrap();
        let noisy = load_ase_noise(&rotated, 25.0, 31).unwrap();
        let frame = cma_equalize(&noisy, &EqualizerConfig::default()).unwrap();
        // Both outputs must carry distinct streams.
        let n = frame.len();
        let cross = frame
            .x
            .iter()
            .zip(&frame.y)
            .map(|(&a, &b)| a * b.conj())
            .sum::<Complex64>()
            .norm()
            / n as f64;
        assert!(cross < 0.05, "output cross-correlation {cross}");
        // And each must match the transmitted data (delayed copy on y).
        let evm_x = aligned_evm(&frame.x, &syms) * 100.0;
        assert!(evm_x < 25.0, "x EVM {evm_x}%");
    }

    #[test]
    fn qam16_output_is_energy_normalized() {
        let syms = tx_symbols(ModulationFormat::Qam16, 20000);
        let wf = two_sps(ModulationFormat::Qam16, &syms, 38e9);
        let frame = cma_equalize(&wf, &EqualizerConfig::default()).unwrap();
        let px = crate::util::mean_power(&frame.x);
        let py = crate::util::mean_power(&frame.y);
        assert!((px - 1.0).abs() < 0.02, "x power {px}");
        assert!((py - 1.0).abs() < 0.02, "y power {py}");
        let evm = aligned_evm(&frame.x, &syms) * 100.0;
        assert!(evm < 8.0, "16QAM noiseless EVM {evm}%");
    }

    #[test]
    fn residual_dispersion_is_absorbed() {
        use crate::channel::{apply_cd, LinkSpec, PropagationDirection};
        let syms = tx_symbols(ModulationFormat::Qpsk, 20000);
        let wf = two_sps(ModulationFormat::Qpsk, &syms, 40e9);
        // 50 ps/nm of residual dispersion.
        let link = LinkSpec {
            fiber_length_m: 50e3 / 17.0,
            dispersion_ps_nm_km: 17.0,
            reference_wavelength_m: 1550e-9,
        };
        let dispersed = apply_cd(&wf, &link, PropagationDirection::Forward).unwrap();
        let clean = cma_equalize(&wf, &EqualizerConfig::default()).unwrap();
        let resid = cma_equalize(&dispersed, &EqualizerConfig::default()).unwrap();
        let evm_clean = aligned_evm(&clean.x, &syms) * 100.0;
        let evm_resid = aligned_evm(&resid.x, &syms) * 100.0;
        assert!(
            evm_resid < evm_clean + 2.0,
            "residual-CD EVM {evm_resid}% vs clean {evm_clean}%"
        );
    }

    #[test]
    fn short_record_is_rejected() {
        let syms = tx_symbols(ModulationFormat::Qpsk, 512);
        let wf = two_sps(ModulationFormat::Qpsk, &syms, 40e9);
        assert!(matches!(
            cma_equalize(&wf, &EqualizerConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let syms = tx_symbols(ModulationFormat::Qpsk, 4096);
        let wf = two_sps(ModulationFormat::Qpsk, &syms, 40e9);
        let bad = EqualizerConfig { step_size: 0.5, ..EqualizerConfig::default() };
        assert!(cma_equalize(&wf, &bad).is_err());
    }
}
