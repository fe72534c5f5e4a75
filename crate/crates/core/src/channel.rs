//! Link impairments and the coherent front end: chromatic dispersion, ASE
//! loading to a target OSNR, polarization rotation, and mixing with a local
//! oscillator.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::phasenoise::PhaseRecord;
use crate::txdsp::DualPolWaveform;
use crate::util::{bin_frequency, fft_inplace, ifft_inplace};
use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference bandwidth for OSNR figures, Hz.
pub const OSNR_REFERENCE_BANDWIDTH: f64 = 12.5e9;

/// Dispersive fiber span parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub fiber_length_m: f64,
    /// Dispersion parameter in the customary ps/(nm km).
    pub dispersion_ps_nm_km: f64,
    /// Wavelength at which the dispersion parameter is quoted.
    pub reference_wavelength_m: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            fiber_length_m: 75e3,
            dispersion_ps_nm_km: 17.0,
            reference_wavelength_m: 1550e-9,
        }
    }
}

impl LinkSpec {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fiber_length_m", self.fiber_length_m),
            ("dispersion_ps_nm_km", self.dispersion_ps_nm_km),
            ("reference_wavelength_m", self.reference_wavelength_m),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if self.fiber_length_m < 0.0 {
            return Err(Error::InvalidArgument("fiber length must be >= 0".into()));
        }
        if self.reference_wavelength_m <= 0.0 {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Dispersion parameter in SI units (s/m^2).
    pub fn dispersion_si(&self) -> f64 {
        self.dispersion_ps_nm_km * 1e-6
    }

    /// Difference in group delay between two frequencies `span_hz` apart.
    pub fn group_delay_spread(&self, span_hz: f64) -> f64 {
        let lambda = self.reference_wavelength_m;
        lambda * lambda * self.dispersion_si() * self.fiber_length_m * span_hz.abs()
            / SPEED_OF_LIGHT
    }
}

/// Direction of the all-pass dispersion filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationDirection {
    /// Accumulate fiber dispersion.
    Forward,
    /// Undo previously accumulated dispersion.
    Inverse,
}

/// Apply the all-pass chromatic-dispersion response
/// `exp(+/- j * pi * lambda^2 * D * L * f^2 / c)` to both polarizations
/// (plus sign in the forward direction).
pub fn apply_cd(
    waveform: &DualPolWaveform,
    link: &LinkSpec,
    direction: PropagationDirection,
) -> Result<DualPolWaveform> {
    waveform.validate()?;
    link.validate()?;
    let n = waveform.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty waveform".into()));
    }
    let sign = match direction {
        PropagationDirection::Forward => 1.0,
        PropagationDirection::Inverse => -1.0,
    };
    let lambda = link.reference_wavelength_m;
    let coeff = sign * std::f64::consts::PI * lambda * lambda * link.dispersion_si()
        * link.fiber_length_m
        / SPEED_OF_LIGHT;
    let mut response = Vec::with_capacity(n);
    for k in 0..n {
        let f = bin_frequency(k, n, waveform.sample_rate);
        response.push(Complex64::from_polar(1.0, coeff * f * f));
    }
    let filter = |rail: &[Complex64]| -> Vec<Complex64> {
        let mut buf = rail.to_vec();
        fft_inplace(&mut buf);
        for (v, h) in buf.iter_mut().zip(&response) {
            *v *= h;
        }
        ifft_inplace(&mut buf);
        buf
    };
    Ok(DualPolWaveform {
        x: filter(&waveform.x),
        y: filter(&waveform.y),
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    })
}

/// Add circular complex Gaussian noise with total two-polarization power
/// spectral density `psd_w_per_hz` (flat across the simulation bandwidth).
pub fn add_noise_psd(
    waveform: &DualPolWaveform,
    psd_w_per_hz: f64,
    seed: u64,
) -> Result<DualPolWaveform> {
    waveform.validate()?;
    if !(psd_w_per_hz.is_finite() && psd_w_per_hz >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise PSD must be >= 0, got {psd_w_per_hz}"
        )));
    }
    if psd_w_per_hz == 0.0 {
        return Ok(waveform.clone());
    }
    // Total noise power over both rails is psd * fs, split evenly, and each
    // complex sample splits its variance across the two quadratures.
    let sigma_quadrature = (psd_w_per_hz * waveform.sample_rate / 4.0).sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut perturb = |rail: &[Complex64]| -> Vec<Complex64> {
        rail.iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                s + Complex64::new(re, im) * sigma_quadrature
            })
            .collect()
    };
    let x = perturb(&waveform.x);
    let y = perturb(&waveform.y);
    Ok(DualPolWaveform {
        x,
        y,
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    })
}

/// Load ASE noise so the waveform reaches `osnr_db`, with OSNR defined as
/// total two-polarization signal power over the noise power in 12.5 GHz
/// (also summed over both polarizations).
pub fn load_ase_noise(
    waveform: &DualPolWaveform,
    osnr_db: f64,
    seed: u64,
) -> Result<DualPolWaveform> {
    if !osnr_db.is_finite() {
        if osnr_db == f64::INFINITY {
            return Ok(waveform.clone());
        }
        return Err(Error::InvalidArgument(format!("OSNR must be finite, got {osnr_db}")));
    }
    let p_total = waveform.total_power();
    if p_total <= 0.0 {
        return Err(Error::InsufficientData("waveform has no power".into()));
    }
    let osnr = 10f64.powf(osnr_db / 10.0);
    add_noise_psd(waveform, p_total / (osnr * OSNR_REFERENCE_BANDWIDTH), seed)
}

/// Estimate OSNR (dB) of `noisy` against the clean reference it was derived
/// from, using the 12.5 GHz convention of [`load_ase_noise`].
pub fn measure_osnr(noisy: &DualPolWaveform, clean: &DualPolWaveform) -> Result<f64> {
    noisy.validate()?;
    clean.validate()?;
    if noisy.len() != clean.len() {
        return Err(Error::Incompatible(format!(
            "length mismatch: {} vs {}",
            noisy.len(),
            clean.len()
        )));
    }
    if (noisy.sample_rate - clean.sample_rate).abs() > 1e-6 * clean.sample_rate {
        return Err(Error::Incompatible("sample rates differ".into()));
    }
    let diff_power = |a: &[Complex64], b: &[Complex64]| -> f64 {
        a.iter().zip(b).map(|(&u, &v)| (u - v).norm_sqr()).sum::<f64>() / a.len() as f64
    };
    let p_noise = diff_power(&noisy.x, &clean.x) + diff_power(&noisy.y, &clean.y);
    if p_noise <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let p_signal = clean.total_power();
    let osnr = p_signal * clean.sample_rate / (p_noise * OSNR_REFERENCE_BANDWIDTH);
    Ok(10.0 * osnr.log10())
}

/// Unitary 2x2 Jones matrix acting on the polarization rails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub xx: Complex64,
    pub xy: Complex64,
    pub yx: Complex64,
    pub yy: Complex64,
}

impl JonesMatrix {
    /// Build from elements, rejecting matrices that are not unitary to 1e-6.
    pub fn new(xx: Complex64, xy: Complex64, yx: Complex64, yy: Complex64) -> Result<Self> {
        let j = Self { xx, xy, yx, yy };
        if !j.is_unitary(1e-6) {
            return Err(Error::InvalidArgument("Jones matrix must be unitary".into()));
        }
        Ok(j)
    }

    pub fn identity() -> Self {
        Self {
            xx: Complex64::ONE,
            xy: Complex64::ZERO,
            yx: Complex64::ZERO,
            yy: Complex64::ONE,
        }
    }

    /// Real rotation of the polarization axes by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            xx: Complex64::new(c, 0.0),
            xy: Complex64::new(s, 0.0),
            yx: Complex64::new(-s, 0.0),
            yy: Complex64::new(c, 0.0),
        }
    }

    /// Check J * J^H = I within `tol` elementwise.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let a = self.xx * self.xx.conj() + self.xy * self.xy.conj();
        let b = self.xx * self.yx.conj() + self.xy * self.yy.conj();
        let c = self.yx * self.xx.conj() + self.yy * self.xy.conj();
        let d = self.yx * self.yx.conj() + self.yy * self.yy.conj();
        (a - Complex64::ONE).norm() <= tol
            && b.norm() <= tol
            && c.norm() <= tol
            && (d - Complex64::ONE).norm() <= tol
    }

    /// Inverse of a unitary matrix (conjugate transpose).
    pub fn inverse(&self) -> Self {
        Self {
            xx: self.xx.conj(),
            xy: self.yx.conj(),
            yx: self.xy.conj(),
            yy: self.yy.conj(),
        }
    }
}

/// Mix the polarization rails through a Jones matrix.
pub fn apply_polarization_rotation(
    waveform: &DualPolWaveform,
    jones: &JonesMatrix,
) -> Result<DualPolWaveform> {
    waveform.validate()?;
    if !jones.is_unitary(1e-6) {
        return Err(Error::InvalidArgument("Jones matrix must be unitary".into()));
    }
    let mut x = Vec::with_capacity(waveform.len());
    let mut y = Vec::with_capacity(waveform.len());
    for (&ex, &ey) in waveform.x.iter().zip(&waveform.y) {
        x.push(jones.xx * ex + jones.xy * ey);
        y.push(jones.yx * ex + jones.yy * ey);
    }
    Ok(DualPolWaveform {
        x,
        y,
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    })
}

/// Mix with the local oscillator: multiply both rails by
/// `exp(-j * (2 pi frequency_offset t + lo_phase(t)))`.
///
/// The LO phase record must match the waveform's sample rate and cover its
/// length. A zero-phase record with zero offset is the ideal intradyne case.
pub fn coherent_receive(
    waveform: &DualPolWaveform,
    lo_phase: &PhaseRecord,
    frequency_offset_hz: f64,
) -> Result<DualPolWaveform> {
    waveform.validate()?;
    if !frequency_offset_hz.is_finite() {
        return Err(Error::InvalidArgument("frequency offset must be finite".into()));
    }
    let rate_err =
        (lo_phase.sample_rate() - waveform.sample_rate).abs() / waveform.sample_rate;
    if rate_err > 1e-9 {
        return Err(Error::Incompatible(format!(
            "LO sampled at {:.6e} Hz but waveform at {:.6e} Hz",
            lo_phase.sample_rate(),
            waveform.sample_rate
        )));
    }
    if lo_phase.len() < waveform.len() {
        return Err(Error::Incompatible(format!(
            "LO record has {} samples, waveform needs {}",
            lo_phase.len(),
            waveform.len()
        )));
    }
    let dt = 1.0 / waveform.sample_rate;
    let mix: Vec<Complex64> = (0..waveform.len())
        .map(|k| {
            let phase = 2.0 * std::f64::consts::PI * frequency_offset_hz * k as f64 * dt
                + lo_phase.phases()[k];
            Complex64::from_polar(1.0, -phase)
        })
        .collect();
    let apply = |rail: &[Complex64]| -> Vec<Complex64> {
        rail.iter().zip(&mix).map(|(&s, &m)| s * m).collect()
    };
    Ok(DualPolWaveform {
        x: apply(&waveform.x),
        y: apply(&waveform.y),
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    })
}
