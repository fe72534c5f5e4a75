//! Transmitter-side DSP: bit source, constellation mapping, spectral pulse
//! shaping, polarization multiplexing, and carrier application.

use num_complex::Complex64;

use crate::comb::CarrierTone;
use crate::util::{bin_frequency, fft_inplace, ifft_inplace};
use crate::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_10: f64 = 3.162_277_660_168_379_5;

/// Modulation formats supported by the mapper and the receiver chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationFormat {
    Qpsk,
    Qam16,
}

impl ModulationFormat {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            ModulationFormat::Qpsk => 2,
            ModulationFormat::Qam16 => 4,
        }
    }
}

impl std::fmt::Display for ModulationFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModulationFormat::Qpsk => write!(f, "qpsk"),
            ModulationFormat::Qam16 => write!(f, "qam16"),
        }
    }
}

impl std::str::FromStr for ModulationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qpsk" => Ok(Self::Qpsk),
            "qam16" => Ok(Self::Qam16),
            other => Err(Error::Parse(format!("unknown modulation format '{other}'"))),
        }
    }
}

/// Gray-labeled constellation with unit average energy.
///
/// Point index equals the symbol's bit pattern read MSB-first. For 16QAM the
/// first two bits select the in-phase level and the last two the quadrature
/// level, each through the 2-bit Gray code 00,01,11,10 -> -3,-1,+1,+3.
#[derive(Debug, Clone)]
pub struct Constellation {
    format: ModulationFormat,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(format: ModulationFormat) -> Self {
        let points = match format {
            ModulationFormat::Qpsk => (0..4)
                .map(|idx| {
                    let re = if idx & 0b10 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                    let im = if idx & 0b01 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                    Complex64::new(re, im)
                })
                .collect(),
            ModulationFormat::Qam16 => (0..16)
                .map(|idx| {
                    let re = gray2_level((idx >> 2) & 0b11) / SQRT_10;
                    let im = gray2_level(idx & 0b11) / SQRT_10;
                    Complex64::new(re, im)
                })
                .collect(),
        };
        Self { format, points }
    }

    pub fn qpsk() -> Self {
        Self::new(ModulationFormat::Qpsk)
    }

    pub fn qam16() -> Self {
        Self::new(ModulationFormat::Qam16)
    }

    pub fn format(&self) -> ModulationFormat {
        self.format
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.format.bits_per_symbol()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Largest point magnitude (EVM normalization reference).
    pub fn max_magnitude(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Map a bit stream (values 0/1, length a multiple of bits-per-symbol)
    /// onto constellation points.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(Error::InvalidArgument(format!(
                "bit count {} is not a multiple of {bps}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(bits
            .chunks_exact(bps)
            .map(|chunk| {
                let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[idx]
            })
            .collect())
    }

    /// Index of the nearest constellation point (minimum Euclidean distance;
    /// boundary ties resolve toward the non-negative half-planes).
    pub fn decide(&self, z: Complex64) -> usize {
        match self.format {
            ModulationFormat::Qpsk => {
                (usize::from(z.re < 0.0) << 1) | usize::from(z.im < 0.0)
            }
            ModulationFormat::Qam16 => {
                (gray2_index(z.re * SQRT_10) << 2) | gray2_index(z.im * SQRT_10)
            }
        }
    }

    /// Squared distance from `z` to its nearest constellation point.
    pub fn nearest_sq_dist(&self, z: Complex64) -> f64 {
        match self.format {
            ModulationFormat::Qpsk => {
                let dr = z.re.abs() - FRAC_1_SQRT_2;
                let di = z.im.abs() - FRAC_1_SQRT_2;
                dr * dr + di * di
            }
            ModulationFormat::Qam16 => {
                let dr = z.re - nearest_level(z.re * SQRT_10) / SQRT_10;
                let di = z.im - nearest_level(z.im * SQRT_10) / SQRT_10;
                dr * dr + di * di
            }
        }
    }

    /// Append the bit pattern of point `index`, MSB first.
    pub fn push_bits(&self, index: usize, out: &mut Vec<u8>) {
        let bps = self.bits_per_symbol();
        for k in (0..bps).rev() {
            out.push(((index >> k) & 1) as u8);
        }
    }

    /// Hard-decide each symbol and emit its bits.
    pub fn demap_symbols(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for &s in symbols {
            self.push_bits(self.decide(s), &mut out);
        }
        out
    }

    /// Distinct point magnitudes, ascending (one entry for QPSK, three for
    /// 16QAM). Used by ring-partitioned estimators.
    pub fn ring_radii(&self) -> Vec<f64> {
        let mut radii: Vec<f64> = self.points.iter().map(|p| p.norm()).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        radii
    }
}

/// 2-bit Gray code to amplitude level: 00,01,11,10 -> -3,-1,+1,+3.
fn gray2_level(bits: usize) -> f64 {
    match bits {
        0b00 => -3.0,
        0b01 => -1.0,
        0b11 => 1.0,
        _ => 3.0,
    }
}

/// Inverse of [`gray2_level`] with nearest-level decision on the +/-{1,3} grid.
fn gray2_index(x: f64) -> usize {
    if x < -2.0 {
        0b00
    } else if x < 0.0 {
        0b01
    } else if x < 2.0 {
        0b11
    } else {
        0b10
    }
}

/// Nearest of the +/-{1,3} levels.
fn nearest_level(x: f64) -> f64 {
    if x < -2.0 {
        -3.0
    } else if x < 0.0 {
        -1.0
    } else if x < 2.0 {
        1.0
    } else {
        3.0
    }
}

/// Maximal-length PRBS from the x^11 + x^2 + 1 register (period 2047,
/// balanced at 1024 ones per period). `initial_state` seeds the 11-bit
/// register and must be non-zero in its low 11 bits.
pub fn prbs11(initial_state: u16, n_bits: usize) -> Result<Vec<u8>> {
    let mut state = initial_state & 0x7ff;
    if state == 0 {
        return Err(Error::InvalidArgument("PRBS register must start non-zero".into()));
    }
    let mut out = Vec::with_capacity(n_bits);
    for _ in 0..n_bits {
        let fb = ((state >> 10) ^ (state >> 1)) & 1;
        state = ((state << 1) | fb) & 0x7ff;
        out.push(fb as u8);
    }
    Ok(out)
}

/// PRBS sequence period for the order-11 register.
pub const PRBS11_PERIOD: usize = 2047;

/// Raised-cosine spectral shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    /// Roll-off factor in (0, 1].
    pub rolloff: f64,
    /// Impulse-response span in symbols used when a time-domain view of the
    /// filter is exported; the shaper itself applies the exact spectrum.
    pub span: usize,
    /// Output oversampling with respect to the symbol rate.
    pub samples_per_symbol: usize,
}

impl PulseShape {
    /// Conventional shape for a format: 5% roll-off for QPSK, 10% for 16QAM,
    /// span 16, four samples per symbol.
    pub fn for_format(format: ModulationFormat) -> Self {
        let rolloff = match format {
            ModulationFormat::Qpsk => 0.05,
            ModulationFormat::Qam16 => 0.10,
        };
        Self { rolloff, span: 16, samples_per_symbol: 4 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "roll-off must be in (0, 1], got {}",
                self.rolloff
            )));
        }
        if self.span < 16 {
            return Err(Error::InvalidArgument(format!(
                "span must be >= 16 symbols, got {}",
                self.span
            )));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::InvalidArgument(format!(
                "need >= 2 samples per symbol, got {}",
                self.samples_per_symbol
            )));
        }
        Ok(())
    }

    /// Raised-cosine spectrum amplitude at frequency `f` for symbol rate `rs`.
    pub fn spectrum_amplitude(&self, f: f64, rs: f64) -> f64 {
        let af = f.abs();
        let flat_edge = (1.0 - self.rolloff) * rs / 2.0;
        let stop_edge = (1.0 + self.rolloff) * rs / 2.0;
        if af <= flat_edge {
            1.0
        } else if af < stop_edge {
            0.5 * (1.0 + (std::f64::consts::PI / (self.rolloff * rs) * (af - flat_edge)).cos())
        } else {
            0.0
        }
    }

    /// Sampled raised-cosine impulse response over the configured span
    /// (`span * samples_per_symbol + 1` taps, unit peak). Zero at every
    /// non-central symbol instant.
    pub fn impulse_response(&self) -> Vec<f64> {
        let sps = self.samples_per_symbol as f64;
        let half = (self.span * self.samples_per_symbol / 2) as i64;
        (-half..=half)
            .map(|m| {
                let t = m as f64 / sps; // in symbol periods
                let denom = 1.0 - (2.0 * self.rolloff * t) * (2.0 * self.rolloff * t);
                if m == 0 {
                    1.0
                } else if denom.abs() < 1e-9 {
                    // t = T/(2*rolloff): take the analytic limit.
                    let x = std::f64::consts::PI / (2.0 * self.rolloff);
                    std::f64::consts::FRAC_PI_4 * (x.sin() / x)
                } else {
                    let pi_t = std::f64::consts::PI * t;
                    (pi_t.sin() / pi_t) * (self.rolloff * pi_t).cos() / denom
                }
            })
            .collect()
    }
}

/// Single-polarization complex baseband waveform.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub symbol_rate: f64,
}

/// Dual-polarization complex baseband waveform. Both rails share the time
/// base and have equal length.
#[derive(Debug, Clone)]
pub struct DualPolWaveform {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sample_rate: f64,
    pub symbol_rate: f64,
}

impl DualPolWaveform {
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::Incompatible(format!(
                "polarization length mismatch: {} vs {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(Error::InvalidArgument("symbol rate must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean power summed over both polarizations.
    pub fn total_power(&self) -> f64 {
        crate::util::mean_power(&self.x) + crate::util::mean_power(&self.y)
    }
}

/// Shape symbols with the exact raised-cosine spectrum (circular filtering on
/// the whole record). Symbol instants land on indices `k * samples_per_symbol`
/// with unit gain, so matched sampling returns the symbols themselves.
pub fn shape_pulses(
    symbols: &[Complex64],
    shape: &PulseShape,
    symbol_rate: f64,
) -> Result<Waveform> {
    shape.validate()?;
    if symbols.is_empty() {
        return Err(Error::InsufficientData("no symbols to shape".into()));
    }
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "symbol rate must be positive, got {symbol_rate}"
        )));
    }
    let sps = shape.samples_per_symbol;
    let n = symbols.len() * sps;
    let fs = symbol_rate * sps as f64;

    let mut buf = vec![Complex64::ZERO; n];
    for (k, &s) in symbols.iter().enumerate() {
        buf[k * sps] = s;
    }
    fft_inplace(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = bin_frequency(k, n, fs);
        *v *= shape.spectrum_amplitude(f, symbol_rate);
    }
    ifft_inplace(&mut buf);
    let gain = sps as f64;
    for v in buf.iter_mut() {
        *v *= gain;
    }
    Ok(Waveform { samples: buf, sample_rate: fs, symbol_rate })
}

/// Emulate polarization-division multiplexing: copy the waveform onto both
/// rails, the second delayed cyclically to decorrelate the data.
///
/// The delay is honored to the nearest whole symbol so the delayed rail stays
/// aligned to the symbol grid; each rail carries the full signal power (no
/// 1/sqrt(2) split).
pub fn emulate_pdm(waveform: &Waveform, delay: f64) -> Result<DualPolWaveform> {
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(Error::InvalidArgument(format!("delay must be >= 0, got {delay}")));
    }
    let sps = (waveform.sample_rate / waveform.symbol_rate).round() as usize;
    let delay_symbols = (delay * waveform.symbol_rate).round() as usize;
    let shift = (delay_symbols * sps) % waveform.samples.len().max(1);
    let mut y = Vec::with_capacity(waveform.samples.len());
    y.extend_from_slice(&waveform.samples[waveform.samples.len() - shift..]);
    y.extend_from_slice(&waveform.samples[..waveform.samples.len() - shift]);
    let out = DualPolWaveform {
        x: waveform.samples.clone(),
        y,
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    };
    out.validate()?;
    Ok(out)
}

/// Delay in whole symbols that [`emulate_pdm`] applies for a given delay.
pub fn pdm_delay_symbols(delay: f64, symbol_rate: f64) -> usize {
    (delay * symbol_rate).round() as usize
}

/// Multiply both rails by the carrier `sqrt(power) * exp(j*phi(t))`.
///
/// The tone's phase record must cover the waveform at the same sample rate.
pub fn apply_carrier(waveform: &DualPolWaveform, tone: &CarrierTone) -> Result<DualPolWaveform> {
    waveform.validate()?;
    let rate_err =
        (tone.phase.sample_rate() - waveform.sample_rate).abs() / waveform.sample_rate;
    if rate_err > 1e-9 {
        return Err(Error::Incompatible(format!(
            "carrier sampled at {:.6e} Hz but waveform at {:.6e} Hz",
            tone.phase.sample_rate(),
            waveform.sample_rate
        )));
    }
    if tone.phase.len() < waveform.len() {
        return Err(Error::Incompatible(format!(
            "carrier record has {} samples, waveform needs {}",
            tone.phase.len(),
            waveform.len()
        )));
    }
    let amp = tone.power.sqrt();
    let rotate = |rail: &[Complex64]| -> Vec<Complex64> {
        rail.iter()
            .zip(tone.phase.phases())
            .map(|(&s, &p)| s * Complex64::from_polar(amp, p))
            .collect()
    };
    Ok(DualPolWaveform {
        x: rotate(&waveform.x),
        y: rotate(&waveform.y),
        sample_rate: waveform.sample_rate,
        symbol_rate: waveform.symbol_rate,
    })
}
