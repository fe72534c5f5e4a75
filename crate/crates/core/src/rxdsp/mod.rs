//! Receiver DSP chain: rational resampling, clock-phase recovery, 2x2
//! constant-modulus equalization, frequency-offset estimation, and carrier
//! phase recovery (block-wise or per-symbol blind phase search), ending in
//! hard decisions.

mod cma;
mod cpr;
mod foe;
mod resample;
mod timing;

pub use cma::{cma_equalize, EqualizerConfig};
pub use cpr::{cpr_blockwise, cpr_bps, refine_phase_dd, BpsConfig};
pub use foe::{correct_frequency_offset, estimate_frequency_offset};
pub use resample::resample_to_2sps;
pub use timing::{estimate_timing_offset, timing_recovery, TimingEstimate};

use num_complex::Complex64;

use crate::txdsp::Constellation;
use crate::{Error, Result};

/// Symbol-rate outputs of the equalizer and everything downstream of it.
#[derive(Debug, Clone)]
pub struct SymbolFrame {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub symbol_rate: f64,
    pub meta: FrameMeta,
}

/// Estimates accumulated while the frame moved through the chain.
#[derive(Debug, Clone, Default)]
pub struct FrameMeta {
    /// Total frequency offset removed so far, Hz.
    pub frequency_offset_hz: f64,
    /// Carrier phase trajectory recovered per polarization, radians.
    pub phase_trajectory_x: Option<Vec<f64>>,
    pub phase_trajectory_y: Option<Vec<f64>>,
    /// Whether the equalizer had to re-initialize a degenerate output.
    pub cma_reinitialized: bool,
    /// Block-averaged constant-modulus cost over the adaptation history.
    pub cma_cost_trace: Vec<f64>,
}

impl SymbolFrame {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, symbol_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Incompatible(format!(
                "polarization length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(Error::InvalidArgument("symbol rate must be positive".into()));
        }
        Ok(Self { x, y, symbol_rate, meta: FrameMeta::default() })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Hard-decide every symbol and concatenate the bit streams, x rail first.
pub fn decide_and_demap(frame: &SymbolFrame, constellation: &Constellation) -> Vec<u8> {
    let mut bits = constellation.demap_symbols(&frame.x);
    bits.extend(constellation.demap_symbols(&frame.y));
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdsp::prbs11;

    #[test]
    fn demap_concatenates_x_then_y() {
        let c = Constellation::qpsk();
        let bx = prbs11(0x0f, 64).unwrap();
        let by = prbs11(0x5a, 64).unwrap();
        let frame = SymbolFrame::new(
            c.map_bits(&bx).unwrap(),
            c.map_bits(&by).unwrap(),
            40e9,
        )
        .unwrap();
        let bits = decide_and_demap(&frame, &c);
        assert_eq!(&bits[..64], bx.as_slice());
        assert_eq!(&bits[64..], by.as_slice());
    }

    #[test]
    fn frame_requires_equal_rails() {
        let c = Constellation::qpsk();
        let s = c.map_bits(&prbs11(0x1, 32).unwrap()).unwrap();
        assert!(SymbolFrame::new(s.clone(), s[..s.len() - 1].to_vec(), 40e9).is_err());
    }
}
