//! Quality and capacity accounting: bit-error counting with blind frame
//! alignment, error vector magnitude, FEC threshold classification, and
//! aggregate rate bookkeeping.

use num_complex::Complex64;

use crate::txdsp::Constellation;
use crate::{Error, Result};

/// Fraction of the alignment search prefix that must agree beyond chance
/// (normalized correlation, 0 = coin flip) before errors are counted.
pub const ALIGNMENT_CORRELATION_FLOOR: f64 = 0.05;

/// Symbols inspected when searching for the best alignment.
const ALIGNMENT_PREFIX: usize = 16_384;

/// Cyclic symbol-delay search half-window.
const ALIGNMENT_DELAY_WINDOW: i64 = 256;

/// Errors required before a BER figure counts as statistically settled.
pub const MIN_COUNTABLE_ERRORS: u64 = 5;

/// How the receiver stream was mapped onto the transmitted reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitAlignment {
    /// Received stream i was counted against transmitted stream order[i].
    pub order: [usize; 2],
    /// Quadrant rotation index (multiples of 90 degrees) per received stream.
    pub rotation: [u8; 2],
    /// Whether the constellation was conjugated per received stream.
    pub conjugated: [bool; 2],
    /// Cyclic symbol delay of the transmitted reference per received stream.
    pub delay_symbols: [i64; 2],
    /// Worst per-stream bit correlation (2 x agreement - 1) over the search
    /// prefix.
    pub correlation: f64,
}

/// Outcome of [`count_ber`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerCount {
    pub ber: f64,
    pub n_errors: u64,
    pub n_bits: u64,
    /// False when fewer than [`MIN_COUNTABLE_ERRORS`] errors were seen, so
    /// the figure is only an upper bound.
    pub reliable: bool,
    pub alignment: BitAlignment,
}

/// Pack a bit stream into per-symbol constellation indices.
fn bits_to_indices(bits: &[u8], bps: usize) -> Result<Vec<u8>> {
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
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
        .collect())
}

/// Index permutations induced on the bit labels by each of the 8 symmetry
/// transforms (4 quadrant rotations, optionally conjugated).
fn label_permutations(constellation: &Constellation) -> Vec<[u8; 16]> {
    let pts = constellation.points();
    let mut perms = Vec::with_capacity(8);
    for conj in [false, true] {
        for m in 0..4u8 {
            let rot = Complex64::i().powu(m as u32);
            let mut perm = [0u8; 16];
            for (idx, &p) in pts.iter().enumerate() {
                let mut q = p * rot;
                if conj {
                    q = q.conj();
                }
                perm[idx] = constellation.decide(q) as u8;
            }
            perms.push(perm);
        }
    }
    perms
}

struct StreamAlignment {
    transform: usize,
    delay: i64,
    prefix_agreement: f64,
}

/// Best (transform, delay) for one received stream against one transmitted
/// stream, judged by bit agreement over the prefix.
fn best_alignment(
    rx: &[u8],
    tx: &[u8],
    perms: &[[u8; 16]],
    bps: usize,
) -> (usize, i64, f64) {
    let prefix = rx.len().min(ALIGNMENT_PREFIX);
    let n_tx = tx.len() as i64;
    let mut best = (0usize, 0i64, -1.0f64);
    for (t, perm) in perms.iter().enumerate() {
        let mapped: Vec<u8> = tx.iter().map(|&i| perm[i as usize]).collect();
        for delay in -ALIGNMENT_DELAY_WINDOW..=ALIGNMENT_DELAY_WINDOW {
            let mut wrong = 0u32;
            for k in 0..prefix {
                let j = (k as i64 + delay).rem_euclid(n_tx) as usize;
                wrong += (rx[k] ^ mapped[j]).count_ones();
            }
            let agreement = 1.0 - wrong as f64 / (prefix * bps) as f64;
            if agreement > best.2 {
                best = (t, delay, agreement);
            }
        }
    }
    best
}

/// Count bit errors between a received stream and the transmitted reference.
///
/// Each argument concatenates the two polarization streams (x first). The
/// receiver knows neither which output is which polarization, nor the
/// absolute quadrant, nor whether the constellation came out conjugated, nor
/// the frame delay, so all of those are searched (per received stream) for
/// maximal agreement over a prefix; errors are then counted over the full
/// record against the cyclically extended reference. The constellation
/// provides the bit labeling that turns symmetry transforms into label
/// permutations.
pub fn count_ber(
    received_bits: &[u8],
    transmitted_bits: &[u8],
    constellation: &Constellation,
) -> Result<BerCount> {
    let bps = constellation.bits_per_symbol();
    if received_bits.is_empty() || transmitted_bits.is_empty() {
        return Err(Error::InsufficientData("empty bit stream".into()));
    }
    if received_bits.len() % 2 != 0 || transmitted_bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(
            "bit streams must concatenate two equal polarization streams".into(),
        ));
    }
    let rx_streams: Vec<Vec<u8>> = {
        let half = received_bits.len() / 2;
        vec![
            bits_to_indices(&received_bits[..half], bps)?,
            bits_to_indices(&received_bits[half..], bps)?,
        ]
    };
    let tx_streams: Vec<Vec<u8>> = {
        let half = transmitted_bits.len() / 2;
        vec![
            bits_to_indices(&transmitted_bits[..half], bps)?,
            bits_to_indices(&transmitted_bits[half..], bps)?,
        ]
    };
    let perms = label_permutations(constellation);

    // Score every received stream against every transmitted stream, then
    // pick the one-to-one assignment with the best total prefix agreement.
    let mut table = Vec::new();
    for rx in &rx_streams {
        let mut row = Vec::new();
        for tx in &tx_streams {
            let (transform, delay, agreement) = best_alignment(rx, tx, &perms, bps);
            row.push(StreamAlignment { transform, delay, prefix_agreement: agreement });
        }
        table.push(row);
    }
    let direct = table[0][0].prefix_agreement + table[1][1].prefix_agreement;
    let crossed = table[0][1].prefix_agreement + table[1][0].prefix_agreement;
    let order: [usize; 2] = if direct >= crossed { [0, 1] } else { [1, 0] };
    let chosen: [&StreamAlignment; 2] = [&table[0][order[0]], &table[1][order[1]]];
    let worst_corr =
        chosen.iter().map(|a| 2.0 * a.prefix_agreement - 1.0).fold(f64::INFINITY, f64::min);
    if worst_corr < ALIGNMENT_CORRELATION_FLOOR {
        return Err(Error::AlignmentFailure {
            best_agreement: chosen
                .iter()
                .map(|a| a.prefix_agreement)
                .fold(f64::NEG_INFINITY, f64::max),
            floor: ALIGNMENT_CORRELATION_FLOOR,
        });
    }

    let mut n_errors = 0u64;
    let mut n_bits = 0u64;
    for (rx_idx, align) in chosen.iter().enumerate() {
        let rx = &rx_streams[rx_idx];
        let tx = &tx_streams[order[rx_idx]];
        let perm = &perms[align.transform];
        let n_tx = tx.len() as i64;
        for (k, &r) in rx.iter().enumerate() {
            let j = (k as i64 + align.delay).rem_euclid(n_tx) as usize;
            n_errors += (r ^ perm[tx[j] as usize]).count_ones() as u64;
        }
        n_bits += (rx.len() * bps) as u64;
    }

    let alignment = BitAlignment {
        order,
        rotation: [chosen[0].transform as u8 % 4, chosen[1].transform as u8 % 4],
        conjugated: [chosen[0].transform >= 4, chosen[1].transform >= 4],
        delay_symbols: [chosen[0].delay, chosen[1].delay],
        correlation: worst_corr,
    };
    Ok(BerCount {
        ber: n_errors as f64 / n_bits as f64,
        n_errors,
        n_bits,
        reliable: n_errors >= MIN_COUNTABLE_ERRORS,
        alignment,
    })
}

/// Reference for the error vector.
#[derive(Debug, Clone, Copy)]
pub enum EvmReference<'a> {
    /// Transmitted symbols, already aligned with the received ones.
    Known(&'a [Complex64]),
    /// Use the nearest constellation point of each received symbol.
    DecisionDirected,
}

/// RMS error vector normalized to the largest constellation magnitude,
/// in percent.
pub fn compute_evm(
    symbols: &[Complex64],
    reference: EvmReference<'_>,
    constellation: &Constellation,
) -> Result<f64> {
    if symbols.is_empty() {
        return Err(Error::InsufficientData("no symbols".into()));
    }
    let mse = match reference {
        EvmReference::Known(reference) => {
            if reference.len() != symbols.len() {
                return Err(Error::Incompatible(format!(
                    "reference has {} symbols, received {}",
                    reference.len(),
                    symbols.len()
                )));
            }
            symbols
                .iter()
                .zip(reference)
                .map(|(&s, &r)| (s - r).norm_sqr())
                .sum::<f64>()
                / symbols.len() as f64
        }
        EvmReference::DecisionDirected => {
            symbols.iter().map(|&s| constellation.nearest_sq_dist(s)).sum::<f64>()
                / symbols.len() as f64
        }
    };
    Ok(mse.sqrt() / constellation.max_magnitude() * 100.0)
}

/// Hard-decision FEC classification policy: (BER threshold, overhead
/// fraction) pairs sorted ascending by threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FecPolicy {
    thresholds: Vec<(f64, f64)>,
}

impl Default for FecPolicy {
    fn default() -> Self {
        Self { thresholds: vec![(4.7e-3, 0.0625), (1.44e-2, 0.20)] }
    }
}

impl FecPolicy {
    pub fn new(thresholds: Vec<(f64, f64)>) -> Result<Self> {
        for w in thresholds.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidArgument(
                    "FEC thresholds must ascend strictly by BER".into(),
                ));
            }
        }
        for &(ber, oh) in &thresholds {
            if !(ber > 0.0 && ber < 0.5) {
                return Err(Error::InvalidArgument(format!(
                    "BER threshold {ber} out of (0, 0.5)"
                )));
            }
            if !(oh > 0.0) {
                return Err(Error::InvalidArgument(format!("overhead {oh} must be > 0")));
            }
        }
        Ok(Self { thresholds })
    }

    /// A policy with no FEC at all: every BER passes with zero overhead.
    pub fn none() -> Self {
        Self { thresholds: Vec::new() }
    }

    pub fn thresholds(&self) -> &[(f64, f64)] {
        &self.thresholds
    }
}

/// FEC class of a measured BER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FecClass {
    /// Correctable with the given overhead fraction.
    Pass { overhead: f64 },
    /// Above every threshold: channel contributes no net rate.
    Fail,
}

impl FecClass {
    pub fn overhead(&self) -> Option<f64> {
        match self {
            FecClass::Pass { overhead } => Some(*overhead),
            FecClass::Fail => None,
        }
    }

    pub fn passes(&self) -> bool {
        matches!(self, FecClass::Pass { .. })
    }
}

/// Smallest-overhead threshold whose BER bound covers the measured BER
/// (inclusive); fail when none does. A policy without thresholds means no
/// FEC: everything passes at zero overhead.
pub fn fec_classify(ber: f64, policy: &FecPolicy) -> FecClass {
    if policy.thresholds.is_empty() {
        return FecClass::Pass { overhead: 0.0 };
    }
    for &(threshold, overhead) in &policy.thresholds {
        if ber <= threshold {
            return FecClass::Pass { overhead };
        }
    }
    FecClass::Fail
}

/// Per-channel outcome of a transmission run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResult {
    pub channel_index: usize,
    pub carrier_frequency_hz: f64,
    pub ber: f64,
    pub evm_percent: f64,
    pub n_bits_counted: u64,
    pub n_errors: u64,
    pub fec_class: FecClass,
}

/// Aggregate rate figures for a set of channels sharing one format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub line_rate_bps: f64,
    pub net_rate_bps: f64,
    /// Net rate divided by the occupied bandwidth (channel count times
    /// spacing), bit/s/Hz.
    pub net_spectral_efficiency: f64,
    /// Line rate over the same bandwidth, bit/s/Hz.
    pub line_spectral_efficiency: f64,
}

/// Line/net rate and spectral-efficiency accounting.
///
/// Every channel contributes `symbol_rate * bits_per_symbol * n_polarizations`
/// to the line rate. Net rate divides each passing channel's line rate by
/// (1 + overhead) of its FEC class under `policy`; failing channels
/// contribute zero.
pub fn aggregate_rates(
    results: &[ChannelResult],
    symbol_rate_bd: f64,
    bits_per_symbol: usize,
    n_polarizations: usize,
    policy: &FecPolicy,
    channel_spacing_hz: f64,
) -> Result<RateSummary> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no channel results".into()));
    }
    if !(symbol_rate_bd > 0.0 && channel_spacing_hz > 0.0) {
        return Err(Error::InvalidArgument(
            "symbol rate and channel spacing must be positive".into(),
        ));
    }
    let per_channel_line = symbol_rate_bd * bits_per_symbol as f64 * n_polarizations as f64;
    let mut line = 0.0;
    let mut net = 0.0;
    for r in results {
        line += per_channel_line;
        if let FecClass::Pass { overhead } = fec_classify(r.ber, policy) {
            net += per_channel_line / (1.0 + overhead);
        }
    }
    let bandwidth = results.len() as f64 * channel_spacing_hz;
    Ok(RateSummary {
        line_rate_bps: line,
        net_rate_bps: net,
        net_spectral_efficiency: net / bandwidth,
        line_spectral_efficiency: line / bandwidth,
    })
}

/// Analytic Gray-coded QPSK bit error rate over AWGN at the given per-symbol
/// SNR (linear Es/N0).
pub fn qpsk_awgn_ber(es_n0: f64) -> f64 {
    0.5 * libm::erfc((es_n0 / 2.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdsp::prbs11;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_stream_bits(n_per_stream: usize, taps_a: u16, taps_b: u16) -> Vec<u8> {
        let mut bits = prbs11(taps_a, n_per_stream).unwrap();
        bits.extend(prbs11(taps_b, n_per_stream).unwrap());
        bits
    }

    #[test]
    fn identical_streams_count_zero_and_flag_unreliable() {
        let bits = two_stream_bits(500_000, 0x1b3, 0x2c5);
        let c = Constellation::qpsk();
        let count = count_ber(&bits, &bits, &c).unwrap();
        assert_eq!(count.n_errors, 0);
        assert_eq!(count.ber, 0.0);
        assert_eq!(count.n_bits, 1_000_000);
        assert!(!count.reliable);
        assert_eq!(count.alignment.order, [0, 1]);
        assert_eq!(count.alignment.delay_symbols, [0, 0]);
    }

    #[test]
    fn one_flipped_bit_in_a_million() {
        let tx = two_stream_bits(500_000, 0x1b3, 0x2c5);
        let mut rx = tx.clone();
        rx[123_457] ^= 1;
        let c = Constellation::qpsk();
        let count = count_ber(&rx, &tx, &c).unwrap();
        assert_eq!(count.n_errors, 1);
        assert_relative_eq!(count.ber, 1e-6);
        assert!(!count.reliable);
    }

    #[test]
    fn alignment_search_undoes_rotation_swap_conjugation_and_delay() {
        let c = Constellation::qam16();
        let n_sym = 40_000;
        let tx = two_stream_bits(n_sym * 4, 0x9a, 0x3c1);
        let tx_syms: Vec<Vec<Complex64>> = vec![
            c.map_bits(&tx[..n_sym * 4]).unwrap(),
            c.map_bits(&tx[n_sym * 4..]).unwrap(),
        ];
        // Receiver sees: streams swapped, x' = conj(y) rotated 270 and
        // delayed 17 symbols, y' = x rotated 90, delayed -40.
        let rot = |s: Complex64, m: u32| s * Complex64::i().powu(m);
        let rx_x: Vec<Complex64> = (0..n_sym)
            .map(|k| rot(tx_syms[1][(k + 17) % n_sym].conj(), 3))
            .collect();
        let rx_y: Vec<Complex64> =
            (0..n_sym).map(|k| rot(tx_syms[0][(k + n_sym - 40) % n_sym], 1)).collect();
        let mut rx_bits = c.demap_symbols(&rx_x);
        rx_bits.extend(c.demap_symbols(&rx_y));
        let count = count_ber(&rx_bits, &tx, &c).unwrap();
        assert_eq!(count.n_errors, 0, "alignment {:?}", count.alignment);
        assert_eq!(count.alignment.order, [1, 0]);
        assert_eq!(count.alignment.delay_symbols, [17, -40]);
    }

    #[test]
    fn count_is_symmetric_in_its_arguments() {
        let tx = two_stream_bits(100_000, 0x1b3, 0x2c5);
        let mut rx = tx.clone();
        for k in (0..rx.len()).step_by(997) {
            rx[k] ^= 1;
        }
        let c = Constellation::qpsk();
        let a = count_ber(&rx, &tx, &c).unwrap();
        let b = count_ber(&tx, &rx, &c).unwrap();
        assert_eq!(a.n_errors, b.n_errors);
        assert_eq!(a.n_bits, b.n_bits);
    }

    #[test]
    fn unrelated_streams_fail_alignment() {
        let tx = two_stream_bits(60_000, 0x1b3, 0x2c5);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let rx: Vec<u8> = (0..tx.len())
            .map(|_| {
                let u: f64 = StandardNormal.sample(&mut rng);
                (u > 0.0) as u8
            })
            .collect();
        let c = Constellation::qpsk();
        match count_ber(&rx, &tx, &c) {
            Err(Error::AlignmentFailure { best_agreement, floor }) => {
                assert!(best_agreement < 0.55);
                assert_relative_eq!(floor, ALIGNMENT_CORRELATION_FLOOR);
            }
            other => panic!("expected alignment failure, got {other:?}"),
        }
    }

    #[test]
    fn awgn_qpsk_ber_matches_closed_form() {
        let c = Constellation::qpsk();
        let n_sym = 250_000;
        let tx = two_stream_bits(n_sym * 2, 0x155, 0x0f3);
        let es_n0 = 10.0f64; // 10 dB
        let sigma = (1.0 / es_n0).sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(4242);
        let mut rx_bits = Vec::with_capacity(tx.len());
        for half in [&tx[..n_sym * 2], &tx[n_sym * 2..]] {
            let syms = c.map_bits(half).unwrap();
            let noisy: Vec<Complex64> = syms
                .iter()
                .map(|&s| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    s + Complex64::new(re, im) * sigma / 2f64.sqrt()
                })
                .collect();
            rx_bits.extend(c.demap_symbols(&noisy));
        }
        let count = count_ber(&rx_bits, &tx, &c).unwrap();
        assert!(count.reliable);
        let analytic = qpsk_awgn_ber(es_n0);
        assert!(
            (count.ber - analytic).abs() / analytic < 0.1,
            "measured {} vs analytic {analytic}",
            count.ber
        );
    }

    #[test]
    fn evm_is_zero_for_clean_symbols() {
        let c = Constellation::qam16();
        let syms = c.map_bits(&prbs11(0x71, 4000).unwrap()).unwrap();
        let evm = compute_evm(&syms, EvmReference::DecisionDirected, &c).unwrap();
        assert_relative_eq!(evm, 0.0);
    }

    #[test]
    fn evm_matches_snr_with_max_magnitude_normalization() {
        let snr = 100.0f64; // 20 dB
        let sigma = (1.0 / snr).sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut noisy_set = |c: &Constellation, n: usize| -> (Vec<Complex64>, Vec<Complex64>) {
            let bits = prbs11(0x2f5, n * c.bits_per_symbol()).unwrap();
            let syms = c.map_bits(&bits).unwrap();
            let noisy = syms
                .iter()
                .map(|&s| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    s + Complex64::new(re, im) * sigma / 2f64.sqrt()
                })
                .collect();
            (noisy, syms)
        };
        let qpsk = Constellation::qpsk();
        let (noisy, reference) = noisy_set(&qpsk, 30_000);
        let evm_qpsk = compute_evm(&noisy, EvmReference::Known(&reference), &qpsk).unwrap();
        assert_relative_eq!(evm_qpsk, 10.0, max_relative = 0.03);

        let qam = Constellation::qam16();
        let (noisy, reference) = noisy_set(&qam, 30_000);
        let evm_qam = compute_evm(&noisy, EvmReference::Known(&reference), &qam).unwrap();
        assert_relative_eq!(evm_qam, 10.0 * (10f64 / 18.0).sqrt(), max_relative = 0.03);
    }

    #[test]
    fn evm_requires_matching_reference_length() {
        let c = Constellation::qpsk();
        let syms = c.map_bits(&prbs11(0x71, 64).unwrap()).unwrap();
        assert!(compute_evm(&syms, EvmReference::Known(&syms[..10]), &c).is_err());
    }

    #[test]
    fn fec_boundaries_are_inclusive() {
        let policy = FecPolicy::default();
        assert_eq!(fec_classify(4.6e-3, &policy), FecClass::Pass { overhead: 0.0625 });
        assert_eq!(fec_classify(4.7e-3, &policy), FecClass::Pass { overhead: 0.0625 });
        assert_eq!(fec_classify(1.0e-2, &policy), FecClass::Pass { overhead: 0.20 });
        assert_eq!(fec_classify(1.44e-2, &policy), FecClass::Pass { overhead: 0.20 });
        assert_eq!(fec_classify(2.0e-2, &policy), FecClass::Fail);
    }

    #[test]
    fn fec_classification_is_monotone_in_ber() {
        let policy = FecPolicy::default();
        let grid: Vec<f64> =
            (0..200).map(|k| 10f64.powf(-5.0 + 4.0 * k as f64 / 199.0)).collect();
        let mut last = -1.0;
        for &ber in &grid {
            let oh = fec_classify(ber, &policy).overhead().unwrap_or(f64::INFINITY);
            assert!(oh >= last, "overhead decreased at BER {ber}");
            last = oh;
        }
    }

    #[test]
    fn fec_policy_validation() {
        assert!(FecPolicy::new(vec![(1e-2, 0.1), (1e-3, 0.2)]).is_err());
        assert!(FecPolicy::new(vec![(1e-3, 0.0)]).is_err());
        assert!(FecPolicy::new(vec![(1e-3, 0.1), (1e-2, 0.2)]).is_ok());
    }

    fn channel(idx: usize, ber: f64, policy: &FecPolicy) -> ChannelResult {
        ChannelResult {
            channel_index: idx,
            carrier_frequency_hz: 193.4e12,
            ber,
            evm_percent: 10.0,
            n_bits_counted: 1_000_000,
            n_errors: (ber * 1e6) as u64,
            fec_class: fec_classify(ber, policy),
        }
    }

    #[test]
    fn qpsk_grid_rate_accounting() {
        let policy = FecPolicy::default();
        let results: Vec<ChannelResult> =
            (0..52).map(|i| channel(i, 1e-3, &policy)).collect();
        let summary = aggregate_rates(&results, 40e9, 2, 2, &policy, 42e9).unwrap();
        assert_relative_eq!(summary.line_rate_bps, 8.32e12, max_relative = 1e-12);
        assert_relative_eq!(summary.net_rate_bps, 8.32e12 / 1.0625, max_relative = 1e-12);
        assert!((summary.net_rate_bps - 7.83e12).abs() < 0.01e12);
    }

    #[test]
    fn qam16_grid_rate_accounting_with_mixed_classes() {
        let policy = FecPolicy::default();
        let mut results: Vec<ChannelResult> =
            (0..32).map(|i| channel(i, 3e-3, &policy)).collect();
        results.extend((32..38).map(|i| channel(i, 1.2e-2, &policy)));
        let summary = aggregate_rates(&results, 38e9, 4, 2, &policy, 42e9).unwrap();
        assert_relative_eq!(summary.line_rate_bps, 11.552e12, max_relative = 1e-12);
        let expected_net = 32.0 * 304e9 / 1.0625 + 6.0 * 304e9 / 1.2;
        assert_relative_eq!(summary.net_rate_bps, expected_net, max_relative = 1e-12);
        assert!((summary.net_rate_bps - 10.676e12).abs() < 0.01e12);
        assert_relative_eq!(summary.net_spectral_efficiency, 6.69, epsilon = 0.02);
    }

    #[test]
    fn no_fec_policy_passes_everything_at_line_rate() {
        let policy = FecPolicy::none();
        let results = vec![channel(0, 0.3, &policy)];
        let summary = aggregate_rates(&results, 1e9, 2, 1, &policy, 42e9).unwrap();
        assert_relative_eq!(summary.line_rate_bps, 2e9);
        assert_relative_eq!(summary.net_rate_bps, 2e9);
    }

    #[test]
    fn rates_are_additive_over_partitions() {
        let policy = FecPolicy::default();
        let all: Vec<ChannelResult> = (0..38)
            .map(|i| channel(i, if i % 5 == 0 { 1.2e-2 } else { 2e-3 }, &policy))
            .collect();
        let whole = aggregate_rates(&all, 38e9, 4, 2, &policy, 42e9).unwrap();
        let first = aggregate_rates(&all[..20], 38e9, 4, 2, &policy, 42e9).unwrap();
        let second = aggregate_rates(&all[20..], 38e9, 4, 2, &policy, 42e9).unwrap();
        assert_relative_eq!(
            whole.line_rate_bps,
            first.line_rate_bps + second.line_rate_bps,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            whole.net_rate_bps,
            first.net_rate_bps + second.net_rate_bps,
            max_relative = 1e-12
        );
    }

    #[test]
    fn failing_channels_contribute_zero_net() {
        let policy = FecPolicy::default();
        let results = vec![channel(0, 2e-3, &policy), channel(1, 0.1, &policy)];
        let summary = aggregate_rates(&results, 38e9, 4, 2, &policy, 42e9).unwrap();
        assert_relative_eq!(summary.line_rate_bps, 2.0 * 304e9, max_relative = 1e-12);
        assert_relative_eq!(summary.net_rate_bps, 304e9 / 1.0625, max_relative = 1e-12);
    }
}
