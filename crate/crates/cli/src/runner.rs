//! Executes a scenario plan: one full transmit/link/receive simulation per
//! (sweep point, channel), fanned out over a thread pool, with results
//! collected in a deterministic order independent of scheduling.

use combdsp::channel::{
    add_noise_psd, apply_cd, apply_polarization_rotation, coherent_receive, load_ase_noise,
    JonesMatrix, PropagationDirection,
};
use combdsp::comb::{generate_line, ocnr_noise_floor, CombSpec};
use combdsp::metrics::{compute_evm, count_ber, fec_classify, EvmReference, FecClass, FecPolicy};
use combdsp::phasenoise::{synthesize_phase, FmNoiseModel};
use combdsp::rxdsp::{
    cma_equalize, correct_frequency_offset, cpr_blockwise, cpr_bps, decide_and_demap,
    estimate_frequency_offset, refine_phase_dd, resample_to_2sps, timing_recovery, SymbolFrame,
};
use combdsp::derive_seed;
use combdsp::txdsp::{
    apply_carrier, emulate_pdm, pdm_delay_symbols, prbs11, shape_pulses, Constellation,
};
use num_complex::Complex64;

use crate::config::{CprMode, ScenarioPlan, SweepAxis};
use crate::{AppError, AppResult};

/// Interleaver delay between the polarization tributaries.
pub const PDM_DELAY_S: f64 = 5.3e-9;

/// Cap on symbols persisted per constellation dump.
const DUMP_SYMBOL_CAP: usize = 8192;

/// One measured channel at one sweep point under one phase-recovery mode.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub scenario: String,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub cpr_mode: CprMode,
    pub channel_index: usize,
    pub carrier_frequency_hz: f64,
    pub symbol_rate_bd: f64,
    pub modulation: String,
    pub osnr_db: f64,
    pub n_symbols: usize,
    pub ber: f64,
    pub n_errors: u64,
    pub n_bits: u64,
    pub reliable: bool,
    pub evm_percent: f64,
    pub fec_class: FecClass,
    pub channel_spacing_hz: f64,
}

/// Everything a scenario produces before serialization.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<RunRow>,
    /// Recovered x-polarization symbols per point, keyed for file names.
    pub symbol_dumps: Vec<(String, Vec<Complex64>)>,
}

/// Transmitted reference bits: the x stream, then the y stream produced by
/// the polarization emulator (a cyclic right shift of whole symbols).
fn reference_bits(bits: &[u8], delay_symbols: usize, bits_per_symbol: usize) -> Vec<u8> {
    let shift = (delay_symbols * bits_per_symbol) % bits.len();
    let mut all = bits.to_vec();
    all.extend_from_slice(&bits[bits.len() - shift..]);
    all.extend_from_slice(&bits[..bits.len() - shift]);
    all
}

/// Work unit: one channel at one sweep point (both CPR modes share it so
/// they see the identical noise realization).
#[derive(Debug, Clone, Copy)]
struct Point {
    sweep_index: usize,
    sweep_value: f64,
    channel_index: usize,
}

fn point_list(plan: &ScenarioPlan) -> Vec<Point> {
    let mut points = Vec::new();
    for (sweep_index, &sweep_value) in plan.sweep.grid.iter().enumerate() {
        if plan.sweep.axis == SweepAxis::Channel {
            points.push(Point { sweep_index, sweep_value, channel_index: sweep_value as usize });
        } else {
            for &channel_index in &plan.sweep.channels {
                points.push(Point { sweep_index, sweep_value, channel_index });
            }
        }
    }
    points
}

/// Channel parameters after applying the sweep value.
struct Resolved {
    comb: CombSpec,
    symbol_rate_bd: f64,
    osnr_db: f64,
}

fn resolve_point(plan: &ScenarioPlan, point: &Point) -> AppResult<Resolved> {
    let mut comb = plan.comb.clone();
    let mut symbol_rate_bd = plan.symbol_rate_bd;
    let mut osnr_db = plan.impairments.osnr_db;
    match plan.sweep.axis {
        SweepAxis::Channel => {}
        SweepAxis::Osnr => osnr_db = point.sweep_value,
        SweepAxis::SymbolRate => {
            symbol_rate_bd = point.sweep_value;
            if plan.sweep.hold_es_n0 {
                // Keep energy per symbol fixed: the 12.5 GHz noise reference
                // does not scale with the symbol rate, so OSNR must.
                osnr_db += 10.0 * (symbol_rate_bd / plan.symbol_rate_bd).log10();
            }
        }
        SweepAxis::Linewidth => {
            comb.line_noise = FmNoiseModel::from_lorentzian_linewidth(point.sweep_value)
                .map_err(|e| AppError::Config(format!("linewidth sweep value: {e}")))?;
        }
    }
    let offset_thz = (comb.line_frequency(point.channel_index) - comb.center_frequency) / 1e12;
    osnr_db += plan.impairments.osnr_tilt_db_per_thz * offset_thz;
    Ok(Resolved { comb, symbol_rate_bd, osnr_db })
}

/// Run the shared front end, then branch per CPR mode.
fn run_point(plan: &ScenarioPlan, point: &Point) -> AppResult<(Vec<RunRow>, Vec<(String, Vec<Complex64>)>)> {
    let where_ = format!(
        "scenario '{}', sweep {}={}, channel {}",
        plan.name, plan.sweep.axis, point.sweep_value, point.channel_index
    );
    let ctx = |stage: &'static str| {
        let where_ = where_.clone();
        move |e: combdsp::Error| AppError::Runtime(format!("{where_}, stage {stage}: {e}"))
    };

    let resolved = resolve_point(plan, point)?;
    let constellation = Constellation::new(plan.format);
    let bits_per_symbol = constellation.bits_per_symbol();
    let shape = plan.shape;
    let sps = shape.samples_per_symbol;
    let sample_rate = resolved.symbol_rate_bd * sps as f64;
    let n_samples = plan.n_symbols * sps;
    let seed = derive_seed(plan.base_seed, &[point.sweep_index as u64, point.channel_index as u64]);

    // Transmitter.
    let prbs_seed = ((seed % 2047) + 1) as u16;
    let bits = prbs11(prbs_seed, plan.n_symbols * bits_per_symbol).map_err(ctx("prbs"))?;
    let symbols = constellation.map_bits(&bits).map_err(ctx("mapping"))?;
    let single = shape_pulses(&symbols, &shape, resolved.symbol_rate_bd).map_err(ctx("shaping"))?;
    let mut wf = emulate_pdm(&single, PDM_DELAY_S).map_err(ctx("pdm"))?;
    drop(single);
    let tone = generate_line(&resolved.comb, point.channel_index, n_samples, sample_rate, seed)
        .map_err(ctx("carrier"))?;
    wf = apply_carrier(&wf, &tone).map_err(ctx("carrier"))?;
    let carrier_noise_psd = ocnr_noise_floor(&resolved.comb, tone.power);
    drop(tone);
    if carrier_noise_psd > 0.0 {
        wf = add_noise_psd(&wf, carrier_noise_psd, derive_seed(seed, &[1]))
            .map_err(ctx("carrier noise"))?;
    }

    // Link.
    if plan.impairments.polarization_rotation_rad != 0.0 {
        let jones = JonesMatrix::rotation(plan.impairments.polarization_rotation_rad);
        wf = apply_polarization_rotation(&wf, &jones).map_err(ctx("polarization"))?;
    }
    if plan.link.fiber_length_m > 0.0 {
        wf = apply_cd(&wf, &plan.link, PropagationDirection::Forward).map_err(ctx("dispersion"))?;
    }
    if resolved.osnr_db.is_finite() {
        wf = load_ase_noise(&wf, resolved.osnr_db, derive_seed(seed, &[2]))
            .map_err(ctx("noise loading"))?;
    }

    // Coherent front end.
    let lo = synthesize_phase(&plan.impairments.lo_model, n_samples, sample_rate, derive_seed(seed, &[3]))
        .map_err(ctx("lo"))?;
    wf = coherent_receive(&wf, &lo, plan.impairments.frequency_offset_hz)
        .map_err(ctx("receive"))?;
    drop(lo);
    if plan.link.fiber_length_m > 0.0 && plan.compensate_dispersion {
        wf = apply_cd(&wf, &plan.link, PropagationDirection::Inverse)
            .map_err(ctx("dispersion compensation"))?;
    }

    // Blind DSP shared by both CPR modes.
    let two_sps = resample_to_2sps(&wf).map_err(ctx("resampling"))?;
    drop(wf);
    let (timed, _clock) = timing_recovery(&two_sps).map_err(ctx("timing recovery"))?;
    drop(two_sps);
    let frame = cma_equalize(&timed, &plan.dsp.equalizer).map_err(ctx("equalizer"))?;
    drop(timed);
    let foe = estimate_frequency_offset(&frame, &constellation).map_err(ctx("frequency offset"))?;
    let frame = correct_frequency_offset(&frame, foe).map_err(ctx("frequency offset"))?;

    let tx_bits = reference_bits(
        &bits,
        pdm_delay_symbols(PDM_DELAY_S, resolved.symbol_rate_bd),
        bits_per_symbol,
    );
    let policy = FecPolicy::default();

    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for &mode in &plan.dsp.cpr_modes {
        let recovered = match mode {
            CprMode::Bps => cpr_bps(&frame, &constellation, &plan.dsp.bps),
            CprMode::Blockwise => {
                cpr_blockwise(&frame, &constellation, plan.dsp.blockwise_block_symbols)
            }
        }
        .map_err(ctx("carrier phase recovery"))?;
        let recovered = refine_phase_dd(&recovered, &constellation).map_err(ctx("phase trim"))?;

        let rx_bits = decide_and_demap(&recovered, &constellation);
        let count = count_ber(&rx_bits, &tx_bits, &constellation).map_err(ctx("error counting"))?;
        let evm_percent = frame_evm(&recovered, &constellation).map_err(ctx("evm"))?;

        rows.push(RunRow {
            scenario: plan.name.clone(),
            sweep_axis: plan.sweep.axis,
            sweep_value: point.sweep_value,
            cpr_mode: mode,
            channel_index: point.channel_index,
            carrier_frequency_hz: resolved.comb.line_frequency(point.channel_index),
            symbol_rate_bd: resolved.symbol_rate_bd,
            modulation: plan.format.to_string(),
            osnr_db: resolved.osnr_db,
            n_symbols: plan.n_symbols,
            ber: count.ber,
            n_errors: count.n_errors,
            n_bits: count.n_bits,
            reliable: count.reliable,
            evm_percent,
            fec_class: fec_classify(count.ber, &policy),
            channel_spacing_hz: resolved.comb.fsr,
        });

        if plan.output.dump_symbols {
            let n = recovered.x.len().min(DUMP_SYMBOL_CAP);
            dumps.push((
                format!("sweep{}-ch{:02}-{}", point.sweep_index, point.channel_index, mode),
                recovered.x[..n].to_vec(),
            ));
        }
    }
    Ok((rows, dumps))
}

fn frame_evm(frame: &SymbolFrame, constellation: &Constellation) -> combdsp::Result<f64> {
    let mut all = frame.x.clone();
    all.extend_from_slice(&frame.y);
    compute_evm(&all, EvmReference::DecisionDirected, constellation)
}

/// Run every point of the plan on `threads` workers (0 = one per core).
/// Output order is fully determined by the plan, never by scheduling.
pub fn run_scenario(plan: &ScenarioPlan, threads: usize) -> AppResult<RunOutput> {
    use rayon::prelude::*;

    let points = point_list(plan);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<AppResult<_>> =
        pool.install(|| points.par_iter().map(|p| run_point(plan, p)).collect());

    let mut rows = Vec::new();
    let mut symbol_dumps = Vec::new();
    for result in results {
        let (mut point_rows, mut point_dumps) = result?;
        rows.append(&mut point_rows);
        symbol_dumps.append(&mut point_dumps);
    }
    Ok(RunOutput { rows, symbol_dumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_scenario;

    fn clean_plan_text(n_symbols: usize) -> String {
        format!(
            r#"
schema = "combdsp-scenario-v1"
name = "runner-test"

[comb]
center_frequency_hz = 193.4e12
fsr_hz = 42e9
n_lines = 1
[comb.line_noise]
white = 0.0

[modulation]
format = "qpsk"
symbol_rate_bd = 40e9
rolloff = 0.05

[sweep]
axis = "channel"
grid = [0.0]

[run]
n_symbols = {n_symbols}
base_seed = 9

[output]
dump_symbols = true
"#
        )
    }

    #[test]
    fn clean_channel_is_error_free_and_deterministic() {
        let (plan, _) = parse_scenario(&clean_plan_text(100_000), true).unwrap();
        let first = run_scenario(&plan, 1).unwrap();
        assert_eq!(first.rows.len(), 1);
        let row = &first.rows[0];
        assert_eq!(row.n_errors, 0);
        assert_eq!(row.ber, 0.0);
        assert!(row.evm_percent < 0.5, "EVM {:.3}%", row.evm_percent);
        assert!(row.fec_class.passes());
        assert_eq!(row.carrier_frequency_hz, 193.4e12);
        assert_eq!(first.symbol_dumps.len(), 1);
        assert_eq!(first.symbol_dumps[0].1.len(), DUMP_SYMBOL_CAP);

        let second = run_scenario(&plan, 1).unwrap();
        assert_eq!(first.rows[0].ber, second.rows[0].ber);
        assert_eq!(first.rows[0].evm_percent, second.rows[0].evm_percent);
        assert_eq!(first.symbol_dumps[0].1, second.symbol_dumps[0].1);
    }

    #[test]
    fn point_lists_cover_the_grid_exactly_once() {
        let (mut plan, _) = parse_scenario(&clean_plan_text(100_000), true).unwrap();
        plan.sweep.axis = SweepAxis::Osnr;
        plan.sweep.grid = vec![15.0, 20.0];
        plan.sweep.channels = vec![0];
        let points = point_list(&plan);
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].sweep_index, 0);
        assert_eq!(points[1].sweep_value, 20.0);
    }

    #[test]
    fn hold_es_n0_rescales_osnr_with_symbol_rate() {
        let (mut plan, _) = parse_scenario(&clean_plan_text(100_000), true).unwrap();
        plan.sweep.axis = SweepAxis::SymbolRate;
        plan.sweep.hold_es_n0 = true;
        plan.sweep.channels = vec![0];
        plan.impairments.osnr_db = 23.0;
        let point = Point { sweep_index: 0, sweep_value: 10e9, channel_index: 0 };
        let resolved = resolve_point(&plan, &point).unwrap();
        let expected = 23.0 + 10.0 * (10e9f64 / 40e9).log10();
        assert!((resolved.osnr_db - expected).abs() < 1e-12);
        assert_eq!(resolved.symbol_rate_bd, 10e9);
    }
}
