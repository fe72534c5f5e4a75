//! Turns result rows into aggregate throughput reports.

use std::str::FromStr;

use combdsp::metrics::{aggregate_rates, ChannelResult, FecPolicy, RateSummary};
use combdsp::txdsp::ModulationFormat;

use crate::config::{CprMode, SweepAxis};
use crate::runner::RunRow;
use crate::{AppError, AppResult};

/// Aggregate over one group of channels measured under identical conditions.
#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub cpr_mode: CprMode,
    /// The sweep value shared by the group; `None` when the sweep axis is
    /// the channel itself, in which case the group spans the whole comb.
    pub sweep_value: Option<f64>,
    pub n_channels: usize,
    pub rates: RateSummary,
    /// Channels per FEC overhead, ascending overhead.
    pub pass_counts: Vec<(f64, usize)>,
    pub n_fail: usize,
    /// Channel index and BER of the worst channel in the group.
    pub worst: Option<(usize, f64)>,
}

/// Report over every group of a result set.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub scenario: String,
    pub sweep_axis: SweepAxis,
    pub groups: Vec<GroupSummary>,
}

impl SweepReport {
    /// Line and net rate summed over all groups. Meaningful when the groups
    /// partition the comb (channel sweeps); zero for an empty report.
    pub fn totals(&self) -> (f64, f64) {
        self.groups
            .iter()
            .fold((0.0, 0.0), |(l, n), g| (l + g.rates.line_rate_bps, n + g.rates.net_rate_bps))
    }
}

fn group_key(axis: SweepAxis, row: &RunRow) -> (CprMode, Option<u64>) {
    let value = (axis != SweepAxis::Channel).then(|| row.sweep_value.to_bits());
    (row.cpr_mode, value)
}

/// Group rows by (CPR mode, sweep value) in first-seen order and aggregate
/// each group; channel sweeps form one group per CPR mode.
pub fn sweep_report(rows: &[RunRow]) -> AppResult<SweepReport> {
    let (scenario, sweep_axis) = match rows.first() {
        Some(first) => (first.scenario.clone(), first.sweep_axis),
        None => {
            return Ok(SweepReport {
                scenario: String::new(),
                sweep_axis: SweepAxis::Channel,
                groups: Vec::new(),
            })
        }
    };

    let mut order: Vec<(CprMode, Option<u64>)> = Vec::new();
    for row in rows {
        if row.scenario != scenario || row.sweep_axis != sweep_axis {
            return Err(AppError::Runtime(format!(
                "rows mix scenarios or sweep axes: '{}' {} vs '{}' {}",
                scenario, sweep_axis, row.scenario, row.sweep_axis
            )));
        }
        let key = group_key(sweep_axis, row);
        if !order.contains(&key) {
            order.push(key);
        }
    }

    let policy = FecPolicy::default();
    let mut groups = Vec::new();
    for key in order {
        let members: Vec<&RunRow> =
            rows.iter().filter(|r| group_key(sweep_axis, r) == key).collect();
        let first = members[0];
        for m in &members {
            if m.symbol_rate_bd != first.symbol_rate_bd
                || m.modulation != first.modulation
                || m.channel_spacing_hz != first.channel_spacing_hz
            {
                return Err(AppError::Runtime(format!(
                    "group {} {:?} mixes symbol rates, formats, or spacings",
                    key.0,
                    key.1.map(f64::from_bits)
                )));
            }
        }
        let format = ModulationFormat::from_str(&first.modulation)
            .map_err(|e| AppError::Runtime(format!("modulation column: {e}")))?;
        let results: Vec<ChannelResult> = members
            .iter()
            .map(|r| ChannelResult {
                channel_index: r.channel_index,
                carrier_frequency_hz: r.carrier_frequency_hz,
                ber: r.ber,
                evm_percent: r.evm_percent,
                n_bits_counted: r.n_bits,
                n_errors: r.n_errors,
                fec_class: r.fec_class,
            })
            .collect();
        let rates = aggregate_rates(
            &results,
            first.symbol_rate_bd,
            format.bits_per_symbol(),
            2,
            &policy,
            first.channel_spacing_hz,
        )
        .map_err(|e| AppError::Runtime(format!("rate aggregation: {e}")))?;

        let mut pass_counts: Vec<(f64, usize)> = Vec::new();
        let mut n_fail = 0usize;
        for r in &members {
            match r.fec_class.overhead() {
                Some(oh) => match pass_counts.iter_mut().find(|(k, _)| *k == oh) {
                    Some((_, c)) => *c += 1,
                    None => pass_counts.push((oh, 1)),
                },
                None => n_fail += 1,
            }
        }
        pass_counts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let worst = members
            .iter()
            .max_by(|a, b| a.ber.total_cmp(&b.ber))
            .map(|r| (r.channel_index, r.ber));

        groups.push(GroupSummary {
            cpr_mode: key.0,
            sweep_value: key.1.map(f64::from_bits),
            n_channels: members.len(),
            rates,
            pass_counts,
            n_fail,
            worst,
        });
    }
    Ok(SweepReport { scenario, sweep_axis, groups })
}

impl std::fmt::Display for SweepReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.groups.is_empty() {
            writeln!(f, "no results: line 0.000 Tbit/s, net 0.000 Tbit/s")?;
            return Ok(());
        }
        writeln!(f, "scenario {}: sweep over {}", self.scenario, self.sweep_axis)?;
        for g in &self.groups {
            let value = match g.sweep_value {
                Some(v) => format!("{}={v}", self.sweep_axis),
                None => "all-channels".to_string(),
            };
            let mut classes = g
                .pass_counts
                .iter()
                .map(|(oh, n)| format!("pass[{}%]={n}", oh * 100.0))
                .collect::<Vec<_>>()
                .join(" ");
            if classes.is_empty() {
                classes = "pass=0".to_string();
            }
            let worst = match g.worst {
                Some((ch, ber)) => format!("worst ch{ch} ber {ber:.3e}"),
                None => "worst n/a".to_string(),
            };
            writeln!(
                f,
                "  {:9} {:18} n={:<3} {} fail={}  {}  line {:.3} Tbit/s  net {:.3} Tbit/s  net-SE {:.2} bit/s/Hz",
                g.cpr_mode.to_string(),
                value,
                g.n_channels,
                classes,
                g.n_fail,
                worst,
                g.rates.line_rate_bps / 1e12,
                g.rates.net_rate_bps / 1e12,
                g.rates.net_spectral_efficiency,
            )?;
        }
        let (line, net) = self.totals();
        writeln!(f, "  total: line {:.3} Tbit/s, net {:.3} Tbit/s", line / 1e12, net / 1e12)
    }
}
