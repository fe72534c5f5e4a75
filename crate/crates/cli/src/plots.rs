//! SVG plot emission for result rows, spectra, and constellations.

use std::path::Path;
use std::str::FromStr;

use combdsp::metrics::FecPolicy;
use num_complex::Complex64;
use plotters::prelude::*;

use crate::config::SweepAxis;
use crate::csvio::{self, SpectrumSeries};
use crate::runner::RunRow;
use crate::{AppError, AppResult};

const SIZE: (u32, u32) = (800, 600);

/// Plot families the CLI can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// BER curves over OSNR, one series per (CPR mode, channel).
    BerVsOsnr,
    /// BER across the comb, one series per (CPR mode, sweep value).
    BerPerChannel,
    /// EVM over symbol rate, one series per (CPR mode, channel).
    EvmVsRate,
    /// FM-noise PSD series on log-log axes.
    FmSpectrum,
    /// Scatter of recovered symbols.
    Constellation,
}

impl FromStr for PlotKind {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        match s {
            "ber_vs_osnr" => Ok(Self::BerVsOsnr),
            "ber_per_channel" => Ok(Self::BerPerChannel),
            "evm_vs_rate" => Ok(Self::EvmVsRate),
            "fm_spectrum" => Ok(Self::FmSpectrum),
            "constellation" => Ok(Self::Constellation),
            other => Err(AppError::Config(format!(
                "unknown plot kind '{other}' (expected ber_vs_osnr | ber_per_channel | \
                 evm_vs_rate | fm_spectrum | constellation)"
            ))),
        }
    }
}

/// Render `kind` from a CSV input (results, spectrum, or symbols file,
/// matching the kind) into an SVG.
pub fn emit_plot(kind: PlotKind, input: &Path, output: &Path) -> AppResult<()> {
    match kind {
        PlotKind::BerVsOsnr | PlotKind::BerPerChannel | PlotKind::EvmVsRate => {
            let rows = csvio::read_results(input)?;
            plot_rows(kind, &rows, output)
        }
        PlotKind::FmSpectrum => {
            let series = csvio::read_spectrum(input)?;
            plot_spectrum(&series, output)
        }
        PlotKind::Constellation => {
            let symbols = csvio::read_symbols(input)?;
            plot_constellation(&symbols, output)
        }
    }
}

fn draw_err(path: &Path, e: impl std::fmt::Display) -> AppError {
    AppError::Runtime(format!("plot {}: {e}", path.display()))
}

/// A measured BER of zero cannot sit on a log axis; show it at the binomial
/// upper-bound scale for the counted bits instead.
fn plottable_ber(row: &RunRow) -> f64 {
    if row.ber > 0.0 {
        row.ber
    } else {
        0.25 / row.n_bits.max(4) as f64
    }
}

/// Series key and label for a row under a given plot kind.
fn series_key(kind: PlotKind, row: &RunRow) -> (String, f64, f64) {
    match kind {
        PlotKind::BerVsOsnr => (
            format!("{} ch{}", row.cpr_mode, row.channel_index),
            row.osnr_db,
            plottable_ber(row),
        ),
        PlotKind::BerPerChannel => {
            let label = if row.sweep_axis == SweepAxis::Channel {
                row.cpr_mode.to_string()
            } else {
                format!("{} {}={}", row.cpr_mode, row.sweep_axis, row.sweep_value)
            };
            (label, row.channel_index as f64, plottable_ber(row))
        }
        PlotKind::EvmVsRate => (
            format!("{} ch{}", row.cpr_mode, row.channel_index),
            row.symbol_rate_bd / 1e9,
            row.evm_percent,
        ),
    PlotKind::FmSpectrum | PlotKind::Constellation => unreachable!("not a row plot"),
    }
}

/// Group rows into named series in first-seen order.
fn collect_series(kind: PlotKind, rows: &[RunRow]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let (label, x, y) = series_key(kind, row);
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((x, y)),
            None => series.push((label, vec![(x, y)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        (lo - 0.5 - lo.abs() * 0.1, hi + 0.5 + hi.abs() * 0.1)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// Render BER or EVM result rows.
pub fn plot_rows(kind: PlotKind, rows: &[RunRow], output: &Path) -> AppResult<()> {
    if rows.is_empty() {
        return Err(AppError::Config("no rows to plot".into()));
    }
    let series = collect_series(kind, rows);
    let (x_lo, x_hi) = padded_range(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let y_values = || series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (title, x_desc, y_desc) = match kind {
        PlotKind::BerVsOsnr => ("bit error rate over OSNR", "OSNR (dB / 12.5 GHz)", "BER"),
        PlotKind::BerPerChannel => ("bit error rate per channel", "channel index", "BER"),
        PlotKind::EvmVsRate => ("EVM over symbol rate", "symbol rate (GBd)", "EVM (%)"),
        _ => unreachable!(),
    };

    let root = SVGBackend::new(output, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(output, e))?;

    if matches!(kind, PlotKind::BerVsOsnr | PlotKind::BerPerChannel) {
        let (y_min, y_max) = y_values().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let y_lo = (y_min / 3.0).max(1e-12);
        let y_hi = (y_max * 3.0).max(3e-2);
        let mut chart = ChartBuilder::on(&root)
            .margin(12)
            .caption(title, ("sans-serif", 22))
            .x_label_area_size(42)
            .y_label_area_size(64)
            .build_cartesian_2d(x_lo..x_hi, (y_lo..y_hi).log_scale())
            .map_err(|e| draw_err(output, e))?;
        chart
            .configure_mesh()
            .x_desc(x_desc)
            .y_desc(y_desc)
            .draw()
            .map_err(|e| draw_err(output, e))?;
        for (idx, (label, points)) in series.iter().enumerate() {
            let color = Palette99::pick(idx).mix(0.9);
            chart
                .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                .map_err(|e| draw_err(output, e))?
                .label(label.clone())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                });
            chart
                .draw_series(
                    points.iter().map(|&(x, y)| {
                        Circle::new((x, y), 3, Palette99::pick(idx).filled())
                    }),
                )
                .map_err(|e| draw_err(output, e))?;
        }
        for (t_idx, &(threshold, overhead)) in
            FecPolicy::default().thresholds().iter().enumerate()
        {
            if threshold > y_lo && threshold < y_hi {
                let style = BLACK.mix(0.6).stroke_width(1);
                chart
                    .draw_series(LineSeries::new(
                        [(x_lo, threshold), (x_hi, threshold)],
                        style,
                    ))
                    .map_err(|e| draw_err(output, e))?
                    .label(format!("FEC limit {}% overhead", overhead * 100.0))
                    .legend(move |(x, y)| {
                        let _ = t_idx;
                        PathElement::new(vec![(x, y), (x + 18, y)], BLACK.mix(0.6))
                    });
            }
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.85))
            .draw()
            .map_err(|e| draw_err(output, e))?;
    } else {
        let (y_lo, y_hi) = padded_range(y_values());
        let mut chart = ChartBuilder::on(&root)
            .margin(12)
            .caption(title, ("sans-serif", 22))
            .x_label_area_size(42)
            .y_label_area_size(64)
            .build_cartesian_2d(x_lo..x_hi, y_lo.max(0.0)..y_hi)
            .map_err(|e| draw_err(output, e))?;
        chart
            .configure_mesh()
            .x_desc(x_desc)
            .y_desc(y_desc)
            .draw()
            .map_err(|e| draw_err(output, e))?;
        for (idx, (label, points)) in series.iter().enumerate() {
            let color = Palette99::pick(idx).mix(0.9);
            chart
                .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                .map_err(|e| draw_err(output, e))?
                .label(label.clone())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                });
            chart
                .draw_series(
                    points.iter().map(|&(x, y)| {
                        Circle::new((x, y), 3, Palette99::pick(idx).filled())
                    }),
                )
                .map_err(|e| draw_err(output, e))?;
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.85))
            .draw()
            .map_err(|e| draw_err(output, e))?;
    }
    root.present().map_err(|e| draw_err(output, e))
}

/// Render FM-noise PSD series on log-log axes.
pub fn plot_spectrum(series: &[SpectrumSeries], output: &Path) -> AppResult<()> {
    let positive: Vec<SpectrumSeries> = series
        .iter()
        .map(|s| SpectrumSeries {
            name: s.name.clone(),
            points: s.points.iter().copied().filter(|&(f, p)| f > 0.0 && p > 0.0).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    if positive.is_empty() {
        return Err(AppError::Config("no positive spectrum points to plot".into()));
    }
    let (f_lo, f_hi) = padded_range(positive.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let p_min = positive
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(f64::INFINITY, f64::min);
    let p_max = positive
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max);

    let root = SVGBackend::new(output, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(output, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .caption("FM-noise power spectral density", ("sans-serif", 22))
        .x_label_area_size(42)
        .y_label_area_size(70)
        .build_cartesian_2d(
            (f_lo.max(1e-3)..f_hi).log_scale(),
            (p_min / 3.0..p_max * 3.0).log_scale(),
        )
        .map_err(|e| draw_err(output, e))?;
    chart
        .configure_mesh()
        .x_desc("frequency (Hz)")
        .y_desc("S_f (Hz^2/Hz)")
        .draw()
        .map_err(|e| draw_err(output, e))?;
    for (idx, s) in positive.iter().enumerate() {
        let color = Palette99::pick(idx).mix(0.9);
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw_err(output, e))?
            .label(s.name.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()
        .map_err(|e| draw_err(output, e))?;
    root.present().map_err(|e| draw_err(output, e))
}

/// Scatter recovered symbols on a square complex plane.
pub fn plot_constellation(symbols: &[Complex64], output: &Path) -> AppResult<()> {
    if symbols.is_empty() {
        return Err(AppError::Config("no symbols to plot".into()));
    }
    let extent = symbols
        .iter()
        .map(|s| s.re.abs().max(s.im.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0)
        * 1.1;
    let root = SVGBackend::new(output, (600, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(output, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .caption("recovered constellation", ("sans-serif", 22))
        .x_label_area_size(42)
        .y_label_area_size(50)
        .build_cartesian_2d(-extent..extent, -extent..extent)
        .map_err(|e| draw_err(output, e))?;
    chart
        .configure_mesh()
        .x_desc("in-phase")
        .y_desc("quadrature")
        .draw()
        .map_err(|e| draw_err(output, e))?;
    chart
        .draw_series(
            symbols.iter().map(|s| Circle::new((s.re, s.im), 1, BLUE.mix(0.35).filled())),
        )
        .map_err(|e| draw_err(output, e))?;
    root.present().map_err(|e| draw_err(output, e))
}
