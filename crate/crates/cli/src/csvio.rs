//! Versioned CSV serialization for results, symbol dumps, and spectra.
//!
//! All numbers are written with Rust's shortest round-trip formatting, so a
//! file is a pure function of the data: equal runs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use combdsp::metrics::FecClass;
use num_complex::Complex64;

use crate::config::{CprMode, SweepAxis};
use crate::runner::RunRow;
use crate::{AppError, AppResult};

/// First line of a results file.
pub const RESULTS_VERSION: &str = "# combdsp-results-v1";
/// First line of a symbol dump.
pub const SYMBOLS_VERSION: &str = "# combdsp-symbols-v1";
/// First line of a spectrum file.
pub const SPECTRUM_VERSION: &str = "# combdsp-spectrum-v1";

const RESULTS_COLUMNS: &str = "scenario,sweep_axis,sweep_value,cpr_mode,channel_index,\
carrier_frequency_hz,symbol_rate_bd,modulation,osnr_db,n_symbols,ber,n_errors,n_bits,\
reliable,evm_percent,fec_overhead,channel_spacing_hz";

fn io_err(path: &Path, e: std::io::Error) -> AppError {
    AppError::Runtime(format!("{}: {e}", path.display()))
}

fn parse_err(path: &Path, line_no: usize, what: impl std::fmt::Display) -> AppError {
    AppError::Runtime(format!("{}:{line_no}: {what}", path.display()))
}

/// Serialize result rows to a deterministic CSV string.
pub fn results_to_string(rows: &[RunRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_VERSION);
    out.push('\n');
    out.push_str(RESULTS_COLUMNS);
    out.push('\n');
    for r in rows {
        let fec = match r.fec_class {
            FecClass::Pass { overhead } => format!("{overhead}"),
            FecClass::Fail => "fail".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.sweep_axis,
            r.sweep_value,
            r.cpr_mode,
            r.channel_index,
            r.carrier_frequency_hz,
            r.symbol_rate_bd,
            r.modulation,
            r.osnr_db,
            r.n_symbols,
            r.ber,
            r.n_errors,
            r.n_bits,
            r.reliable,
            r.evm_percent,
            fec,
            r.channel_spacing_hz,
        )
        .expect("string write");
    }
    out
}

pub fn write_results(path: &Path, rows: &[RunRow]) -> AppResult<()> {
    std::fs::write(path, results_to_string(rows)).map_err(|e| io_err(path, e))
}

fn field<T: FromStr>(path: &Path, line_no: usize, name: &str, raw: &str) -> AppResult<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| parse_err(path, line_no, format!("{name} '{raw}': {e}")))
}

pub fn read_results(path: &Path) -> AppResult<Vec<RunRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == RESULTS_VERSION => {}
        other => {
            return Err(parse_err(
                path,
                1,
                format!(
                    "expected results file starting with '{RESULTS_VERSION}', got '{}'",
                    other.map(|(_, l)| l).unwrap_or_default()
                ),
            ))
        }
    }
    match lines.next() {
        Some((_, header)) if header == RESULTS_COLUMNS => {}
        _ => return Err(parse_err(path, 2, "unexpected column header")),
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 17 {
            return Err(parse_err(path, line_no, format!("expected 17 fields, got {}", f.len())));
        }
        let fec_class = if f[15] == "fail" {
            FecClass::Fail
        } else {
            FecClass::Pass { overhead: field(path, line_no, "fec_overhead", f[15])? }
        };
        rows.push(RunRow {
            scenario: f[0].to_string(),
            sweep_axis: SweepAxis::from_str(f[1]).map_err(|e| parse_err(path, line_no, e))?,
            sweep_value: field(path, line_no, "sweep_value", f[2])?,
            cpr_mode: CprMode::from_str(f[3]).map_err(|e| parse_err(path, line_no, e))?,
            channel_index: field(path, line_no, "channel_index", f[4])?,
            carrier_frequency_hz: field(path, line_no, "carrier_frequency_hz", f[5])?,
            symbol_rate_bd: field(path, line_no, "symbol_rate_bd", f[6])?,
            modulation: f[7].to_string(),
            osnr_db: field(path, line_no, "osnr_db", f[8])?,
            n_symbols: field(path, line_no, "n_symbols", f[9])?,
            ber: field(path, line_no, "ber", f[10])?,
            n_errors: field(path, line_no, "n_errors", f[11])?,
            n_bits: field(path, line_no, "n_bits", f[12])?,
            reliable: field(path, line_no, "reliable", f[13])?,
            evm_percent: field(path, line_no, "evm_percent", f[14])?,
            fec_class,
            channel_spacing_hz: field(path, line_no, "channel_spacing_hz", f[16])?,
        });
    }
    Ok(rows)
}

/// Persist complex symbols as re,im rows.
pub fn write_symbols(path: &Path, symbols: &[Complex64]) -> AppResult<()> {
    let mut out = String::new();
    out.push_str(SYMBOLS_VERSION);
    out.push('\n');
    out.push_str("re,im\n");
    for s in symbols {
        writeln!(out, "{},{}", s.re, s.im).expect("string write");
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_symbols(path: &Path) -> AppResult<Vec<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == SYMBOLS_VERSION => {}
        _ => return Err(parse_err(path, 1, format!("expected '{SYMBOLS_VERSION}'"))),
    }
    lines.next(); // column header
    let mut symbols = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, idx + 1, "expected re,im"))?;
        symbols.push(Complex64::new(
            field(path, idx + 1, "re", re)?,
            field(path, idx + 1, "im", im)?,
        ));
    }
    Ok(symbols)
}

/// One named series of a frequency spectrum (e.g. raw, smoothed, model).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub name: String,
    /// (frequency in Hz, FM-noise PSD in Hz^2/Hz) pairs.
    pub points: Vec<(f64, f64)>,
}

/// Persist spectrum series in tidy form: series,frequency_hz,psd_hz2_per_hz.
pub fn write_spectrum(path: &Path, series: &[SpectrumSeries]) -> AppResult<()> {
    let mut out = String::new();
    out.push_str(SPECTRUM_VERSION);
    out.push('\n');
    out.push_str("series,frequency_hz,psd_hz2_per_hz\n");
    for s in series {
        for &(f, p) in &s.points {
            writeln!(out, "{},{},{}", s.name, f, p).expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_spectrum(path: &Path) -> AppResult<Vec<SpectrumSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == SPECTRUM_VERSION => {}
        _ => return Err(parse_err(path, 1, format!("expected '{SPECTRUM_VERSION}'"))),
    }
    lines.next(); // column header
    let mut series: Vec<SpectrumSeries> = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(path, idx + 1, "expected series,frequency,psd"));
        }
        let point =
            (field(path, idx + 1, "frequency", f[1])?, field(path, idx + 1, "psd", f[2])?);
        match series.last_mut() {
            Some(s) if s.name == f[0] => s.points.push(point),
            _ => series.push(SpectrumSeries { name: f[0].to_string(), points: vec![point] }),
        }
    }
    Ok(series)
}
