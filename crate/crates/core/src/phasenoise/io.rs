//! Ingestion of externally recorded phase or IQ data.
//!
//! Expected layout: a header comment declaring the sample rate and the
//! column interpretation, then two numeric columns separated by whitespace
//! or commas. Further `#` lines are skipped.
//!
//! ```text
//! # sample_rate_hz=2e9 columns=time_phase
//! 0.0e0   0.000
//! 5.0e-10 0.0021
//! ```
//!
//! `columns=time_phase` reads (time_s, phase_rad); the time column is checked
//! against the declared rate. `columns=iq` reads (I, Q) and unwraps the
//! phase angle.

use std::fs;
use std::path::Path;

use super::PhaseRecord;
use crate::util::unwrap_phase;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Columns {
    TimePhase,
    Iq,
}

/// Read a phase record from a two-column text file. The record's seed is 0,
/// marking it as ingested rather than synthesized.
pub fn read_phase_record(path: &Path) -> Result<PhaseRecord> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_phase_record(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_phase_record(text: &str) -> Result<PhaseRecord> {
    let mut lines = text.lines().enumerate();

    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) if l.trim_start().starts_with('#') => break l,
            Some((n, _)) => {
                return Err(Error::Parse(format!(
                    "line {}: expected '# sample_rate_hz=... columns=...' header",
                    n + 1
                )))
            }
            None => return Err(Error::Parse("empty file".into())),
        }
    };

    let mut sample_rate = None;
    let mut columns = None;
    for token in header.trim_start_matches('#').split_whitespace() {
        if let Some((key, value)) = token.split_once('=') {
            match key {
                "sample_rate_hz" => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad sample_rate_hz '{value}'")))?;
                    if !v.is_finite() || v <= 0.0 {
                        return Err(Error::Parse(format!("sample_rate_hz must be positive, got {v}")));
                    }
                    sample_rate = Some(v);
                }
                "columns" => {
                    columns = Some(match value {
                        "time_phase" => Columns::TimePhase,
                        "iq" => Columns::Iq,
                        other => {
                            return Err(Error::Parse(format!(
                                "columns must be 'time_phase' or 'iq', got '{other}'"
                            )))
                        }
                    });
                }
                _ => {} // ignore unknown header keys
            }
        }
    }
    let sample_rate =
        sample_rate.ok_or_else(|| Error::Parse("header missing sample_rate_hz".into()))?;
    let columns = columns.ok_or_else(|| Error::Parse("header missing columns".into()))?;
    let dt = 1.0 / sample_rate;

    let mut col_a = Vec::new();
    let mut col_b = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Parse(format!("line {}: expected two columns", n + 1)))?
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: not a number", n + 1)))
        };
        col_a.push(parse(it.next())?);
        col_b.push(parse(it.next())?);
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {}: more than two columns", n + 1)));
        }
    }
    if col_a.len() < 2 {
        return Err(Error::Parse(format!("need >= 2 data rows, got {}", col_a.len())));
    }

    let phases = match columns {
        Columns::TimePhase => {
            // Spot-check the time column against the declared rate.
            let span = col_a[col_a.len() - 1] - col_a[0];
            let expected = (col_a.len() - 1) as f64 * dt;
            if span <= 0.0 || (span - expected).abs() > 1e-3 * expected {
                return Err(Error::Parse(format!(
                    "time column spans {span:.6e}s but {expected:.6e}s implied by sample_rate_hz"
                )));
            }
            col_b
        }
        Columns::Iq => {
            let mut ph: Vec<f64> =
                col_a.iter().zip(&col_b).map(|(&i, &q)| q.atan2(i)).collect();
            unwrap_phase(&mut ph);
            ph
        }
    };
    PhaseRecord::new(phases, dt, 0)
}
