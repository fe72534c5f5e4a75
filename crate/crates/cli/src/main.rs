//! Command-line front end: scenario runs, phase-record characterization,
//! report rendering, and plot emission.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgAction, Parser, Subcommand};
use combdsp::phasenoise::{fit_fm_model, read_phase_record, SmoothingPolicy};

use combdsp_cli::config::{self, OutputFormat, ScenarioPlan, SweepAxis};
use combdsp_cli::csvio::{self, SpectrumSeries};
use combdsp_cli::plots::{self, PlotKind};
use combdsp_cli::report::sweep_report;
use combdsp_cli::runner::{run_scenario, RunOutput};
use combdsp_cli::scenarios;
use combdsp_cli::{AppError, AppResult};

#[derive(Parser)]
#[command(
    name = "combdsp",
    version,
    about = "Comb-based coherent WDM transmission simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a TOML file path or a bundled scenario name).
    Run {
        scenario: String,
        /// Override the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Reject unknown configuration keys.
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        strict_config: bool,
    },
    /// Fit an FM-noise model to a recorded phase or IQ trace and report
    /// linewidth figures.
    Characterize {
        /// Input record: `# sample_rate_hz=<v> columns=time_phase|iq` header,
        /// then two numeric columns.
        record: PathBuf,
        /// Where to put the spectrum CSV/SVG (default: next to the input).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Fit band as `lo:hi` in Hz (default: adapted to the record).
        #[arg(long)]
        fit_band: Option<String>,
    },
    /// Print aggregate rates for a results CSV.
    Report { results: PathBuf },
    /// Render a plot from a results, spectrum, or symbols CSV.
    Plot {
        input: PathBuf,
        /// ber_vs_osnr | ber_per_channel | evm_vs_rate | fm_spectrum | constellation
        #[arg(long)]
        kind: String,
        /// Output SVG path (default: input with .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios.
    Scenarios,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Run { scenario, seed, out_dir, threads, strict_config } => {
            cmd_run(&scenario, seed, out_dir, threads, strict_config)
        }
        Command::Characterize { record, out_dir, fit_band } => {
            cmd_characterize(&record, out_dir, fit_band.as_deref())
        }
        Command::Report { results } => {
            let rows = csvio::read_results(&results)?;
            print!("{}", sweep_report(&rows)?);
            Ok(())
        }
        Command::Plot { input, kind, out } => {
            let kind = PlotKind::from_str(&kind)?;
            let out = out.unwrap_or_else(|| input.with_extension("svg"));
            plots::emit_plot(kind, &input, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Scenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

/// Default plot for a sweep axis: what varies on x, and which family fits.
fn axis_plot_kind(axis: SweepAxis) -> PlotKind {
    match axis {
        SweepAxis::Osnr => PlotKind::BerVsOsnr,
        SweepAxis::Channel | SweepAxis::Linewidth => PlotKind::BerPerChannel,
        SweepAxis::SymbolRate => PlotKind::EvmVsRate,
    }
}

fn cmd_run(
    scenario: &str,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    threads: usize,
    strict_config: bool,
) -> AppResult<()> {
    let text = config::resolve_scenario_text(scenario)?;
    let (file, unknown) = config::deserialize_scenario(&text, strict_config)?;
    for key in &unknown {
        eprintln!("warning: ignoring unknown configuration key '{key}'");
    }
    let mut plan = file.into_plan()?;
    if let Some(seed) = seed {
        plan.base_seed = seed;
    }
    if let Some(dir) = out_dir {
        plan.output.directory = dir;
    }

    let output = run_scenario(&plan, threads)?;
    let dir = plan.output.directory.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| AppError::Runtime(format!("{}: {e}", dir.display())))?;
    write_run_artifacts(&plan, &output, &dir)?;
    print!("{}", sweep_report(&output.rows)?);
    Ok(())
}

fn write_run_artifacts(plan: &ScenarioPlan, output: &RunOutput, dir: &Path) -> AppResult<()> {
    let csv = plan.output.formats.contains(&OutputFormat::Csv);
    let svg = plan.output.formats.contains(&OutputFormat::Svg);

    if csv {
        let path = dir.join(format!("{}.csv", plan.name));
        csvio::write_results(&path, &output.rows)?;
        println!("wrote {}", path.display());
    }
    if svg && !output.rows.is_empty() {
        let kind = axis_plot_kind(plan.sweep.axis);
        let path = dir.join(format!("{}-{}.svg", plan.name, kind_slug(kind)));
        plots::plot_rows(kind, &output.rows, &path)?;
        println!("wrote {}", path.display());
    }
    for (key, symbols) in &output.symbol_dumps {
        if csv {
            let path = dir.join(format!("{}-symbols-{key}.csv", plan.name));
            csvio::write_symbols(&path, symbols)?;
            println!("wrote {}", path.display());
        }
        if svg {
            let path = dir.join(format!("{}-constellation-{key}.svg", plan.name));
            plots::plot_constellation(symbols, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn kind_slug(kind: PlotKind) -> &'static str {
    match kind {
        PlotKind::BerVsOsnr => "ber_vs_osnr",
        PlotKind::BerPerChannel => "ber_per_channel",
        PlotKind::EvmVsRate => "evm_vs_rate",
        PlotKind::FmSpectrum => "fm_spectrum",
        PlotKind::Constellation => "constellation",
    }
}

fn parse_fit_band(raw: &str) -> AppResult<(f64, f64)> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| AppError::Config(format!("fit band '{raw}' must be lo:hi in Hz")))?;
    let lo: f64 = lo.trim().parse().map_err(|_| {
        AppError::Config(format!("fit band lower edge '{lo}' is not a number"))
    })?;
    let hi: f64 = hi.trim().parse().map_err(|_| {
        AppError::Config(format!("fit band upper edge '{hi}' is not a number"))
    })?;
    if !(lo > 0.0 && hi > lo) {
        return Err(AppError::Config(format!("fit band {lo}:{hi} must satisfy 0 < lo < hi")));
    }
    Ok((lo, hi))
}

fn cmd_characterize(record: &Path, out_dir: Option<PathBuf>, fit_band: Option<&str>) -> AppResult<()> {
    let rec = read_phase_record(record).map_err(|e| AppError::Config(e.to_string()))?;
    let spectrum = rec
        .estimate_fm_spectrum()
        .map_err(|e| AppError::Runtime(format!("spectrum estimation: {e}")))?;
    let smoothed = spectrum
        .smoothed(SmoothingPolicy::default())
        .map_err(|e| AppError::Runtime(format!("spectrum smoothing: {e}")))?;
    let band = match fit_band {
        Some(raw) => parse_fit_band(raw)?,
        // Stay above the record's resolution floor and the bias-prone first
        // segment bins; stop before the Nyquist shoulder.
        None => ((5.0 / rec.duration()).max(5.0 * spectrum.frequencies()[0]), rec.sample_rate() / 8.0),
    };
    let fit = fit_fm_model(&smoothed, band)
        .map_err(|e| AppError::Runtime(format!("model fit: {e}")))?;
    let model = &fit.model;

    println!(
        "record: {} samples at {} Hz ({:.3e} s)",
        rec.phases().len(),
        rec.sample_rate(),
        rec.duration()
    );
    println!("fit band: {:.3e} .. {:.3e} Hz", fit.band_hz.0, fit.band_hz.1);
    println!("FM-noise model S(f) = white + flicker/f + random_walk/f^2:");
    println!("  white       = {:.4e} Hz^2/Hz", model.white);
    println!("  flicker     = {:.4e} Hz^2", model.flicker);
    println!("  random_walk = {:.4e} Hz^2 Hz", model.random_walk);
    println!("  residual    = {:.3} (relative RMS)", fit.residual_rms);
    println!("linewidth:");
    println!("  lorentzian (white floor) = {:.4e} Hz", model.lorentzian_linewidth());
    match model.gaussian_linewidth_report(rec.duration(), true) {
        Ok(report) => {
            println!(
                "  gaussian over {:.3e} s    = {:.4e} Hz (band {:.3e} .. {:.3e} Hz{})",
                rec.duration(),
                report.linewidth_hz,
                report.f_low_hz,
                report.f_high_hz,
                if report.reliable { "" } else { "; outside validity region" }
            );
        }
        Err(e) => println!("  gaussian over {:.3e} s unavailable: {e}", rec.duration()),
    }

    let dir = match out_dir {
        Some(dir) => dir,
        None => record.parent().unwrap_or_else(|| Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| AppError::Runtime(format!("{}: {e}", dir.display())))?;
    let stem = record
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "record".into());

    let series = vec![
        SpectrumSeries {
            name: "raw".into(),
            points: spectrum
                .frequencies()
                .iter()
                .zip(spectrum.psd())
                .map(|(&f, &p)| (f, p))
                .collect(),
        },
        SpectrumSeries {
            name: "smoothed".into(),
            points: smoothed
                .frequencies()
                .iter()
                .zip(smoothed.psd())
                .map(|(&f, &p)| (f, p))
                .collect(),
        },
        SpectrumSeries {
            name: "model".into(),
            points: smoothed.frequencies().iter().map(|&f| (f, model.psd(f))).collect(),
        },
    ];
    let csv_path = dir.join(format!("{stem}-spectrum.csv"));
    csvio::write_spectrum(&csv_path, &series)?;
    println!("wrote {}", csv_path.display());
    let svg_path = dir.join(format!("{stem}-spectrum.svg"));
    plots::plot_spectrum(&series, &svg_path)?;
    println!("wrote {}", svg_path.display());
    Ok(())
}
