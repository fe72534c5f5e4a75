//! Scenario configuration: a TOML schema with strict unknown-key checking,
//! validated into a ready-to-run plan built from library types.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use combdsp::channel::LinkSpec;
use combdsp::comb::CombSpec;
use combdsp::phasenoise::FmNoiseModel;
use combdsp::rxdsp::{BpsConfig, EqualizerConfig};
use combdsp::txdsp::{ModulationFormat, PulseShape};
use serde::Deserialize;

use crate::scenarios;
use crate::{AppError, AppResult};

/// Schema tag every scenario file must carry.
pub const SCENARIO_SCHEMA: &str = "combdsp-scenario-v1";

/// Fewest symbols that make a BER figure worth recording.
pub const MIN_SYMBOLS: usize = 100_000;

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioFile {
    pub schema: String,
    pub name: String,
    pub comb: CombSection,
    pub modulation: ModulationSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub impairments: ImpairmentsSection,
    #[serde(default)]
    pub dsp: DspSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CombSection {
    pub center_frequency_hz: f64,
    pub fsr_hz: f64,
    pub n_lines: usize,
    #[serde(default)]
    pub envelope_db: Vec<f64>,
    /// Carrier-to-noise ratio per line in dB (12.5 GHz reference); `inf`
    /// disables the carrier noise floor.
    #[serde(default = "inf")]
    pub ocnr_db: f64,
    pub line_noise: NoiseSection,
}

/// FM-noise model of the carrier: white floor in Hz^2/Hz plus 1/f and 1/f^2
/// terms (coefficients at 1 Hz).
#[derive(Debug, Clone, Deserialize, Default)]
pub struct NoiseSection {
    #[serde(default)]
    pub white: f64,
    #[serde(default)]
    pub flicker: f64,
    #[serde(default)]
    pub random_walk: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModulationSection {
    /// "qpsk" or "qam16".
    pub format: String,
    pub symbol_rate_bd: f64,
    pub rolloff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct LinkSection {
    pub fiber_length_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub reference_wavelength_nm: f64,
    /// Apply the inverse dispersion response at the receiver.
    pub compensate_dispersion: bool,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            fiber_length_km: 0.0,
            dispersion_ps_nm_km: 17.0,
            reference_wavelength_nm: 1550.0,
            compensate_dispersion: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ImpairmentsSection {
    /// Signal-to-noise ratio after noise loading, dB in 12.5 GHz; `inf`
    /// disables loading.
    pub osnr_db: f64,
    /// Linear OSNR tilt across the grid, dB per THz offset from the comb
    /// center.
    pub osnr_tilt_db_per_thz: f64,
    pub polarization_rotation_deg: f64,
    /// Residual carrier/LO frequency offset seen by the receiver.
    pub frequency_offset_hz: f64,
    /// Local oscillator linewidth (Lorentzian), Hz; 0 means an ideal LO.
    pub lo_linewidth_hz: f64,
}

impl Default for ImpairmentsSection {
    fn default() -> Self {
        Self {
            osnr_db: f64::INFINITY,
            osnr_tilt_db_per_thz: 0.0,
            polarization_rotation_deg: 0.0,
            frequency_offset_hz: 0.0,
            lo_linewidth_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DspSection {
    /// "bps", "blockwise", or "both".
    pub cpr_mode: String,
    pub equalizer_taps: usize,
    pub equalizer_step_size: f64,
    pub equalizer_training_passes: usize,
    pub bps_test_phases: usize,
    pub bps_window_symbols: usize,
    pub blockwise_block_symbols: usize,
}

impl Default for DspSection {
    fn default() -> Self {
        let eq = EqualizerConfig::default();
        let bps = BpsConfig::default();
        Self {
            cpr_mode: "bps".into(),
            equalizer_taps: eq.n_taps,
            equalizer_step_size: eq.step_size,
            equalizer_training_passes: eq.n_training_passes,
            bps_test_phases: bps.n_test_phases,
            bps_window_symbols: bps.window_n,
            blockwise_block_symbols: 1024,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepSection {
    /// "channel", "osnr", "symbol_rate", or "linewidth".
    pub axis: String,
    pub grid: Vec<f64>,
    /// Channels to run per sweep point (ignored for the channel axis);
    /// empty means every comb line.
    #[serde(default)]
    pub channels: Vec<usize>,
    /// For the symbol_rate axis: "osnr" keeps the configured OSNR fixed,
    /// "es_n0" rescales OSNR with symbol rate so the per-symbol SNR stays
    /// constant across the grid.
    #[serde(default)]
    pub hold: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub n_symbols: usize,
    pub base_seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { n_symbols: 400_000, base_seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub directory: String,
    /// "csv" and/or "svg".
    pub formats: Vec<String>,
    /// Also persist recovered symbols (for constellation plots).
    pub dump_symbols: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "results".into(), formats: vec!["csv".into(), "svg".into()], dump_symbols: false }
    }
}

fn inf() -> f64 {
    f64::INFINITY
}

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Channel,
    Osnr,
    SymbolRate,
    Linewidth,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Channel => "channel",
            SweepAxis::Osnr => "osnr",
            SweepAxis::SymbolRate => "symbol_rate",
            SweepAxis::Linewidth => "linewidth",
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "channel" => Ok(Self::Channel),
            "osnr" => Ok(Self::Osnr),
            "symbol_rate" => Ok(Self::SymbolRate),
            "linewidth" => Ok(Self::Linewidth),
            other => Err(format!(
                "sweep.axis must be channel | osnr | symbol_rate | linewidth, got '{other}'"
            )),
        }
    }
}

/// Carrier phase recovery flavor used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CprMode {
    Bps,
    Blockwise,
}

impl CprMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CprMode::Bps => "bps",
            CprMode::Blockwise => "blockwise",
        }
    }
}

impl std::fmt::Display for CprMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CprMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bps" => Ok(Self::Bps),
            "blockwise" => Ok(Self::Blockwise),
            other => Err(format!("cpr mode must be bps | blockwise, got '{other}'")),
        }
    }
}

/// Output file formats a scenario may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
}

/// Channel impairment settings resolved into simulation units.
#[derive(Debug, Clone)]
pub struct ImpairmentPlan {
    pub osnr_db: f64,
    pub osnr_tilt_db_per_thz: f64,
    pub polarization_rotation_rad: f64,
    pub frequency_offset_hz: f64,
    pub lo_model: FmNoiseModel,
}

/// Receiver DSP settings for a run.
#[derive(Debug, Clone)]
pub struct DspPlan {
    pub equalizer: EqualizerConfig,
    pub bps: BpsConfig,
    pub cpr_modes: Vec<CprMode>,
    pub blockwise_block_symbols: usize,
}

/// Sweep definition with resolved channel lists.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Channels run at every sweep point (for non-channel axes).
    pub channels: Vec<usize>,
    /// Rescale OSNR with symbol rate to hold per-symbol SNR.
    pub hold_es_n0: bool,
}

#[derive(Debug, Clone)]
pub struct OutputPlan {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub dump_symbols: bool,
}

/// A fully validated scenario, ready for the runner.
#[derive(Debug, Clone)]
pub struct ScenarioPlan {
    pub name: String,
    pub comb: CombSpec,
    pub format: ModulationFormat,
    pub symbol_rate_bd: f64,
    pub shape: PulseShape,
    pub link: LinkSpec,
    pub compensate_dispersion: bool,
    pub impairments: ImpairmentPlan,
    pub dsp: DspPlan,
    pub sweep: SweepPlan,
    pub n_symbols: usize,
    pub base_seed: u64,
    pub output: OutputPlan,
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl ScenarioFile {
    /// Validate every section and assemble the run plan.
    pub fn into_plan(self) -> AppResult<ScenarioPlan> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(bad(format!(
                "schema must be '{SCENARIO_SCHEMA}', got '{}'",
                self.schema
            )));
        }
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        {
            return Err(bad(format!(
                "name '{}' must be non-empty lowercase [a-z0-9-] (it is used in file names)",
                self.name
            )));
        }

        let line_noise =
            FmNoiseModel::new(
                self.comb.line_noise.white,
                self.comb.line_noise.flicker,
                self.comb.line_noise.random_walk,
            )
            .map_err(|e| bad(format!("comb.line_noise: {e}")))?;
        let comb = CombSpec {
            center_frequency: self.comb.center_frequency_hz,
            fsr: self.comb.fsr_hz,
            n_lines: self.comb.n_lines,
            envelope_db: self.comb.envelope_db,
            line_noise,
            ocnr_db: self.comb.ocnr_db,
        };

        let format = ModulationFormat::from_str(&self.modulation.format)
            .map_err(|e| bad(format!("modulation.format: {e}")))?;
        if !(self.modulation.symbol_rate_bd.is_finite() && self.modulation.symbol_rate_bd > 0.0) {
            return Err(bad("modulation.symbol_rate_bd must be positive"));
        }
        if !(self.modulation.rolloff > 0.0 && self.modulation.rolloff <= 1.0) {
            return Err(bad(format!(
                "modulation.rolloff must be in (0, 1], got {}",
                self.modulation.rolloff
            )));
        }
        let shape = PulseShape { rolloff: self.modulation.rolloff, ..PulseShape::for_format(format) };

        if self.link.fiber_length_km < 0.0 {
            return Err(bad("link.fiber_length_km must be >= 0"));
        }
        let link = LinkSpec {
            fiber_length_m: self.link.fiber_length_km * 1e3,
            dispersion_ps_nm_km: self.link.dispersion_ps_nm_km,
            reference_wavelength_m: self.link.reference_wavelength_nm * 1e-9,
        };

        let lo_model = if self.impairments.lo_linewidth_hz > 0.0 {
            FmNoiseModel::from_lorentzian_linewidth(self.impairments.lo_linewidth_hz)
                .map_err(|e| bad(format!("impairments.lo_linewidth_hz: {e}")))?
        } else {
            FmNoiseModel::zero()
        };
        if self.impairments.osnr_db.is_nan() {
            return Err(bad("impairments.osnr_db must not be NaN"));
        }
        let impairments = ImpairmentPlan {
            osnr_db: self.impairments.osnr_db,
            osnr_tilt_db_per_thz: self.impairments.osnr_tilt_db_per_thz,
            polarization_rotation_rad: self.impairments.polarization_rotation_deg.to_radians(),
            frequency_offset_hz: self.impairments.frequency_offset_hz,
            lo_model,
        };

        let cpr_modes = match self.dsp.cpr_mode.as_str() {
            "both" => vec![CprMode::Bps, CprMode::Blockwise],
            single => vec![CprMode::from_str(single).map_err(|e| bad(format!("dsp.cpr_mode: {e}")))?],
        };
        let equalizer = EqualizerConfig {
            n_taps: self.dsp.equalizer_taps,
            step_size: self.dsp.equalizer_step_size,
            n_training_passes: self.dsp.equalizer_training_passes,
        };
        let bps = BpsConfig {
            n_test_phases: self.dsp.bps_test_phases,
            window_n: self.dsp.bps_window_symbols,
            ..BpsConfig::default()
        };
        if self.dsp.blockwise_block_symbols < 64 {
            return Err(bad("dsp.blockwise_block_symbols must be >= 64"));
        }
        let dsp = DspPlan {
            equalizer,
            bps,
            cpr_modes,
            blockwise_block_symbols: self.dsp.blockwise_block_symbols,
        };

        let axis =
            SweepAxis::from_str(&self.sweep.axis).map_err(|e| bad(format!("sweep.axis: {e}")))?;
        if self.sweep.grid.is_empty() {
            return Err(bad("sweep.grid must not be empty"));
        }
        for &v in &self.sweep.grid {
            if !v.is_finite() {
                return Err(bad(format!("sweep.grid value {v} is not finite")));
            }
            match axis {
                SweepAxis::Channel => {
                    if v.fract() != 0.0 || v < 0.0 || v as usize >= comb.n_lines {
                        return Err(bad(format!(
                            "channel sweep value {v} must be an integer in [0, {})",
                            comb.n_lines
                        )));
                    }
                }
                SweepAxis::SymbolRate | SweepAxis::Linewidth => {
                    if v <= 0.0 {
                        return Err(bad(format!("{axis} sweep values must be positive, got {v}")));
                    }
                }
                SweepAxis::Osnr => {}
            }
        }
        let channels = if axis == SweepAxis::Channel {
            if !self.sweep.channels.is_empty() {
                return Err(bad("sweep.channels is redundant when the axis is channel"));
            }
            Vec::new()
        } else if self.sweep.channels.is_empty() {
            (0..comb.n_lines).collect()
        } else {
            for &c in &self.sweep.channels {
                if c >= comb.n_lines {
                    return Err(bad(format!(
                        "sweep.channels entry {c} is outside the {}-line comb",
                        comb.n_lines
                    )));
                }
            }
            self.sweep.channels
        };
        let hold_es_n0 = match self.sweep.hold.as_deref() {
            None | Some("osnr") => false,
            Some("es_n0") => {
                if axis != SweepAxis::SymbolRate {
                    return Err(bad("sweep.hold = \"es_n0\" only applies to the symbol_rate axis"));
                }
                true
            }
            Some(other) => return Err(bad(format!("sweep.hold must be osnr | es_n0, got '{other}'"))),
        };
        let sweep = SweepPlan { axis, grid: self.sweep.grid, channels, hold_es_n0 };

        if self.run.n_symbols < MIN_SYMBOLS {
            return Err(bad(format!(
                "run.n_symbols must be >= {MIN_SYMBOLS} for error counting, got {}",
                self.run.n_symbols
            )));
        }

        let mut formats = Vec::new();
        for f in &self.output.formats {
            match f.as_str() {
                "csv" => formats.push(OutputFormat::Csv),
                "svg" => formats.push(OutputFormat::Svg),
                other => return Err(bad(format!("output.formats: unknown format '{other}'"))),
            }
        }
        let output = OutputPlan {
            directory: PathBuf::from(self.output.directory),
            formats,
            dump_symbols: self.output.dump_symbols,
        };

        Ok(ScenarioPlan {
            name: self.name,
            comb,
            format,
            symbol_rate_bd: self.modulation.symbol_rate_bd,
            shape,
            link,
            compensate_dispersion: self.link.compensate_dispersion,
            impairments,
            dsp,
            sweep,
            n_symbols: self.run.n_symbols,
            base_seed: self.run.base_seed,
            output,
        })
    }
}

/// Deserialize scenario TOML without validating it, so callers can surface
/// ignored-key warnings even when validation later rejects the plan. Returns
/// the raw file and the unknown keys; in strict mode any unknown key is an
/// error.
pub fn deserialize_scenario(text: &str, strict: bool) -> AppResult<(ScenarioFile, Vec<String>)> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| AppError::Config(format!("TOML syntax: {e}")))?;
    let mut unknown = Vec::new();
    let file: ScenarioFile = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| AppError::Config(e.to_string()))?;
    if strict && !unknown.is_empty() {
        return Err(AppError::Config(format!(
            "unknown configuration keys (strict mode): {}",
            unknown.join(", ")
        )));
    }
    Ok((file, unknown))
}

/// Parse and validate scenario TOML. Returns the plan and the list of
/// unknown keys; in strict mode any unknown key is an error.
pub fn parse_scenario(text: &str, strict: bool) -> AppResult<(ScenarioPlan, Vec<String>)> {
    let (file, unknown) = deserialize_scenario(text, strict)?;
    Ok((file.into_plan()?, unknown))
}

/// Resolve a scenario argument to TOML text: an existing file path wins,
/// otherwise a bundled scenario of that name.
pub fn resolve_scenario_text(spec: &str) -> AppResult<String> {
    let path = Path::new(spec);
    if path.is_file() {
        std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    } else if let Some(bundled) = scenarios::bundled(spec) {
        Ok(bundled.to_string())
    } else {
        Err(AppError::Config(format!(
            "'{spec}' is neither a readable file nor a bundled scenario (available: {})",
            scenarios::names().join(", ")
        )))
    }
}

/// Load a scenario from a file path, or fall back to a bundled scenario of
/// that name.
pub fn load_scenario(spec: &str, strict: bool) -> AppResult<(ScenarioPlan, Vec<String>)> {
    parse_scenario(&resolve_scenario_text(spec)?, strict)
}
