//! Scenario configuration: TOML schema, validation into domain types, and
//! the shipped presets.
//!
//! Every physical quantity carries its unit in the key name (`_hz`, `_s`,
//! `_per_s`). Unknown keys are rejected with the offending location.

use serde::{Deserialize, Serialize};

use crate::echo::InputPulse;
use crate::error::{Error, Result};
use crate::holeburn::{BurnComb, BurnConfig, JitterModel};
use crate::spectral::{FrequencyGrid, HyperfineScheme, InhomogeneousLine, LineShape};

/// One-line documentation for every config key, keyed as `section.key`.
/// The CLI help text and the doc-coverage test are both built from this
/// table.
pub const CONFIG_KEY_DOCS: &[(&str, &str)] = &[
    ("scheme.preset", "named hyperfine scheme: 'pr_yso' (Pr3+:Y2SiO5 splittings and strengths)"),
    ("scheme.ground_splittings_hz", "explicit ground splittings [1/2-3/2, 3/2-5/2] in Hz (alternative to preset)"),
    ("scheme.excited_splittings_hz", "explicit excited splittings [1/2-3/2, 3/2-5/2] in Hz"),
    ("scheme.strength", "3x3 relative oscillator strengths, ground rows x excited columns; rows renormalized to 1"),
    ("line.fwhm_hz", "inhomogeneous line FWHM in Hz"),
    ("line.peak_od", "optical depth at line center for thermal populations"),
    ("line.shape", "inhomogeneous line shape: 'gaussian' or 'lorentzian'"),
    ("comb.rep_rate_hz", "comb tooth spacing in Hz; echoes recur at 1/rep_rate_hz"),
    ("comb.n_teeth_half", "teeth run from -n to +n about the comb center"),
    ("comb.center_offset_hz", "comb center relative to line center in Hz (the detuning axis)"),
    ("comb.envelope_fwhm_hz", "spectral envelope FWHM of the pump pulse train in Hz; sets tooth weights"),
    ("comb.tooth_width_hz", "per-shot interaction linewidth (Lorentzian FWHM) of each tooth in Hz"),
    ("jitter.center_amplitude_hz", "max excursion of the whole-comb frequency shift in Hz, uniform in [-a, +a], resampled every burn step"),
    ("jitter.rep_rate_amplitude_hz", "max excursion of the tooth spacing in Hz; shifts tooth m by m*delta (breathing)"),
    ("jitter.n_realizations", "number of independent jitter realizations averaged into the reported spectrum"),
    ("jitter.seed", "base RNG seed; realization r derives its own stream from (seed, r)"),
    ("burn.pump_rate_per_s", "dimensionless pump saturation parameter per second (stands in for burn power)"),
    ("burn.duration_s", "burn time in seconds"),
    ("burn.dt_s", "integration macro-step in seconds; jitter is resampled each step"),
    ("pulse.duration_fwhm_s", "probe pulse intensity FWHM in seconds (transform-limited Gaussian)"),
    ("pulse.center_offset_hz", "probe carrier offset from line center in Hz"),
    ("echo.record_min_s", "minimum time-record length; the grid must give 1/spacing at least this long"),
    ("echo.visibility_threshold", "echo counts as visible when its peak reaches this fraction of the transmitted peak"),
    ("grid.span_hz", "probe frequency grid span in Hz, centered on the line"),
    ("grid.n_points", "number of probe grid points; time step is 1/span, record is n_points/span"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_splittings_hz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excited_splittings_hz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSection {
    pub fwhm_hz: f64,
    pub peak_od: f64,
    pub shape: LineShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSection {
    pub rep_rate_hz: f64,
    pub n_teeth_half: u32,
    pub center_offset_hz: f64,
    pub envelope_fwhm_hz: f64,
    pub tooth_width_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSection {
    pub center_amplitude_hz: f64,
    pub rep_rate_amplitude_hz: f64,
    pub n_realizations: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurnSection {
    pub pump_rate_per_s: f64,
    pub duration_s: f64,
    pub dt_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub duration_fwhm_s: f64,
    pub center_offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoSection {
    pub record_min_s: f64,
    pub visibility_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub span_hz: f64,
    pub n_points: usize,
}

/// Complete scenario description as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scheme: SchemeSection,
    pub line: LineSection,
    pub comb: CombSection,
    pub jitter: JitterSection,
    pub burn: BurnSection,
    pub pulse: PulseSection,
    pub echo: EchoSection,
    pub grid: GridSection,
}

/// Config sections resolved into validated domain objects.
#[derive(Debug, Clone)]
pub struct ValidatedScenario {
    pub scheme: HyperfineScheme,
    /// Worst relative deviation of the raw strength rows from 1 before
    /// renormalization; > 0.05 deserves a warning.
    pub scheme_row_deviation: f64,
    pub line: InhomogeneousLine,
    pub comb: BurnComb,
    pub jitter: JitterModel,
    pub burn: BurnConfig,
    pub pulse: InputPulse,
    pub probe_grid: FrequencyGrid,
    pub record_min_s: f64,
    pub visibility_threshold: f64,
}

pub const PR_YSO_DEFAULT_TOML: &str = include_str!("../../../configs/pr_yso_default.toml");
pub const ECHO_LINE_CENTER_TOML: &str = include_str!("../../../configs/echo_line_center.toml");
pub const ECHO_DETUNED_8P8GHZ_TOML: &str = include_str!("../../../configs/echo_detuned_8p8ghz.toml");

/// Shipped scenario presets as `(name, toml)` pairs.
pub const PRESETS: &[(&str, &str)] = &[
    ("pr_yso_default", PR_YSO_DEFAULT_TOML),
    ("echo_line_center", ECHO_LINE_CENTER_TOML),
    ("echo_detuned_8p8ghz", ECHO_DETUNED_8P8GHZ_TOML),
];

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Load a shipped preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        for (n, text) in PRESETS {
            if *n == name {
                return Self::from_toml_str(text);
            }
        }
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Err(Error::Config(format!(
            "unknown preset {name:?}; available: {}",
            names.join(", ")
        )))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialize")
    }

    /// Resolve all sections into domain objects, running every
    /// constructor-side validation.
    pub fn validate(&self) -> Result<ValidatedScenario> {
        let (scheme, scheme_row_deviation) = self.resolve_scheme()?;
        let line = InhomogeneousLine::new(self.line.fwhm_hz, self.line.peak_od, self.line.shape)?;
        let comb = BurnComb::new(
            self.comb.rep_rate_hz,
            self.comb.n_teeth_half as usize,
            self.comb.center_offset_hz,
            self.comb.envelope_fwhm_hz,
            self.comb.tooth_width_hz,
        )?;
        let jitter = JitterModel::new(
            self.jitter.center_amplitude_hz,
            self.jitter.rep_rate_amplitude_hz,
            self.jitter.n_realizations as usize,
            self.jitter.seed,
        )?;
        let burn = BurnConfig::new(self.burn.pump_rate_per_s, self.burn.duration_s, self.burn.dt_s)?;
        let pulse = InputPulse::new(self.pulse.duration_fwhm_s, self.pulse.center_offset_hz, 1.0)?;
        let probe_grid = FrequencyGrid::new(
            0.0,
            self.grid.span_hz,
            self.grid.n_points,
            self.comb.tooth_width_hz,
        )?;

        if !(self.echo.record_min_s > 0.0) || !self.echo.record_min_s.is_finite() {
            return Err(Error::Config(format!(
                "echo.record_min_s = {}, need > 0",
                self.echo.record_min_s
            )));
        }
        let record_s = self.grid.n_points as f64 / self.grid.span_hz;
        if record_s < self.echo.record_min_s {
            return Err(Error::Config(format!(
                "grid gives a {record_s:.3e} s record, shorter than echo.record_min_s = {:.3e} s; \
                 raise grid.n_points or lower grid.span_hz",
                self.echo.record_min_s
            )));
        }
        if !(self.echo.visibility_threshold > 0.0) || !self.echo.visibility_threshold.is_finite() {
            return Err(Error::Config(format!(
                "echo.visibility_threshold = {}, need > 0",
                self.echo.visibility_threshold
            )));
        }
        let tau_s = 1.0 / self.comb.rep_rate_hz;
        if tau_s <= self.pulse.duration_fwhm_s {
            return Err(Error::Config(format!(
                "echo period 1/rep_rate = {tau_s:.3e} s must exceed the pulse duration {:.3e} s",
                self.pulse.duration_fwhm_s
            )));
        }

        Ok(ValidatedScenario {
            scheme,
            scheme_row_deviation,
            line,
            comb,
            jitter,
            burn,
            pulse,
            probe_grid,
            record_min_s: self.echo.record_min_s,
            visibility_threshold: self.echo.visibility_threshold,
        })
    }

    fn resolve_scheme(&self) -> Result<(HyperfineScheme, f64)> {
        let s = &self.scheme;
        let explicit =
            (s.ground_splittings_hz, s.excited_splittings_hz, s.strength);
        match (&s.preset, explicit) {
            (Some(name), (None, None, None)) => {
                if name == "pr_yso" {
                    Ok((HyperfineScheme::pr_yso(), 0.0))
                } else {
                    Err(Error::Config(format!(
                        "unknown scheme.preset {name:?}; available: pr_yso"
                    )))
                }
            }
            (None, (Some(g), Some(e), Some(f))) => HyperfineScheme::from_raw(g, e, f),
            (Some(_), _) => Err(Error::Config(
                "scheme: give either preset or explicit splittings+strength, not both".into(),
            )),
            (None, _) => Err(Error::Config(
                "scheme: need preset, or all of ground_splittings_hz, excited_splittings_hz, strength"
                    .into(),
            )),
        }
    }

    /// Override the jitter base seed (the CLI `--seed` flag).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.jitter.seed = seed;
        self
    }

    /// All `section.key` paths present in this config's serialized form.
    pub fn key_paths(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config to value");
        let mut keys = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(fields) = body {
                    for (field, _) in fields {
                        keys.push(format!("{section}.{field}"));
                    }
                }
            }
        }
        keys.sort();
        keys
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_toml_str(PR_YSO_DEFAULT_TOML).expect("shipped default preset parses")
    }
}
