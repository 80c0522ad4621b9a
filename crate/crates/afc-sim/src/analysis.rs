//! Scenario pipeline (reset, burn, render, propagate, measure) and
//! parameter sweeps.
//!
//! A scenario run is deterministic given the config and seed. Sweeps derive
//! one seed per value from the value's bit pattern, so a row's result
//! depends only on its value and the base config, never on row order or
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::echo::{
    average_traces, extract_metrics, propagate_spectrum, pulse_spectrum, spectral_energy,
    transfer_from_od, EchoMetrics, EchoTrace,
};
use crate::error::{Error, Result};
use crate::holeburn::{
    average_fields, burn_realizations, comb_contrast, hole_width, od_from_populations,
    thermal_populations, BurnComb, BurnConfig, PopulationField,
};
use crate::numerics::{derive_seed_for_value, pairwise_sum_by};
use crate::spectral::{FrequencyGrid, OpticalDepthProfile};

/// Classes extend this many comb periods beyond the outermost tooth, so
/// pump tails, hyperfine offsets and jitter excursions stay on the grid.
pub const CLASS_GUARD_PERIODS: f64 = 10.0;

/// Contrast is measured over this many comb periods around the comb center.
pub const CONTRAST_WINDOW_PERIODS: f64 = 5.0;

/// Depth-averaged pump attenuation through a medium of optical depth `od`:
/// mean of exp(-od*z/L) over the crystal length, (1 - e^-od)/od. The burn
/// model itself is thin-medium; this factor carries the one thick-medium
/// effect that matters for the detuning trend, the weaker pumping where the
/// line is opaque.
pub fn pump_depth_factor(od: f64) -> f64 {
    if od < 1e-9 {
        1.0 - od / 2.0
    } else {
        (1.0 - (-od).exp()) / od
    }
}

/// Class grid for a comb: spacing tooth_width/4 (discrete-class render
/// ripple below 1e-5 of the OD), extending `CLASS_GUARD_PERIODS` periods
/// past the outermost teeth.
pub fn class_grid_for(comb: &BurnComb) -> Result<FrequencyGrid> {
    let half_span = (comb.n_teeth_half() as f64 + CLASS_GUARD_PERIODS) * comb.rep_rate_hz();
    let spacing = comb.tooth_width_hz() / 4.0;
    let n = (2.0 * half_span / spacing).ceil() as usize + 2;
    FrequencyGrid::new(comb.center_offset_hz(), 2.0 * half_span, n, 4.0 * comb.tooth_width_hz())
}

/// Per-realization summary used for Monte-Carlo error bars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationStats {
    pub contrast: f64,
    pub eta_total: f64,
}

/// Everything a single scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    /// Optical depth averaged over jitter realizations.
    pub profile: OpticalDepthProfile,
    pub trace: EchoTrace,
    pub metrics: EchoMetrics,
    /// Comb contrast of the averaged profile over the contrast window.
    pub contrast: f64,
    /// Narrowest measurable hole among the five teeth nearest the comb
    /// center; None when no tooth shows a resolvable hole.
    pub hole_width_hz: Option<f64>,
    /// Peak OD inside the contrast window.
    pub peak_od: f64,
    pub contrast_stderr: f64,
    pub eta_total_stderr: f64,
    pub per_realization: Vec<RealizationStats>,
    /// Population field averaged over realizations.
    pub field: PopulationField,
}

/// Reset, burn and render: the spectrum half of a scenario.
pub struct BurnOutcome {
    pub profile: OpticalDepthProfile,
    pub field: PopulationField,
    pub realization_profiles: Vec<OpticalDepthProfile>,
}

pub fn run_burn(cfg: &ScenarioConfig) -> Result<BurnOutcome> {
    let v = cfg.validate().map_err(|e| e.at_stage("config"))?;
    let class_grid = class_grid_for(&v.comb).map_err(|e| e.at_stage("config"))?;
    let thermal = thermal_populations(&class_grid);

    let effective = BurnConfig::new(
        v.burn.pump_rate_per_s * pump_depth_factor(v.line.od_at(v.comb.center_offset_hz())),
        v.burn.duration_s,
        v.burn.dt_s,
    )
    .map_err(|e| e.at_stage("config"))?;

    let fields = burn_realizations(&thermal, &v.comb, &v.jitter, &effective, &v.scheme)
        .map_err(|e| e.at_stage("burn"))?;
    let field = average_fields(&fields).map_err(|e| e.at_stage("burn"))?;

    let render = |f: &PopulationField| {
        od_from_populations(f, &v.scheme, &v.line, &v.probe_grid, v.comb.tooth_width_hz())
    };
    let profile = render(&field).map_err(|e| e.at_stage("render"))?;
    let realization_profiles = fields
        .iter()
        .map(render)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("render"))?;

    Ok(BurnOutcome { profile, field, realization_profiles })
}

/// Propagate the configured pulse through a rendered profile and slice the
/// echo train into metrics.
pub fn echo_through(
    cfg: &ScenarioConfig,
    profile: &OpticalDepthProfile,
) -> Result<(EchoTrace, EchoMetrics)> {
    let v = cfg.validate().map_err(|e| e.at_stage("config"))?;
    let tf = transfer_from_od(profile).map_err(|e| e.at_stage("transfer"))?;
    let spec = pulse_spectrum(&v.pulse, &tf.grid).map_err(|e| e.at_stage("propagate"))?;
    let trace = propagate_spectrum(&spec, &tf).map_err(|e| e.at_stage("propagate"))?;
    let tau_s = 1.0 / v.comb.rep_rate_hz();
    let metrics = extract_metrics(&trace, tau_s, spectral_energy(&spec), v.visibility_threshold)
        .map_err(|e| e.at_stage("metrics"))?;
    Ok((trace, metrics))
}

/// Full pipeline: thermal reset, jittered burn, OD rendering, pulse
/// propagation and metric extraction. Deterministic given config and seed.
///
/// Echo metrics are taken from the shot-averaged intensity trace (each
/// realization is propagated separately, then the traces are averaged), while
/// spectrum metrics come from the realization-averaged OD profile.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let v = cfg.validate().map_err(|e| e.at_stage("config"))?;
    let burn_out = run_burn(cfg)?;

    let (w_center, w_width, period) = contrast_window(&v.comb);
    let contrast = comb_contrast(&burn_out.profile, w_center, w_width, period)
        .map_err(|e| e.at_stage("contrast"))?;
    let peak_od = window_peak_od(&burn_out.profile, w_center, w_width);
    let hole_width_hz = min_center_hole_width(&burn_out.profile, &v.comb);

    let mut per_realization = Vec::with_capacity(burn_out.realization_profiles.len());
    let mut traces = Vec::with_capacity(burn_out.realization_profiles.len());
    for prof in &burn_out.realization_profiles {
        let c = comb_contrast(prof, w_center, w_width, period)
            .map_err(|e| e.at_stage("contrast"))?;
        let (t, m) = echo_through(cfg, prof)?;
        per_realization.push(RealizationStats { contrast: c, eta_total: m.eta_total });
        traces.push(t);
    }
    let contrast_stderr = stderr(per_realization.iter().map(|r| r.contrast));
    let eta_total_stderr = stderr(per_realization.iter().map(|r| r.eta_total));

    let trace = average_traces(&traces).map_err(|e| e.at_stage("propagate"))?;
    let input_spec =
        pulse_spectrum(&v.pulse, &burn_out.profile.grid).map_err(|e| e.at_stage("propagate"))?;
    let metrics = extract_metrics(
        &trace,
        1.0 / v.comb.rep_rate_hz(),
        spectral_energy(&input_spec),
        v.visibility_threshold,
    )
    .map_err(|e| e.at_stage("metrics"))?;

    Ok(ScenarioOutcome {
        profile: burn_out.profile,
        trace,
        metrics,
        contrast,
        hole_width_hz,
        peak_od,
        contrast_stderr,
        eta_total_stderr,
        per_realization,
        field: burn_out.field,
    })
}

/// `(center, width, period)` of the contrast measurement window.
pub fn contrast_window(comb: &BurnComb) -> (f64, f64, f64) {
    (
        comb.center_offset_hz(),
        CONTRAST_WINDOW_PERIODS * comb.rep_rate_hz(),
        comb.rep_rate_hz(),
    )
}

fn window_peak_od(profile: &OpticalDepthProfile, center: f64, width: f64) -> f64 {
    let a = profile.grid.nearest_index(center - width / 2.0);
    let b = profile.grid.nearest_index(center + width / 2.0);
    profile.od[a..=b].iter().cloned().fold(0.0, f64::max)
}

/// Narrowest hole among teeth m = -2..=2; unmeasurable teeth are skipped.
fn min_center_hole_width(profile: &OpticalDepthProfile, comb: &BurnComb) -> Option<f64> {
    let mut best: Option<f64> = None;
    for m in -2i64..=2 {
        if m.unsigned_abs() as usize > comb.n_teeth_half() {
            continue;
        }
        match hole_width(profile, comb.tooth_position_hz(m), comb.rep_rate_hz() / 2.0) {
            Ok(w) => best = Some(best.map_or(w, |b: f64| b.min(w))),
            Err(Error::NotAHole { .. }) | Err(Error::DegenerateWindow { .. }) => {}
            Err(_) => {}
        }
    }
    best
}

fn stderr(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = pairwise_sum_by(0..v.len(), |i| v[i]) / n;
    let var = pairwise_sum_by(0..v.len(), |i| (v[i] - mean) * (v[i] - mean)) / (n - 1.0);
    (var / n).sqrt()
}

/// Which config entry a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// burn.duration_s
    BurnTime,
    /// burn.pump_rate_per_s
    PumpRate,
    /// comb.center_offset_hz and pulse.center_offset_hz together
    Detuning,
}

impl SweepVariable {
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepVariable::BurnTime => cfg.burn.duration_s = value,
            SweepVariable::PumpRate => cfg.burn.pump_rate_per_s = value,
            SweepVariable::Detuning => {
                cfg.comb.center_offset_hz = value;
                cfg.pulse.center_offset_hz = value;
            }
        }
    }
}

/// Which per-row artifacts a sweep persists besides the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOutputs {
    pub spectra: bool,
    pub traces: bool,
    pub metrics: bool,
}

/// A parameter sweep: one scenario run per value.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: ScenarioConfig,
    pub outputs: SweepOutputs,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep values list is empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "sweep values" });
        }
        let increasing = self.values.windows(2).all(|p| p[0] < p[1]);
        let decreasing = self.values.windows(2).all(|p| p[0] > p[1]);
        if self.values.len() > 1 && !increasing && !decreasing {
            return Err(Error::Config("sweep values must be strictly monotone".into()));
        }
        self.base.validate()?;
        Ok(())
    }

    /// Config for one row: variable applied, seed derived from the value
    /// bits so the row is independent of its position in the list.
    pub fn row_config(&self, value: f64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        self.variable.apply(&mut cfg, value);
        cfg.jitter.seed = derive_seed_for_value(self.base.jitter.seed, value);
        cfg
    }
}

/// One sweep result row. Metric fields are None when the row failed; the
/// status field then carries the error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub contrast: Option<f64>,
    pub hole_width_hz: Option<f64>,
    pub peak_od: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eta3: Option<f64>,
    pub eta_total: Option<f64>,
    pub n_visible: Option<usize>,
    pub status: String,
    pub contrast_stderr: Option<f64>,
    pub eta_total_stderr: Option<f64>,
}

impl SweepRow {
    pub fn ok(value: f64, out: &ScenarioOutcome) -> Self {
        let eta = |k: usize| out.metrics.eta_per_echo.get(k).copied();
        SweepRow {
            value,
            contrast: Some(out.contrast),
            hole_width_hz: out.hole_width_hz,
            peak_od: Some(out.peak_od),
            eta1: eta(0),
            eta2: eta(1),
            eta3: eta(2),
            eta_total: Some(out.metrics.eta_total),
            n_visible: Some(out.metrics.n_visible),
            status: "ok".into(),
            contrast_stderr: Some(out.contrast_stderr),
            eta_total_stderr: Some(out.eta_total_stderr),
        }
    }

    pub fn failed(value: f64, err: &Error) -> Self {
        SweepRow {
            value,
            contrast: None,
            hole_width_hz: None,
            peak_od: None,
            eta1: None,
            eta2: None,
            eta3: None,
            eta_total: None,
            n_visible: None,
            status: err.to_string().replace(',', ";").replace('\n', " "),
            contrast_stderr: None,
            eta_total_stderr: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Run every row of a sweep on `jobs` workers. Row contents are independent
/// of `jobs` and of row order; per-row failures land in the row's status.
/// Also returns each successful row's full outcome for artifact persistence.
pub fn run_sweep_detailed(
    spec: &SweepSpec,
    jobs: usize,
) -> Result<(Vec<SweepRow>, Vec<Option<ScenarioOutcome>>)> {
    spec.validate()?;
    let jobs = jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let results: Vec<(SweepRow, Option<ScenarioOutcome>)> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&value| {
                let cfg = spec.row_config(value);
                match run_scenario(&cfg) {
                    Ok(out) => (SweepRow::ok(value, &out), Some(out)),
                    Err(e) => (SweepRow::failed(value, &e), None),
                }
            })
            .collect()
    });

    Ok(results.into_iter().unzip())
}

pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    run_sweep_detailed(spec, jobs).map(|(rows, _)| rows)
}

fn csv_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Sweep rows as CSV with the fixed column set
/// `value,contrast,hole_width_hz,peak_od,eta1,eta2,eta3,eta_total,n_visible,status`.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("value,contrast,hole_width_hz,peak_od,eta1,eta2,eta3,eta_total,n_visible,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.value,
            csv_opt(&r.contrast),
            csv_opt(&r.hole_width_hz),
            csv_opt(&r.peak_od),
            csv_opt(&r.eta1),
            csv_opt(&r.eta2),
            csv_opt(&r.eta3),
            csv_opt(&r.eta_total),
            csv_opt(&r.n_visible),
            r.status,
        ));
    }
    out
}

/// Sweep rows as pretty JSON, including the Monte-Carlo standard errors.
pub fn rows_to_json(rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ScenarioConfig {
        // small comb and short burn so unit tests stay fast
        let mut cfg = ScenarioConfig::default();
        cfg.comb.n_teeth_half = 3;
        cfg.comb.center_offset_hz = 0.0;
        cfg.comb.tooth_width_hz = 2.0e6;
        cfg.pulse.center_offset_hz = 0.0;
        cfg.jitter.n_realizations = 2;
        cfg.jitter.center_amplitude_hz = 2.0e6;
        cfg.jitter.rep_rate_amplitude_hz = 0.1e6;
        cfg.burn.duration_s = 0.08;
        cfg.burn.dt_s = 0.01;
        cfg.grid.span_hz = 40.0e9;
        cfg.grid.n_points = 1 << 17;
        cfg.echo.record_min_s = 1.0e-6;
        cfg
    }

    #[test]
    fn pump_depth_factor_limits() {
        assert!((pump_depth_factor(0.0) - 1.0).abs() < 1e-12);
        assert!((pump_depth_factor(6.0) - (1.0 - (-6.0f64).exp()) / 6.0).abs() < 1e-15);
        assert!(pump_depth_factor(1e-10) <= 1.0);
        // monotone decreasing
        assert!(pump_depth_factor(0.5) > pump_depth_factor(1.0));
        assert!(pump_depth_factor(1.0) > pump_depth_factor(6.0));
    }

    #[test]
    fn class_grid_covers_comb_with_guard() {
        let cfg = tiny_config();
        let v = cfg.validate().unwrap();
        let grid = class_grid_for(&v.comb).unwrap();
        let edge = (v.comb.n_teeth_half() as f64 + CLASS_GUARD_PERIODS) * v.comb.rep_rate_hz();
        assert!(grid.min_hz() <= -edge + 1.0);
        assert!(grid.max_hz() >= edge - 1.0);
        assert!(grid.spacing_hz() <= v.comb.tooth_width_hz() / 2.0 + 1e-9);
    }

    #[test]
    fn zero_pump_yields_no_comb_and_no_echo() {
        let mut cfg = tiny_config();
        cfg.burn.pump_rate_per_s = 0.0;
        let out = run_scenario(&cfg).unwrap();
        // the residual is the unburned line's own curvature across the
        // window (about 1.1e-3 here), which the per-period max/min contrast
        // definition reports as-is; there is no comb structure left
        assert!(out.contrast < 5e-3, "contrast {}", out.contrast);
        assert!(out.metrics.eta_total < 1e-4, "eta_total {}", out.metrics.eta_total);
        assert!(out.hole_width_hz.is_none());
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = tiny_config();
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.profile.od, b.profile.od);
        assert_eq!(a.trace.intensity, b.trace.intensity);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.contrast.to_bits(), b.contrast.to_bits());
    }

    #[test]
    fn burned_scenario_produces_contrast_and_echo() {
        let cfg = tiny_config();
        let out = run_scenario(&cfg).unwrap();
        assert!(out.contrast > 0.02, "contrast {}", out.contrast);
        assert!(out.metrics.eta_per_echo[0] > 0.0);
        assert!(out.peak_od > 0.0);
        assert!(out.per_realization.len() == 2);
        // fractions bounded
        assert!(out.metrics.transmitted_fraction + out.metrics.eta_total <= 1.0 + 1e-6);
    }

    #[test]
    fn sweep_row_equals_scenario_run() {
        let cfg = tiny_config();
        let spec = SweepSpec {
            variable: SweepVariable::PumpRate,
            values: vec![cfg.burn.pump_rate_per_s],
            base: cfg.clone(),
            outputs: SweepOutputs::default(),
        };
        let rows = run_sweep(&spec, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let mut solo_cfg = cfg;
        solo_cfg.jitter.seed =
            derive_seed_for_value(solo_cfg.jitter.seed, spec.values[0]);
        let solo = run_scenario(&solo_cfg).unwrap();
        assert_eq!(rows[0].contrast, Some(solo.contrast));
        assert_eq!(rows[0].eta_total, Some(solo.metrics.eta_total));
        assert!(rows[0].is_ok());
    }

    #[test]
    fn sweep_rows_are_order_independent() {
        let cfg = tiny_config();
        let values = vec![20.0, 60.0, 100.0];
        let fwd = SweepSpec {
            variable: SweepVariable::PumpRate,
            values: values.clone(),
            base: cfg.clone(),
            outputs: SweepOutputs::default(),
        };
        let rev = SweepSpec {
            variable: SweepVariable::PumpRate,
            values: values.iter().rev().cloned().collect(),
            base: cfg,
            outputs: SweepOutputs::default(),
        };
        let a = run_sweep(&fwd, 1).unwrap();
        let b = run_sweep(&rev, 2).unwrap();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn sweep_records_row_failures_without_aborting() {
        let cfg = tiny_config();
        // second value puts the comb+pulse outside the probe grid
        let spec = SweepSpec {
            variable: SweepVariable::Detuning,
            values: vec![0.0, 1.0e12],
            base: cfg,
            outputs: SweepOutputs::default(),
        };
        let rows = run_sweep(&spec, 1).unwrap();
        assert!(rows[0].is_ok());
        assert!(!rows[1].is_ok());
        assert!(rows[1].contrast.is_none());
        assert!(!rows[1].status.contains(','));
    }

    #[test]
    fn sweep_rejects_bad_value_lists() {
        let cfg = tiny_config();
        let empty = SweepSpec {
            variable: SweepVariable::BurnTime,
            values: vec![],
            base: cfg.clone(),
            outputs: SweepOutputs::default(),
        };
        assert!(empty.validate().is_err());
        let not_monotone = SweepSpec {
            variable: SweepVariable::BurnTime,
            values: vec![1.0, 3.0, 2.0],
            base: cfg,
            outputs: SweepOutputs::default(),
        };
        assert!(not_monotone.validate().is_err());
    }

    #[test]
    fn csv_has_exact_columns_and_empty_cells_for_failures() {
        let rows = vec![
            SweepRow {
                value: 1.0,
                contrast: Some(0.5),
                hole_width_hz: None,
                peak_od: Some(2.0),
                eta1: Some(0.1),
                eta2: Some(0.05),
                eta3: Some(0.02),
                eta_total: Some(0.2),
                n_visible: Some(3),
                status: "ok".into(),
                contrast_stderr: Some(0.01),
                eta_total_stderr: Some(0.002),
            },
            SweepRow::failed(2.0, &Error::ZeroInputEnergy),
        ];
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "value,contrast,hole_width_hz,peak_od,eta1,eta2,eta3,eta_total,n_visible,status"
        );
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 10);
        assert_eq!(first.split(',').nth(2).unwrap(), "");
        let second = lines.next().unwrap();
        assert_eq!(second.split(',').count(), 10);
        assert!(second.ends_with("cannot normalize echo metrics"));
        // header-only for no rows
        assert_eq!(rows_to_csv(&[]).lines().count(), 1);
        // JSON carries the error bars
        let json = rows_to_json(&rows);
        assert!(json.contains("contrast_stderr"));
    }
}
