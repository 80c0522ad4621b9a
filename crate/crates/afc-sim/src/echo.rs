//! Pulse propagation through the burned comb and echo analysis.
//!
//! The medium is described by a scalar transfer function on the probe grid:
//! magnitude `exp(-OD/2)` and the minimum-phase (Kramers-Kronig) phase that
//! makes the impulse response causal. A transform-limited Gaussian probe
//! pulse is multiplied by the transfer function in the frequency domain and
//! inverse-FFT'd; the periodic comb structure re-emits the stored pulse as a
//! train of echoes spaced by the inverse comb spacing.
//!
//! Two independent cross-checks of the FFT path live here as well: a direct
//! sum over discrete atoms (`|sum_j w_j a(delta_j) exp(i 2 pi delta_j t)|^2`)
//! and the closed-form three-comb beat envelope used to interpret the echo
//! train's hyperfine modulation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fft_forward, fft_inverse, pairwise_sum_by};
use crate::spectral::{FrequencyGrid, OpticalDepthProfile};

/// Maximum atom count accepted by the sum-over-atoms oracle.
pub const MAX_ORACLE_ATOMS: usize = 100_000;

/// Transform-limited Gaussian probe pulse. `duration_fwhm_s` is the FWHM of
/// the time-domain intensity; the spectral intensity FWHM is then
/// `2 ln2 / (pi * duration)` (about 0.441 / duration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPulse {
    pub duration_fwhm_s: f64,
    pub center_offset_hz: f64,
    pub amplitude: f64,
}

impl InputPulse {
    pub fn new(duration_fwhm_s: f64, center_offset_hz: f64, amplitude: f64) -> Result<Self> {
        if !duration_fwhm_s.is_finite() || duration_fwhm_s <= 0.0 {
            return Err(Error::invalid("pulse", format!("duration_fwhm_s = {duration_fwhm_s}, need > 0")));
        }
        if !center_offset_hz.is_finite() {
            return Err(Error::NonFinite { what: "pulse center" });
        }
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(Error::invalid("pulse", format!("amplitude = {amplitude}, need > 0")));
        }
        Ok(InputPulse { duration_fwhm_s, center_offset_hz, amplitude })
    }

    /// FWHM of the spectral intensity.
    pub fn spectral_fwhm_hz(&self) -> f64 {
        2.0 * std::f64::consts::LN_2 / (std::f64::consts::PI * self.duration_fwhm_s)
    }

    /// Spectral field amplitude at detuning `freq_hz` (flat spectral phase).
    pub fn spectral_amplitude(&self, freq_hz: f64) -> f64 {
        // E(t) = A exp(-a t^2) with a = 2 ln2 / tau^2  =>  E(nu) ~ exp(-(pi nu)^2 / a)
        let a = 2.0 * std::f64::consts::LN_2 / (self.duration_fwhm_s * self.duration_fwhm_s);
        let x = std::f64::consts::PI * (freq_hz - self.center_offset_hz);
        self.amplitude * (-x * x / a).exp()
    }
}

/// Complex field spectrum sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpectrum {
    pub grid: FrequencyGrid,
    pub amps: Vec<Complex64>,
}

/// Energy of the spectrum in the same units as the time-domain trace energy
/// (`sum |e(t)|^2 dt`); Parseval for the DFT conventions used here.
pub fn spectral_energy(spec: &FieldSpectrum) -> f64 {
    let n = spec.amps.len() as f64;
    let sum = pairwise_sum_by(0..spec.amps.len(), |i| spec.amps[i].norm_sqr());
    sum / (n * n * spec.grid.spacing_hz())
}

/// Sample the pulse spectrum on a grid. The grid must cover at least +-2
/// spectral FWHM around the pulse center and resolve the spectrum.
pub fn pulse_spectrum(pulse: &InputPulse, grid: &FrequencyGrid) -> Result<FieldSpectrum> {
    let sf = pulse.spectral_fwhm_hz();
    let needed = 4.0 * sf;
    let left = pulse.center_offset_hz - grid.min_hz();
    let right = grid.max_hz() - pulse.center_offset_hz;
    if left < needed / 2.0 || right < needed / 2.0 {
        return Err(Error::InsufficientSpan {
            needed_hz: needed,
            available_hz: 2.0 * left.min(right),
        });
    }
    if grid.spacing_hz() > sf / 8.0 {
        return Err(Error::GridUnderResolved {
            spacing_hz: grid.spacing_hz(),
            required_hz: sf / 8.0,
        });
    }
    let amps = grid
        .iter()
        .map(|f| Complex64::new(pulse.spectral_amplitude(f), 0.0))
        .collect();
    Ok(FieldSpectrum { grid: grid.clone(), amps })
}

/// Scalar transfer function of the medium on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl TransferFunction {
    /// Fraction of impulse-response energy arriving before t = 0. Causal
    /// (minimum-phase) transfer functions keep this below 1e-4.
    pub fn acausal_energy_fraction(&self) -> f64 {
        let mut h = self.values.clone();
        fft_inverse(&mut h);
        let n = h.len();
        let total = pairwise_sum_by(0..n, |i| h[i].norm_sqr());
        // bins above N/2 are negative times under the inverse-DFT convention
        let neg = pairwise_sum_by(n / 2 + 1..n, |i| h[i].norm_sqr());
        neg / total
    }
}

/// Build the minimum-phase transfer function from an optical-depth profile:
/// `|h| = exp(-OD/2)` and the phase is the discrete Hilbert transform of
/// `-OD/2` (folded-cepstrum construction), which is the unique causal phase
/// for that magnitude.
///
/// The profile must (apart from a 1e-3 relative floor) vanish at the grid
/// edges; otherwise the impulse response would wrap around the record.
pub fn transfer_from_od(profile: &OpticalDepthProfile) -> Result<TransferFunction> {
    let od = &profile.od;
    let n = od.len();
    let max_od = profile.max_od();
    let edge = od[0].max(od[n - 1]);
    if max_od > 0.0 && edge > 1e-3 * max_od {
        return Err(Error::EdgeOd { edge_od: edge, max_od });
    }

    // log-magnitude -> cepstrum -> fold onto nonnegative quefrencies -> phase
    let mut cep: Vec<Complex64> = od.iter().map(|d| Complex64::new(-0.5 * d, 0.0)).collect();
    fft_inverse(&mut cep);
    let half = n / 2;
    for (i, c) in cep.iter_mut().enumerate() {
        if i == 0 || (n % 2 == 0 && i == half) {
            // keep as is
        } else if i < half || (n % 2 == 1 && i == half) {
            *c *= 2.0;
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    fft_forward(&mut cep);

    let values = od
        .iter()
        .zip(cep.iter())
        .map(|(d, log_h)| Complex64::from_polar((-0.5 * d).exp(), log_h.im))
        .collect();
    Ok(TransferFunction { grid: profile.grid.clone(), values })
}

/// Time-domain intensity record. Samples run from `t_start_s` (negative: the
/// acausal side of the record) in steps of `dt_s`; t = 0 is the peak of the
/// unscattered transmitted pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoTrace {
    pub dt_s: f64,
    pub t_start_s: f64,
    pub intensity: Vec<f64>,
}

impl EchoTrace {
    pub fn time(&self, i: usize) -> f64 {
        self.t_start_s + i as f64 * self.dt_s
    }

    pub fn t_end_s(&self) -> f64 {
        self.time(self.intensity.len() - 1)
    }

    /// Total energy (`sum intensity * dt`).
    pub fn total_energy(&self) -> f64 {
        pairwise_sum_by(0..self.intensity.len(), |i| self.intensity[i]) * self.dt_s
    }

    /// Energy in the half-open window `[t0, t1)`.
    pub fn energy_in(&self, t0: f64, t1: f64) -> f64 {
        let (a, b) = self.index_range(t0, t1);
        pairwise_sum_by(a..b, |i| self.intensity[i]) * self.dt_s
    }

    /// Peak sample in `[t0, t1)`: `(time, intensity)`.
    pub fn peak_in(&self, t0: f64, t1: f64) -> (f64, f64) {
        let (a, b) = self.index_range(t0, t1);
        let mut best = (self.time(a), 0.0);
        for i in a..b {
            if self.intensity[i] > best.1 {
                best = (self.time(i), self.intensity[i]);
            }
        }
        best
    }

    /// Peak position in `[t0, t1)` refined below the sample spacing by a
    /// quadratic fit through the argmax and its neighbours.
    pub fn interpolated_peak_in(&self, t0: f64, t1: f64) -> (f64, f64) {
        let (a, b) = self.index_range(t0, t1);
        let mut i_best = a;
        for i in a..b {
            if self.intensity[i] > self.intensity[i_best] {
                i_best = i;
            }
        }
        if i_best == 0 || i_best + 1 >= self.intensity.len() {
            return (self.time(i_best), self.intensity[i_best]);
        }
        let (l, c, r) =
            (self.intensity[i_best - 1], self.intensity[i_best], self.intensity[i_best + 1]);
        let denom = l - 2.0 * c + r;
        if denom >= 0.0 {
            return (self.time(i_best), c);
        }
        let shift = 0.5 * (l - r) / denom;
        (self.time(i_best) + shift * self.dt_s, c)
    }

    fn index_range(&self, t0: f64, t1: f64) -> (usize, usize) {
        let n = self.intensity.len() as f64;
        let lo = ((t0 - self.t_start_s) / self.dt_s).ceil().clamp(0.0, n) as usize;
        let hi = ((t1 - self.t_start_s) / self.dt_s).ceil().clamp(0.0, n) as usize;
        (lo, hi)
    }
}

/// Sample-wise mean intensity of traces on a common time grid, the way an
/// oscilloscope averages repeated shots.
pub fn average_traces(traces: &[EchoTrace]) -> Result<EchoTrace> {
    let first = traces.first().ok_or_else(|| Error::invalid("average", "no traces"))?;
    if traces.iter().any(|t| {
        t.dt_s != first.dt_s
            || t.t_start_s != first.t_start_s
            || t.intensity.len() != first.intensity.len()
    }) {
        return Err(Error::MismatchedGrids { context: "echo traces".into() });
    }
    let n = traces.len() as f64;
    let intensity = (0..first.intensity.len())
        .map(|i| pairwise_sum_by(0..traces.len(), |r| traces[r].intensity[i]) / n)
        .collect();
    Ok(EchoTrace { dt_s: first.dt_s, t_start_s: first.t_start_s, intensity })
}

/// Propagate a spectrum through the transfer function and return the time
/// record, reordered so negative times precede t = 0.
pub fn propagate_spectrum(spec: &FieldSpectrum, tf: &TransferFunction) -> Result<EchoTrace> {
    if spec.grid != tf.grid {
        return Err(Error::MismatchedGrids { context: "pulse spectrum vs transfer function".into() });
    }
    let n = spec.amps.len();
    let mut field: Vec<Complex64> =
        spec.amps.iter().zip(tf.values.iter()).map(|(a, h)| a * h).collect();
    fft_inverse(&mut field);

    let dt = 1.0 / (n as f64 * spec.grid.spacing_hz());
    // reorder: n/2+1..n are negative times
    let n_neg = n - (n / 2 + 1);
    let mut intensity = Vec::with_capacity(n);
    intensity.extend(field[n / 2 + 1..].iter().map(|v| v.norm_sqr()));
    intensity.extend(field[..n / 2 + 1].iter().map(|v| v.norm_sqr()));
    let trace = EchoTrace {
        dt_s: dt,
        t_start_s: -(n_neg as f64) * dt,
        intensity,
    };

    let total = trace.total_energy();
    if total > 0.0 {
        let m = trace.intensity.len();
        let tail: f64 = trace.intensity[m - 5..].iter().sum::<f64>() * dt
            + trace.intensity[..5].iter().sum::<f64>() * dt;
        let frac = tail / total;
        if frac > 1e-4 {
            return Err(Error::TimeWrap { tail_fraction: frac });
        }
    }
    Ok(trace)
}

/// Full propagation: sample the pulse spectrum on the transfer function's
/// grid, apply it, and return the echo trace.
pub fn propagate(pulse: &InputPulse, tf: &TransferFunction) -> Result<EchoTrace> {
    let spec = pulse_spectrum(pulse, &tf.grid)?;
    propagate_spectrum(&spec, &tf)
}

/// Independent check of the FFT path: emission envelope of `atoms` =
/// `(detuning_hz, weight)` pairs, each radiating the pulse's spectral
/// amplitude at its detuning: `|sum_j w_j a(d_j) exp(i 2 pi d_j t)|^2`,
/// normalized to its maximum.
pub fn sum_over_atoms_oracle(
    atoms: &[(f64, f64)],
    pulse: &InputPulse,
    times_s: &[f64],
) -> Result<Vec<f64>> {
    if atoms.is_empty() || atoms.len() > MAX_ORACLE_ATOMS {
        return Err(Error::BadAtomCount { n: atoms.len(), min: 1, max: MAX_ORACLE_ATOMS });
    }
    if atoms.iter().any(|(d, w)| !d.is_finite() || !w.is_finite()) {
        return Err(Error::NonFinite { what: "oracle atoms" });
    }
    let weighted: Vec<(f64, f64)> = atoms
        .iter()
        .map(|(d, w)| (*d, w * pulse.spectral_amplitude(*d)))
        .collect();
    let mut env: Vec<f64> = times_s
        .par_iter()
        .map(|t| {
            let mut sum = Complex64::new(0.0, 0.0);
            for (d, wa) in &weighted {
                let phase = 2.0 * std::f64::consts::PI * d * t;
                sum += wa * Complex64::from_polar(1.0, phase);
            }
            sum.norm_sqr()
        })
        .collect();
    let peak = env.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in env.iter_mut() {
            *v /= peak;
        }
    }
    Ok(env)
}

/// Deterministic equal-weight atom sample for the oracle: `n` detunings
/// placed at the quantiles of the OD profile (inverse-CDF sampling), so the
/// atom density follows the comb's spectral density without an RNG.
pub fn sample_atoms_from_profile(
    profile: &OpticalDepthProfile,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if n == 0 || n > MAX_ORACLE_ATOMS {
        return Err(Error::BadAtomCount { n, min: 1, max: MAX_ORACLE_ATOMS });
    }
    let od = &profile.od;
    let mut cum = Vec::with_capacity(od.len() + 1);
    let mut run = 0.0;
    cum.push(0.0);
    for d in od {
        run += d;
        cum.push(run);
    }
    let total = run;
    if !(total > 0.0) {
        return Err(Error::invalid("atom sampling", "optical depth is zero everywhere"));
    }
    let w = 1.0 / n as f64;
    let mut atoms = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let target = (j as f64 + 0.5) * w * total;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let within = (target - cum[seg]) / (cum[seg + 1] - cum[seg]).max(f64::MIN_POSITIVE);
        let nu = profile.grid.value(seg) + (within - 0.5) * profile.grid.spacing_hz();
        atoms.push((nu, w));
    }
    Ok(atoms)
}

/// Closed-form echo-train envelope of several mutually detuned combs of
/// equal spacing: `|sum_k A_k exp(i 2 pi d_k t)|^2 exp(-t / T)` with
/// `T = 1 / (pi * tooth_fwhm)`, normalized to 1 at t = 0 (when the amplitude
/// sum is nonzero). Amplitudes are complex so comb phases can be set.
pub fn beat_envelope_model(
    amplitudes: &[Complex64],
    detunings_hz: &[f64],
    tooth_fwhm_hz: f64,
    times_s: &[f64],
) -> Result<Vec<f64>> {
    if amplitudes.is_empty() || amplitudes.len() != detunings_hz.len() {
        return Err(Error::invalid(
            "beat model",
            format!("{} amplitudes vs {} detunings", amplitudes.len(), detunings_hz.len()),
        ));
    }
    if !tooth_fwhm_hz.is_finite() || tooth_fwhm_hz <= 0.0 {
        return Err(Error::invalid("beat model", format!("tooth_fwhm_hz = {tooth_fwhm_hz}, need > 0")));
    }
    let t_decay = 1.0 / (std::f64::consts::PI * tooth_fwhm_hz);
    let norm: f64 = amplitudes.iter().sum::<Complex64>().norm_sqr();
    let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    Ok(times_s
        .iter()
        .map(|t| {
            let mut sum = Complex64::new(0.0, 0.0);
            for (a, d) in amplitudes.iter().zip(detunings_hz.iter()) {
                sum += a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * d * t);
            }
            sum.norm_sqr() * (-t / t_decay).exp() * scale
        })
        .collect())
}

/// Echo-train metrics. `eta_per_echo[k-1]` is the fraction of the input
/// energy arriving in the window `[k tau - tau/2, k tau + tau/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoMetrics {
    pub eta_per_echo: Vec<f64>,
    pub eta_total: f64,
    pub transmitted_fraction: f64,
    pub n_visible: usize,
    pub tau_s: f64,
}

/// Slice the trace into tau-wide windows centered on multiples of tau.
/// Window 0 is the transmitted pulse; windows k >= 1 are echoes. An echo is
/// "visible" when its peak intensity reaches `threshold` times the
/// transmitted peak.
pub fn extract_metrics(
    trace: &EchoTrace,
    tau_s: f64,
    input_energy: f64,
    threshold: f64,
) -> Result<EchoMetrics> {
    if !tau_s.is_finite() || tau_s <= 0.0 {
        return Err(Error::BadEchoWindows { reason: format!("tau_s = {tau_s}") });
    }
    if tau_s < 4.0 * trace.dt_s {
        return Err(Error::BadEchoWindows {
            reason: format!("tau_s = {tau_s:e} s not resolved by dt = {:e} s", trace.dt_s),
        });
    }
    if !(input_energy > 0.0) {
        return Err(Error::ZeroInputEnergy);
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::invalid("metrics", format!("threshold = {threshold}, need > 0")));
    }
    if trace.t_start_s > 0.0 || trace.t_end_s() < 1.5 * tau_s {
        return Err(Error::BadEchoWindows {
            reason: "record does not cover the transmitted pulse and the first echo".into(),
        });
    }

    let k_max = ((trace.t_end_s() - tau_s / 2.0) / tau_s).floor() as usize;
    let window = |k: usize| {
        let c = k as f64 * tau_s;
        (c - tau_s / 2.0, c + tau_s / 2.0)
    };

    let (w0_lo, w0_hi) = window(0);
    let transmitted_fraction = trace.energy_in(w0_lo, w0_hi) / input_energy;
    let (_, transmitted_peak) = trace.peak_in(w0_lo, w0_hi);

    let mut eta_per_echo = Vec::with_capacity(k_max);
    let mut n_visible = 0;
    for k in 1..=k_max {
        let (lo, hi) = window(k);
        eta_per_echo.push(trace.energy_in(lo, hi) / input_energy);
        let (_, pk) = trace.peak_in(lo, hi);
        if pk >= threshold * transmitted_peak && pk > 0.0 {
            n_visible += 1;
        }
    }
    let eta_total = pairwise_sum_by(0..eta_per_echo.len(), |i| eta_per_echo[i]);
    Ok(EchoMetrics { eta_per_echo, eta_total, transmitted_fraction, n_visible, tau_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lorentzian_unit_peak, FrequencyGrid};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn half_crossing_width(xs: &[f64], ys: &[f64]) -> f64 {
        // linear-interpolated FWHM of a single-peaked curve
        let (i_max, &peak) = ys
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let level = peak / 2.0;
        let mut right = xs[xs.len() - 1];
        for i in i_max..ys.len() - 1 {
            if ys[i + 1] < level {
                let f = (ys[i] - level) / (ys[i] - ys[i + 1]);
                right = xs[i] + f * (xs[i + 1] - xs[i]);
                break;
            }
        }
        let mut left = xs[0];
        for i in (1..=i_max).rev() {
            if ys[i - 1] < level {
                let f = (ys[i] - level) / (ys[i] - ys[i - 1]);
                left = xs[i] - f * (xs[i] - xs[i - 1]);
                break;
            }
        }
        right - left
    }

    #[test]
    fn spectral_intensity_fwhm_matches_time_bandwidth_product() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 16, 6.3e9 * 8.0).unwrap();
        let spec = pulse_spectrum(&pulse, &grid).unwrap();
        let xs: Vec<f64> = grid.iter().collect();
        let ys: Vec<f64> = spec.amps.iter().map(|a| a.norm_sqr()).collect();
        let fwhm = half_crossing_width(&xs, &ys);
        // 0.441 / 70 ps = 6.30 GHz
        assert_relative_eq!(fwhm, 0.441 / 70e-12, max_relative = 0.01);
        assert_relative_eq!(fwhm, pulse.spectral_fwhm_hz(), max_relative = 0.01);
    }

    #[test]
    fn transparent_medium_returns_pulse_with_right_duration() {
        // 700 ps pulse so the 20 ps time step resolves the envelope well
        let pulse = InputPulse::new(700e-12, 0.0, 1.0).unwrap();
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 18, 1e6).unwrap();
        let od = OpticalDepthProfile::new(grid.clone(), vec![0.0; grid.n_points()]).unwrap();
        let tf = transfer_from_od(&od).unwrap();
        let trace = propagate(&pulse, &tf).unwrap();
        let (t_peak, peak) = trace.peak_in(-1e-9, 1e-9);
        assert!(peak > 0.0);
        assert!(t_peak.abs() <= trace.dt_s);
        let xs: Vec<f64> = (0..trace.intensity.len()).map(|i| trace.time(i)).collect();
        let fwhm = half_crossing_width(&xs, &trace.intensity);
        assert_relative_eq!(fwhm, 700e-12, max_relative = 0.01);
    }

    #[test]
    fn pulse_spectrum_linear_in_amplitude() {
        let grid = FrequencyGrid::new(0.0, 60e9, 4096, 60e9).unwrap();
        let a = pulse_spectrum(&InputPulse::new(70e-12, 0.0, 1.0).unwrap(), &grid).unwrap();
        let b = pulse_spectrum(&InputPulse::new(70e-12, 0.0, 2.0).unwrap(), &grid).unwrap();
        for (x, y) in a.amps.iter().zip(b.amps.iter()) {
            assert_abs_diff_eq!(2.0 * x.re, y.re, epsilon = 1e-12);
        }
    }

    #[test]
    fn pulse_spectrum_rejects_narrow_grid() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap(); // ~6.3 GHz spectral fwhm
        let grid = FrequencyGrid::new(0.0, 10e9, 4096, 60e9).unwrap();
        assert!(matches!(pulse_spectrum(&pulse, &grid), Err(Error::InsufficientSpan { .. })));
        // off-center pulse near the edge is rejected too
        let wide = FrequencyGrid::new(0.0, 50e9, 4096, 60e9).unwrap();
        let detuned = InputPulse::new(70e-12, 20e9, 1.0).unwrap();
        assert!(matches!(pulse_spectrum(&detuned, &wide), Err(Error::InsufficientSpan { .. })));
    }

    #[test]
    fn transfer_magnitude_is_exp_minus_half_od() {
        let grid = FrequencyGrid::new(0.0, 4e9, 8192, 80e6).unwrap();
        let od: Vec<f64> =
            grid.iter().map(|f| 2.0 * lorentzian_unit_peak(f, 100e6)).collect();
        let prof = OpticalDepthProfile::new(grid, od.clone()).unwrap();
        let tf = transfer_from_od(&prof).unwrap();
        for (h, d) in tf.values.iter().zip(od.iter()) {
            assert_relative_eq!(h.norm(), (-0.5 * d).exp(), max_relative = 1e-12);
            assert!(h.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn transfer_rejects_od_at_edges() {
        let grid = FrequencyGrid::new(0.0, 4e9, 4096, 80e6).unwrap();
        let prof = OpticalDepthProfile::new(grid, vec![1.0; 4096]).unwrap();
        let err = transfer_from_od(&prof).unwrap_err();
        assert!(matches!(err, Error::EdgeOd { .. }));
    }

    /// The minimum phase of a single Lorentzian absorption line is the
    /// analytic dispersion phase +(d/2) L(x) x / (gamma/2).
    ///
    /// Sign fixed by the e^{+i 2 pi nu t} synthesis kernel used in
    /// propagation: a causal response then has a spectrum analytic in the
    /// lower half nu-plane, so log h must match f(nu) = -i c/(nu - i a)
    /// (pole at +ia, outside the LHP) with a = gamma/2 and
    /// Re f = c a/(nu^2+a^2) = -(d/2) L, giving Im f = +(d/2) L nu/a.
    /// Cross-check: the slope d(phase)/d(nu) > 0 at line center means
    /// negative group delay, the known anomalous-dispersion behaviour
    /// inside an absorption dip.
    #[test]
    fn lorentzian_line_phase_matches_analytic_dispersion() {
        let gamma = 20e6;
        let depth = 1.2;
        let grid = FrequencyGrid::new(0.0, 32e9, 1 << 17, gamma).unwrap();
        let od: Vec<f64> =
            grid.iter().map(|f| depth * lorentzian_unit_peak(f, gamma)).collect();
        let prof = OpticalDepthProfile::new(grid.clone(), od).unwrap();
        let tf = transfer_from_od(&prof).unwrap();

        // Compare where the dispersion structure lives (peak at +-gamma/2).
        // The far tails decay only as 1/nu and alias on the periodic domain,
        // so they are excluded; the mismatch there shrinks with span, not
        // with sampling density.
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        for (i, f) in grid.iter().enumerate() {
            if f.abs() > 25.0 * gamma {
                continue;
            }
            let a = 0.5 * depth * lorentzian_unit_peak(f, gamma) * f / (gamma / 2.0);
            err2 += (tf.values[i].arg() - a) * (tf.values[i].arg() - a);
            ref2 += a * a;
        }
        assert!(
            (err2 / ref2).sqrt() < 0.01,
            "L2 phase error {} over analytic dispersion",
            (err2 / ref2).sqrt()
        );
    }

    #[test]
    fn minimum_phase_response_is_causal() {
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 17, 4e6).unwrap();
        // burned-comb-like profile: gaussian line with cosine modulation
        let od: Vec<f64> = grid
            .iter()
            .map(|f| {
                let gauss = (-4.0 * std::f64::consts::LN_2 * (f / 10e9).powi(2)).exp();
                3.0 * gauss * (1.0 + 0.8 * (2.0 * std::f64::consts::PI * f / 80e6).cos()) / 1.8
            })
            .collect();
        let prof = OpticalDepthProfile::new(grid, od).unwrap();
        let tf = transfer_from_od(&prof).unwrap();
        assert!(tf.acausal_energy_fraction() < 1e-4);
    }

    #[test]
    fn propagation_conserves_energy_under_unit_transfer() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 18, 1e6).unwrap();
        let od = OpticalDepthProfile::new(grid.clone(), vec![0.0; grid.n_points()]).unwrap();
        let tf = transfer_from_od(&od).unwrap();
        let spec = pulse_spectrum(&pulse, &grid).unwrap();
        let trace = propagate_spectrum(&spec, &tf).unwrap();
        assert_relative_eq!(trace.total_energy(), spectral_energy(&spec), max_relative = 1e-9);
    }

    #[test]
    fn absorbing_medium_attenuates() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 18, 1e6).unwrap();
        let od: Vec<f64> = grid
            .iter()
            .map(|f| 4.0 * (-4.0 * std::f64::consts::LN_2 * (f / 10e9).powi(2)).exp())
            .collect();
        let prof = OpticalDepthProfile::new(grid.clone(), od).unwrap();
        let tf = transfer_from_od(&prof).unwrap();
        let spec = pulse_spectrum(&pulse, &grid).unwrap();
        let trace = propagate_spectrum(&spec, &tf).unwrap();
        let e_in = spectral_energy(&spec);
        assert!(trace.total_energy() < e_in);
        assert!(trace.total_energy() > 0.0);
    }

    /// A spectrally periodic OD re-emits at multiples of the inverse period;
    /// the first revival must land on 1/period within one sample, and no
    /// measurable energy may precede the input pulse.
    #[test]
    fn periodic_od_echoes_at_inverse_period_and_stays_causal() {
        let grid = FrequencyGrid::new(0.0, 50e9, 1 << 17, 20e6).unwrap();
        let period = 80e6;
        // the broadband envelope itself advances every peak slightly
        // (anomalous dispersion of an absorber); at this depth the advance
        // stays well below one sample step
        let od: Vec<f64> = grid
            .iter()
            .map(|f| {
                let gauss = (-4.0 * std::f64::consts::LN_2 * (f / 10e9).powi(2)).exp();
                2.0 * gauss * 0.5 * (1.0 + (2.0 * std::f64::consts::PI * f / period).cos())
            })
            .collect();
        let prof = OpticalDepthProfile::new(grid.clone(), od).unwrap();
        let tf = transfer_from_od(&prof).unwrap();
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let trace = propagate(&pulse, &tf).unwrap();

        // tau is not a multiple of the sample step; interpolate below it
        let tau = 1.0 / period;
        let (t_peak, peak) = trace.interpolated_peak_in(0.5 * tau, 1.5 * tau);
        assert!(peak > 0.0);
        assert_abs_diff_eq!(t_peak, tau, epsilon = trace.dt_s);
        let (t_peak2, _) = trace.interpolated_peak_in(1.5 * tau, 2.5 * tau);
        assert_abs_diff_eq!(t_peak2, 2.0 * tau, epsilon = trace.dt_s);

        let pre = trace.energy_in(trace.t_start_s, -3.0 * pulse.duration_fwhm_s);
        assert!(pre < 1e-4 * trace.total_energy(), "pre-pulse energy {pre:e}");
    }

    #[test]
    fn response_reaching_the_record_edge_is_rejected() {
        let n = 1 << 14;
        let grid = FrequencyGrid::new(0.0, 50e9, n, 1e9).unwrap();
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let record = 1.0 / grid.spacing_hz();
        // pure delay to within a few steps of the positive record end
        let delay = |t0: f64| TransferFunction {
            grid: grid.clone(),
            values: grid
                .iter()
                .map(|f| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * t0))
                .collect(),
        };
        let dt = 1.0 / (n as f64 * grid.spacing_hz());
        match propagate(&pulse, &delay(0.5 * record - 2.0 * dt)) {
            Err(Error::TimeWrap { .. }) => {}
            other => panic!("expected TimeWrap, got {other:?}"),
        }
        // well inside the record: accepted, echo where it was sent
        let trace = propagate(&pulse, &delay(0.25 * record)).unwrap();
        let (t_pk, _) = trace.peak_in(0.1 * record, 0.4 * record);
        assert_abs_diff_eq!(t_pk, 0.25 * record, epsilon = trace.dt_s);
    }

    #[test]
    fn oracle_single_atom_is_flat() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 1e-10).collect();
        let env = sum_over_atoms_oracle(&[(1e9, 1.0)], &pulse, &times).unwrap();
        for v in env {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn oracle_two_atoms_beat() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        let d = 10e6;
        let half_period = 0.5 / d;
        let times = [0.0, half_period / 2.0, half_period];
        let env = sum_over_atoms_oracle(&[(-d / 2.0, 1.0), (d / 2.0, 1.0)], &pulse, &times).unwrap();
        assert_relative_eq!(env[0], 1.0, max_relative = 1e-9);
        assert_relative_eq!(env[1], 0.5, max_relative = 1e-9);
        assert!(env[2] < 1e-9);
    }

    #[test]
    fn oracle_rejects_bad_counts() {
        let pulse = InputPulse::new(70e-12, 0.0, 1.0).unwrap();
        assert!(matches!(
            sum_over_atoms_oracle(&[], &pulse, &[0.0]),
            Err(Error::BadAtomCount { .. })
        ));
        let many = vec![(0.0, 1.0); MAX_ORACLE_ATOMS + 1];
        assert!(matches!(
            sum_over_atoms_oracle(&many, &pulse, &[0.0]),
            Err(Error::BadAtomCount { .. })
        ));
    }

    #[test]
    fn single_comb_is_pure_exponential() {
        let fwhm = 5e6;
        let t_decay = 1.0 / (std::f64::consts::PI * fwhm);
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 4e-9).collect();
        let one = Complex64::new(0.7, 0.0);
        let env = beat_envelope_model(&[one], &[3e6], fwhm, &times).unwrap();
        for (t, v) in times.iter().zip(env.iter()) {
            assert_relative_eq!(*v, (-t / t_decay).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn two_comb_beat_has_zeros_and_revival() {
        let d = 4.8e6;
        let n = 4000;
        let one = Complex64::new(1.0, 0.0);
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 250e-9 / n as f64).collect();
        let env = beat_envelope_model(&[one, one], &[0.0, d], 2e6, &times).unwrap();
        // zero at t = 1/(2d)
        let i_zero = (0.5 / d / (250e-9 / n as f64)).round() as usize;
        assert!(env[i_zero] < 1e-4);
        // revival near t = 1/d is a local maximum
        let i_rev = (1.0 / d / (250e-9 / n as f64)).round() as usize;
        let window = &env[i_rev - 200..i_rev + 200];
        let peak = window.iter().cloned().fold(0.0, f64::max);
        assert!(peak > env[i_zero] * 100.0);
        assert!(env[0] == 1.0);
    }

    #[test]
    fn metrics_on_synthetic_trace() {
        // pulses at 0, tau, 2tau with energies 1.0, 0.1, 0.05 (relative)
        let dt = 1e-11;
        let tau = 12.5e-9;
        let n = 8192;
        let t_start = -2e-9;
        let mut intensity = vec![0.0; n];
        let pulses = [(0.0, 1.0), (tau, 0.1), (2.0 * tau, 0.05)];
        for i in 0..n {
            let t = t_start + i as f64 * dt;
            for (t0, a) in pulses {
                intensity[i] += a * (-(t - t0).powi(2) / (2.0 * (100e-12f64).powi(2))).exp();
            }
        }
        let trace = EchoTrace { dt_s: dt, t_start_s: t_start, intensity };
        let input_energy = trace.energy_in(-2e-9, 2e-9) / 0.5; // transmitted = half the input
        let m = extract_metrics(&trace, tau, input_energy, 1e-3).unwrap();
        assert_relative_eq!(m.transmitted_fraction, 0.5, max_relative = 1e-6);
        assert_relative_eq!(m.eta_per_echo[0], 0.05, max_relative = 1e-6);
        assert_relative_eq!(m.eta_per_echo[1], 0.025, max_relative = 1e-6);
        assert_eq!(m.n_visible, 2);
        assert_relative_eq!(m.eta_total, 0.075, max_relative = 1e-6);
        assert_eq!(m.tau_s, tau);
    }

    #[test]
    fn atom_sampling_follows_the_profile() {
        let grid = FrequencyGrid::new(0.0, 1e9, 2001, 1e9).unwrap();
        // all mass in the right half
        let od: Vec<f64> = grid.iter().map(|f| if f > 0.0 { 2.0 } else { 0.0 }).collect();
        let prof = OpticalDepthProfile::new(grid, od).unwrap();
        let atoms = sample_atoms_from_profile(&prof, 500).unwrap();
        assert_eq!(atoms.len(), 500);
        assert!(atoms.iter().all(|(d, _)| *d > -1e6));
        // equal weights
        assert!(atoms.iter().all(|(_, w)| (*w - 1.0 / 500.0).abs() < 1e-15));
        // roughly uniform over the massy half: mean near 250 MHz
        let mean: f64 = atoms.iter().map(|(d, _)| d).sum::<f64>() / 500.0;
        assert!((mean - 250e6).abs() < 10e6, "mean {mean}");
        // deterministic
        let again = sample_atoms_from_profile(&prof, 500).unwrap();
        assert_eq!(atoms, again);
    }

    #[test]
    fn metrics_guards() {
        let trace = EchoTrace { dt_s: 1e-11, t_start_s: -1e-9, intensity: vec![1.0; 4096] };
        assert!(matches!(
            extract_metrics(&trace, 12.5e-9, 0.0, 1e-3),
            Err(Error::ZeroInputEnergy)
        ));
        assert!(matches!(
            extract_metrics(&trace, 2e-11, 1.0, 1e-3),
            Err(Error::BadEchoWindows { .. })
        ));
    }
}
