//! Spectral hole burning by optical pumping.
//!
//! Ion classes are labelled by the detuning of their reference transition
//! (|+-1/2 g> -> |+-1/2 e>) and tracked as ground-state population triples
//! `(n_1/2, n_3/2, n_5/2)`. A frequency comb of pump teeth drives the nine
//! optical transitions of each class; the excited state is adiabatically
//! eliminated, so one integration step removes `n_g * (1 - exp(-W_g dt))`
//! from level `g` and redistributes it through the branching ratios of the
//! excited levels that absorbed it. Ground-state relaxation is neglected
//! (lifetimes are orders of magnitude longer than burn times), so population
//! is conserved per class by construction.
//!
//! Laser instability is modelled by resampling a uniform frequency excursion
//! of the whole comb (and optionally of the tooth spacing, which makes the
//! comb "breathe" around its center) every integration macro-step, and
//! averaging over independent realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, fft_forward, fft_inverse, pairwise_sum_by};
use crate::spectral::{
    lorentzian_unit_peak, transition_table, FrequencyGrid, HyperfineScheme, InhomogeneousLine,
    OpticalDepthProfile,
};

/// Pump Lorentzians are truncated beyond this many tooth widths; the
/// neglected rate is below 1e-5 of a resonant tooth.
const PUMP_CUTOFF_WIDTHS: f64 = 200.0;

/// Padding (in tooth widths) around the probe window when rendering OD, so
/// kernel tails from classes outside the window are accounted for.
const RENDER_PAD_WIDTHS: f64 = 300.0;

/// Pump comb: `2 * n_teeth_half + 1` teeth spaced `rep_rate_hz`, centered at
/// `center_offset_hz`, with a Gaussian intensity envelope (FWHM
/// `envelope_fwhm_hz`, normalized to 1 at the center tooth). Each tooth pumps
/// with a Lorentzian profile of FWHM `tooth_width_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurnComb {
    rep_rate_hz: f64,
    n_teeth_half: usize,
    center_offset_hz: f64,
    envelope_fwhm_hz: f64,
    tooth_width_hz: f64,
}

impl BurnComb {
    pub fn new(
        rep_rate_hz: f64,
        n_teeth_half: usize,
        center_offset_hz: f64,
        envelope_fwhm_hz: f64,
        tooth_width_hz: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("rep_rate_hz", rep_rate_hz),
            ("envelope_fwhm_hz", envelope_fwhm_hz),
            ("tooth_width_hz", tooth_width_hz),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid("comb", format!("{name} = {v}, need > 0")));
            }
        }
        if !center_offset_hz.is_finite() {
            return Err(Error::NonFinite { what: "comb center" });
        }
        Ok(BurnComb {
            rep_rate_hz,
            n_teeth_half,
            center_offset_hz,
            envelope_fwhm_hz,
            tooth_width_hz,
        })
    }

    pub fn rep_rate_hz(&self) -> f64 {
        self.rep_rate_hz
    }

    pub fn n_teeth_half(&self) -> usize {
        self.n_teeth_half
    }

    pub fn center_offset_hz(&self) -> f64 {
        self.center_offset_hz
    }

    pub fn envelope_fwhm_hz(&self) -> f64 {
        self.envelope_fwhm_hz
    }

    pub fn tooth_width_hz(&self) -> f64 {
        self.tooth_width_hz
    }

    pub fn tooth_count(&self) -> usize {
        2 * self.n_teeth_half + 1
    }

    /// Intensity weight of tooth `m` (nominal position), normalized so the
    /// center tooth has weight 1.
    pub fn tooth_weight(&self, m: i64) -> f64 {
        let x = m as f64 * self.rep_rate_hz / self.envelope_fwhm_hz;
        (-4.0 * std::f64::consts::LN_2 * x * x).exp()
    }

    /// Nominal (jitter-free) position of tooth `m`.
    pub fn tooth_position_hz(&self, m: i64) -> f64 {
        self.center_offset_hz + m as f64 * self.rep_rate_hz
    }

    fn weights(&self) -> Vec<f64> {
        let m_half = self.n_teeth_half as i64;
        (-m_half..=m_half).map(|m| self.tooth_weight(m)).collect()
    }
}

/// Laser-instability model: per macro-step the whole comb shifts by a uniform
/// sample from `[-center_amplitude_hz, +center_amplitude_hz]` and the tooth
/// spacing changes by a uniform sample from the rep-rate amplitude (tooth `m`
/// moves by `m * excursion`: the comb breathes around its center tooth).
#[derive(Debug, Clone, PartialEq)]
pub struct JitterModel {
    pub center_amplitude_hz: f64,
    pub rep_rate_amplitude_hz: f64,
    pub n_realizations: usize,
    pub seed: u64,
}

impl JitterModel {
    pub fn new(
        center_amplitude_hz: f64,
        rep_rate_amplitude_hz: f64,
        n_realizations: usize,
        seed: u64,
    ) -> Result<Self> {
        for (name, v) in [
            ("center_amplitude_hz", center_amplitude_hz),
            ("rep_rate_amplitude_hz", rep_rate_amplitude_hz),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid("jitter", format!("{name} = {v}, need >= 0")));
            }
        }
        if n_realizations == 0 {
            return Err(Error::invalid("jitter", "n_realizations = 0, need >= 1"));
        }
        Ok(JitterModel { center_amplitude_hz, rep_rate_amplitude_hz, n_realizations, seed })
    }

    pub fn off(seed: u64) -> Self {
        JitterModel {
            center_amplitude_hz: 0.0,
            rep_rate_amplitude_hz: 0.0,
            n_realizations: 1,
            seed,
        }
    }
}

/// Burn schedule: saturation pump rate (1/s, resonant tooth of unit weight),
/// total burn duration and the integration macro-step (which is also the
/// jitter resampling period).
#[derive(Debug, Clone, PartialEq)]
pub struct BurnConfig {
    pub pump_rate_per_s: f64,
    pub duration_s: f64,
    pub dt_s: f64,
}

impl BurnConfig {
    pub fn new(pump_rate_per_s: f64, duration_s: f64, dt_s: f64) -> Result<Self> {
        if !pump_rate_per_s.is_finite() || pump_rate_per_s < 0.0 {
            return Err(Error::invalid("burn", format!("pump_rate_per_s = {pump_rate_per_s}, need >= 0")));
        }
        if !duration_s.is_finite() || duration_s < 0.0 {
            return Err(Error::invalid("burn", format!("duration_s = {duration_s}, need >= 0")));
        }
        if !dt_s.is_finite() || dt_s <= 0.0 {
            return Err(Error::invalid("burn", format!("dt_s = {dt_s}, need > 0")));
        }
        Ok(BurnConfig { pump_rate_per_s, duration_s, dt_s })
    }
}

/// Ground-state populations per ion class. `pops[i]` is the population triple
/// of the class whose reference transition sits at `class_grid.value(i)`;
/// each triple sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationField {
    pub class_grid: FrequencyGrid,
    pub pops: Vec<[f64; 3]>,
}

impl PopulationField {
    /// Worst deviation of a class population sum from 1.
    pub fn max_sum_error(&self) -> f64 {
        self.pops
            .iter()
            .map(|p| (p[0] + p[1] + p[2] - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// All classes in the thermal state: equal thirds in each ground level.
pub fn thermal_populations(class_grid: &FrequencyGrid) -> PopulationField {
    let third = 1.0 / 3.0;
    PopulationField {
        class_grid: class_grid.clone(),
        pops: vec![[third; 3]; class_grid.n_points()],
    }
}

struct BurnSetup {
    offsets: [[f64; 3]; 3],
    strengths: [[f64; 3]; 3],
    beta: [[f64; 3]; 3],
    weights: Vec<f64>,
    cutoff_hz: f64,
    active: std::ops::Range<usize>,
    n_full_steps: usize,
    last_dt_s: f64,
}

fn prepare_burn(
    pops: &PopulationField,
    comb: &BurnComb,
    jitter: &JitterModel,
    config: &BurnConfig,
    scheme: &HyperfineScheme,
) -> Result<BurnSetup> {
    let grid = &pops.class_grid;
    let w = comb.tooth_width_hz;
    if grid.spacing_hz() > w / 2.0 {
        return Err(Error::ClassGridTooCoarse {
            spacing_hz: grid.spacing_hz(),
            required_hz: w / 2.0,
        });
    }

    let m_half = comb.n_teeth_half as f64;
    let max_spread = m_half * (comb.rep_rate_hz + jitter.rep_rate_amplitude_hz);
    let teeth_lo = comb.center_offset_hz - jitter.center_amplitude_hz - max_spread;
    let teeth_hi = comb.center_offset_hz + jitter.center_amplitude_hz + max_spread;
    if teeth_hi < grid.min_hz() || teeth_lo > grid.max_hz() {
        return Err(Error::MismatchedGrids {
            context: format!(
                "comb teeth ({teeth_lo:.3e}..{teeth_hi:.3e} Hz) do not overlap the class grid \
                 ({:.3e}..{:.3e} Hz)",
                grid.min_hz(),
                grid.max_hz()
            ),
        });
    }

    let table = transition_table(scheme);
    let mut offsets = [[0.0; 3]; 3];
    for t in table {
        offsets[t.ground][t.excited] = t.offset_hz;
    }
    let max_offset = table.iter().map(|t| t.offset_hz.abs()).fold(0.0, f64::max);

    let cutoff_hz = PUMP_CUTOFF_WIDTHS * w;
    // Classes that can never see a tooth within the cutoff stay thermal and
    // are skipped entirely.
    let reach = cutoff_hz + max_offset;
    let lo = grid.fractional_index(teeth_lo - reach).floor().max(0.0) as usize;
    let hi = (grid.fractional_index(teeth_hi + reach).ceil() as isize + 1)
        .clamp(0, grid.n_points() as isize) as usize;

    let n_full_steps = (config.duration_s / config.dt_s + 1e-9).floor() as usize;
    let last_dt_s = config.duration_s - n_full_steps as f64 * config.dt_s;

    Ok(BurnSetup {
        offsets,
        strengths: *scheme.strength(),
        beta: scheme.branching(),
        weights: comb.weights(),
        cutoff_hz,
        active: lo..hi,
        n_full_steps,
        last_dt_s,
    })
}

/// Advance every class of one realization by one macro-step. Returns the
/// largest `W_g * dt` encountered (for the saturated-step guard).
fn burn_step(
    pops: &mut [[f64; 3]],
    grid: &FrequencyGrid,
    setup: &BurnSetup,
    comb: &BurnComb,
    pump_rate: f64,
    dt: f64,
    center_excursion: f64,
    rep_excursion: f64,
) -> f64 {
    let c0 = comb.center_offset_hz + center_excursion;
    let period = comb.rep_rate_hz + rep_excursion;
    let m_half = comb.n_teeth_half as i64;
    let hw = 0.5 * comb.tooth_width_hz;
    let q = hw * hw;
    let cutoff = setup.cutoff_hz;
    let active = setup.active.clone();
    let base = active.start;

    pops[active]
        .par_iter_mut()
        .enumerate()
        .map(|(k, n)| {
            let nu_class = grid.value(base + k);
            // W_ge = pump * sum over teeth near (class + offset)
            let mut w_ge = [[0.0f64; 3]; 3];
            let mut w_g = [0.0f64; 3];
            for g in 0..3 {
                for e in 0..3 {
                    let f = setup.strengths[g][e];
                    if f == 0.0 {
                        continue;
                    }
                    let x = nu_class + setup.offsets[g][e];
                    let m_lo = ((x - cutoff - c0) / period).ceil().max(-(m_half as f64)) as i64;
                    let m_hi = ((x + cutoff - c0) / period).floor().min(m_half as f64) as i64;
                    let mut s = 0.0;
                    for m in m_lo..=m_hi {
                        let d = c0 + m as f64 * period - x;
                        s += setup.weights[(m + m_half) as usize] * q / (d * d + q);
                    }
                    let r = pump_rate * f * s;
                    w_ge[g][e] = r;
                    w_g[g] += r;
                }
            }

            let max_w_dt = w_g.iter().fold(0.0f64, |a, w| a.max(w * dt));

            let mut next = [0.0f64; 3];
            for g in 0..3 {
                let x = w_g[g] * dt;
                if x == 0.0 {
                    next[g] += n[g];
                    continue;
                }
                let survive = (-x).exp();
                let excited = n[g] * (-(-x).exp_m1());
                next[g] += n[g] * survive;
                for e in 0..3 {
                    if w_ge[g][e] == 0.0 {
                        continue;
                    }
                    let through_e = excited * (w_ge[g][e] / w_g[g]);
                    for (g2, next_g2) in next.iter_mut().enumerate() {
                        *next_g2 += through_e * setup.beta[e][g2];
                    }
                }
            }
            debug_assert!((next[0] + next[1] + next[2] - 1.0).abs() < 1e-11);
            *n = next;
            max_w_dt
        })
        .reduce(|| 0.0, f64::max)
}

fn burn_one_realization(
    initial: &PopulationField,
    comb: &BurnComb,
    jitter: &JitterModel,
    config: &BurnConfig,
    setup: &BurnSetup,
    realization: usize,
) -> Result<PopulationField> {
    let mut field = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(jitter.seed, realization as u64));
    let ac = jitter.center_amplitude_hz;
    let ar = jitter.rep_rate_amplitude_hz;
    let steps = (0..setup.n_full_steps)
        .map(|_| config.dt_s)
        .chain((setup.last_dt_s > 1e-12 * config.dt_s).then_some(setup.last_dt_s));
    for dt in steps {
        // unit draws scaled by the amplitudes: the same seed maps larger
        // amplitudes to proportionally larger excursion sequences
        let dc = ac * rng.gen_range(-1.0..=1.0);
        let dr = ar * rng.gen_range(-1.0..=1.0);
        let max_w_dt = burn_step(
            &mut field.pops,
            &field.class_grid,
            setup,
            comb,
            config.pump_rate_per_s,
            dt,
            dc,
            dr,
        );
        if max_w_dt > 5.0 {
            return Err(Error::StepTooCoarse { max_w_dt });
        }
    }
    Ok(field)
}

/// Burn and return each jitter realization separately (index `r` uses the
/// sub-seed derived from `jitter.seed` and `r`).
pub fn burn_realizations(
    pops: &PopulationField,
    comb: &BurnComb,
    jitter: &JitterModel,
    config: &BurnConfig,
    scheme: &HyperfineScheme,
) -> Result<Vec<PopulationField>> {
    let setup = prepare_burn(pops, comb, jitter, config, scheme)?;
    (0..jitter.n_realizations)
        .map(|r| burn_one_realization(pops, comb, jitter, config, &setup, r))
        .collect()
}

/// Average population fields in fixed pairwise order (realization index), so
/// the result is independent of how the realizations were scheduled.
pub fn average_fields(fields: &[PopulationField]) -> Result<PopulationField> {
    let first = fields.first().ok_or_else(|| Error::invalid("average", "no fields"))?;
    if fields.iter().any(|f| f.class_grid != first.class_grid) {
        return Err(Error::MismatchedGrids { context: "population fields".into() });
    }
    let n = fields.len() as f64;
    let pops = (0..first.pops.len())
        .map(|i| {
            let mut triple = [0.0; 3];
            for (slot, t) in triple.iter_mut().enumerate() {
                *t = pairwise_sum_by(0..fields.len(), |r| fields[r].pops[i][slot]) / n;
            }
            triple
        })
        .collect();
    Ok(PopulationField { class_grid: first.class_grid.clone(), pops })
}

/// Burn the comb into the population field, averaged over jitter
/// realizations. Identical seeds give identical results.
pub fn burn(
    pops: &PopulationField,
    comb: &BurnComb,
    jitter: &JitterModel,
    config: &BurnConfig,
    scheme: &HyperfineScheme,
) -> Result<PopulationField> {
    let fields = burn_realizations(pops, comb, jitter, config, scheme)?;
    average_fields(&fields)
}

/// Render the optical depth of a population field on a probe grid.
///
/// Each class contributes its nine transitions, weighted by the unburned line
/// density at the class detuning and broadened by the same Lorentzian used
/// for pumping (`homogeneous_fwhm_hz`). Classes outside the field's grid are
/// taken as thermal, continuing on the same class spacing, so the profile is
/// valid across the whole probe window. With thermal populations the result
/// reproduces `line_profile` (row-normalized strengths sum out).
pub fn od_from_populations(
    pops: &PopulationField,
    scheme: &HyperfineScheme,
    line: &InhomogeneousLine,
    probe_grid: &FrequencyGrid,
    homogeneous_fwhm_hz: f64,
) -> Result<OpticalDepthProfile> {
    let w = homogeneous_fwhm_hz;
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::invalid("render", format!("homogeneous_fwhm_hz = {w}, need > 0")));
    }
    let delta = probe_grid.spacing_hz();
    if delta > w / 4.0 {
        return Err(Error::GridUnderResolved { spacing_hz: delta, required_hz: w / 4.0 });
    }
    let class_spacing = pops.class_grid.spacing_hz();
    if class_spacing > w / 2.0 {
        return Err(Error::ClassGridTooCoarse {
            spacing_hz: class_spacing,
            required_hz: w / 2.0,
        });
    }

    let table = transition_table(scheme);
    let max_offset = table.iter().map(|t| t.offset_hz.abs()).fold(0.0, f64::max);

    let pad = ((RENDER_PAD_WIDTHS * w) / delta).ceil() as usize + 2;
    let n = probe_grid.n_points();
    let n_ext = n + 2 * pad;
    let ext_min = probe_grid.min_hz() - pad as f64 * delta;

    // Deposit transition weights onto the extended grid. Each class stands
    // for the density segment of one class bin, so its mass is spread as a
    // box of one class spacing: the box transform has zeros at every
    // harmonic of the class comb, which is what keeps the discrete class
    // sampling from leaving a spurious ripple in the rendered OD. The
    // per-bin fractions are renormalized to sum to exactly 1, so burning
    // cannot change the integrated OD.
    let mut deposit = vec![0.0f64; n_ext];
    let class_min = pops.class_grid.min_hz();
    let n_classes = pops.class_grid.n_points() as i64;
    let j_lo = ((ext_min - max_offset - class_min) / class_spacing).floor() as i64 - 1;
    let j_hi = ((ext_min + (n_ext as f64) * delta + max_offset - class_min) / class_spacing)
        .ceil() as i64
        + 1;
    let half_box = 0.5 * class_spacing / delta;
    let thermal = [1.0 / 3.0; 3];
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(8);
    for j in j_lo..=j_hi {
        let nu_class = class_min + j as f64 * class_spacing;
        let n_pop = if (0..n_classes).contains(&j) {
            &pops.pops[j as usize]
        } else {
            &thermal
        };
        let density = line.od_at(nu_class);
        if density == 0.0 {
            continue;
        }
        for t in &table {
            let mass = density * n_pop[t.ground] * t.strength;
            let u = (nu_class + t.offset_hz - ext_min) / delta;
            let (lo, hi) = (u - half_box, u + half_box);
            if lo < 0.0 || hi >= (n_ext - 1) as f64 {
                continue;
            }
            // cells are centered on the grid points: bin b covers b +- 1/2
            fracs.clear();
            let mut total = 0.0;
            let mut b = (lo + 0.5).floor() as usize;
            while b as f64 - 0.5 < hi {
                let overlap = hi.min(b as f64 + 0.5) - lo.max(b as f64 - 0.5);
                fracs.push((b, overlap));
                total += overlap;
                b += 1;
            }
            for &(i, frac) in &fracs {
                deposit[i] += mass * frac / total;
            }
        }
    }

    // Convolve with the normalized Lorentzian kernel by FFT. Normalization
    // pi*w/2 is the kernel's analytic integral; dividing by the class spacing
    // converts the class sum into a density integral.
    let kernel_scale = 2.0 * class_spacing / (std::f64::consts::PI * w);
    let mut ka: Vec<num_complex::Complex64> = (0..n_ext)
        .map(|i| {
            let k = i.min(n_ext - i) as f64;
            num_complex::Complex64::new(
                lorentzian_unit_peak(k * delta, w) * kernel_scale,
                0.0,
            )
        })
        .collect();
    let mut da: Vec<num_complex::Complex64> =
        deposit.iter().map(|m| num_complex::Complex64::new(*m, 0.0)).collect();
    fft_forward(&mut ka);
    fft_forward(&mut da);
    for (d, k) in da.iter_mut().zip(ka.iter()) {
        *d *= *k;
    }
    fft_inverse(&mut da);

    let od: Vec<f64> = da[pad..pad + n].iter().map(|v| v.re).collect();
    OpticalDepthProfile::new(probe_grid.clone(), od)
}

/// Comb contrast `(OD_max - OD_min) / OD_max` over a window, where the max
/// and min are means of the per-period maxima and minima. The window must
/// cover at least three whole comb periods.
pub fn comb_contrast(
    profile: &OpticalDepthProfile,
    window_center_hz: f64,
    window_width_hz: f64,
    period_hz: f64,
) -> Result<f64> {
    if !window_width_hz.is_finite() || window_width_hz <= 0.0 || !period_hz.is_finite() || period_hz <= 0.0 {
        return Err(Error::DegenerateWindow {
            reason: format!("width {window_width_hz} Hz, period {period_hz} Hz"),
        });
    }
    let lo = window_center_hz - window_width_hz / 2.0;
    let hi = window_center_hz + window_width_hz / 2.0;
    let grid = &profile.grid;
    if !grid.contains(lo) || !grid.contains(hi) {
        return Err(Error::DegenerateWindow {
            reason: format!(
                "window {lo:.3e}..{hi:.3e} Hz not inside grid {:.3e}..{:.3e} Hz",
                grid.min_hz(),
                grid.max_hz()
            ),
        });
    }
    let n_periods = (window_width_hz / period_hz).floor() as usize;
    if n_periods < 3 {
        return Err(Error::DegenerateWindow {
            reason: format!("window covers {n_periods} comb periods, need >= 3"),
        });
    }
    if period_hz < 4.0 * grid.spacing_hz() {
        return Err(Error::DegenerateWindow {
            reason: "grid does not resolve the comb period".into(),
        });
    }

    let mut maxima = Vec::with_capacity(n_periods);
    let mut minima = Vec::with_capacity(n_periods);
    for p in 0..n_periods {
        let a = grid.nearest_index(lo + p as f64 * period_hz);
        let b = grid.nearest_index(lo + (p + 1) as f64 * period_hz);
        let slice = &profile.od[a..=b];
        maxima.push(slice.iter().cloned().fold(f64::MIN, f64::max));
        minima.push(slice.iter().cloned().fold(f64::MAX, f64::min));
    }
    let od_max = pairwise_sum_by(0..maxima.len(), |i| maxima[i]) / n_periods as f64;
    let od_min = pairwise_sum_by(0..minima.len(), |i| minima[i]) / n_periods as f64;
    if od_max <= 0.0 {
        return Err(Error::DegenerateWindow { reason: "optical depth is zero in window".into() });
    }
    Ok((od_max - od_min) / od_max)
}

/// FWHM of the spectral hole near `tooth_frequency_hz`, measured between the
/// half-depth crossings relative to the local baseline (mean of the flanking
/// maxima within `search_halfwidth_hz`).
pub fn hole_width(
    profile: &OpticalDepthProfile,
    tooth_frequency_hz: f64,
    search_halfwidth_hz: f64,
) -> Result<f64> {
    let grid = &profile.grid;
    if !search_halfwidth_hz.is_finite() || search_halfwidth_hz <= 0.0 {
        return Err(Error::DegenerateWindow {
            reason: format!("search_halfwidth_hz = {search_halfwidth_hz}"),
        });
    }
    if !grid.contains(tooth_frequency_hz) {
        return Err(Error::DegenerateWindow {
            reason: format!("tooth at {tooth_frequency_hz:.3e} Hz outside grid"),
        });
    }
    let a = grid.nearest_index(tooth_frequency_hz - search_halfwidth_hz);
    let b = grid.nearest_index(tooth_frequency_hz + search_halfwidth_hz);
    if b - a < 8 {
        return Err(Error::DegenerateWindow { reason: "search window too narrow".into() });
    }
    let od = &profile.od;
    let min_idx = (a..=b)
        .min_by(|i, j| od[*i].partial_cmp(&od[*j]).expect("finite OD"))
        .expect("non-empty window");
    let od_min = od[min_idx];
    let left_max = od[a..=min_idx].iter().cloned().fold(f64::MIN, f64::max);
    let right_max = od[min_idx..=b].iter().cloned().fold(f64::MIN, f64::max);
    let baseline = 0.5 * (left_max + right_max);
    if !(od_min < 0.95 * baseline) {
        return Err(Error::NotAHole { at_hz: tooth_frequency_hz });
    }
    let level = 0.5 * (baseline + od_min);

    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = min_idx;
        for i in range {
            if od[i] >= level {
                let frac = (level - od[prev]) / (od[i] - od[prev]);
                let x_prev = grid.value(prev);
                return Some(x_prev + frac * (grid.value(i) - x_prev));
            }
            prev = i;
        }
        None
    };
    let right = cross(&mut ((min_idx + 1)..=b));
    let left = cross(&mut (a..min_idx).rev());
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::DegenerateWindow {
            reason: "hole does not recover to half depth inside the search window".into(),
        }),
    }
}
