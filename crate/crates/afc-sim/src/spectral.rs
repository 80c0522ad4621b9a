//! Frequency grids, inhomogeneous line profiles, and the hyperfine transition
//! table.
//!
//! All frequencies are detunings in Hz relative to the center of the
//! inhomogeneous line (line center = 0). Optical depth profiles live on
//! uniform [`FrequencyGrid`]s; the grid constructor enforces that the spacing
//! resolves the narrowest spectral feature of interest by at least 4x.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform frequency grid: `n_points` samples covering `span_hz` centered on
/// `center_hz`. Spacing is `span_hz / (n_points - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center_hz: f64,
    span_hz: f64,
    n_points: usize,
}

impl FrequencyGrid {
    /// Build a grid, rejecting spacings coarser than `min_feature_hz / 4`.
    pub fn new(center_hz: f64, span_hz: f64, n_points: usize, min_feature_hz: f64) -> Result<Self> {
        if !center_hz.is_finite() || !span_hz.is_finite() || !min_feature_hz.is_finite() {
            return Err(Error::NonFinite { what: "grid parameters" });
        }
        if n_points < 2 {
            return Err(Error::invalid("grid", format!("n_points = {n_points}, need at least 2")));
        }
        if span_hz <= 0.0 {
            return Err(Error::invalid("grid", format!("span_hz = {span_hz}, need > 0")));
        }
        if min_feature_hz <= 0.0 {
            return Err(Error::invalid(
                "grid",
                format!("min_feature_hz = {min_feature_hz}, need > 0"),
            ));
        }
        let grid = FrequencyGrid { center_hz, span_hz, n_points };
        let required = min_feature_hz / 4.0;
        if grid.spacing_hz() > required {
            return Err(Error::GridUnderResolved {
                spacing_hz: grid.spacing_hz(),
                required_hz: required,
            });
        }
        Ok(grid)
    }

    /// Grid from data that already exists (e.g. a CSV read back); skips the
    /// feature-resolution guard but keeps the shape checks.
    pub fn from_data(center_hz: f64, span_hz: f64, n_points: usize) -> Result<Self> {
        if !center_hz.is_finite() || !span_hz.is_finite() {
            return Err(Error::NonFinite { what: "grid parameters" });
        }
        if n_points < 2 || span_hz <= 0.0 {
            return Err(Error::invalid("grid", "need n_points >= 2 and span_hz > 0"));
        }
        Ok(FrequencyGrid { center_hz, span_hz, n_points })
    }

    pub fn center_hz(&self) -> f64 {
        self.center_hz
    }

    pub fn span_hz(&self) -> f64 {
        self.span_hz
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing_hz(&self) -> f64 {
        self.span_hz / (self.n_points - 1) as f64
    }

    pub fn min_hz(&self) -> f64 {
        self.center_hz - self.span_hz / 2.0
    }

    pub fn max_hz(&self) -> f64 {
        self.center_hz + self.span_hz / 2.0
    }

    /// Frequency of sample `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.min_hz() + i as f64 * self.spacing_hz()
    }

    /// Fractional sample index of `freq_hz` (may be outside `[0, n-1]`).
    pub fn fractional_index(&self, freq_hz: f64) -> f64 {
        (freq_hz - self.min_hz()) / self.spacing_hz()
    }

    /// Nearest sample index, clamped to the grid.
    pub fn nearest_index(&self, freq_hz: f64) -> usize {
        let i = self.fractional_index(freq_hz).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        // Half-spacing slack so round-tripped endpoints stay inside.
        let slack = 0.5 * self.spacing_hz();
        freq_hz >= self.min_hz() - slack && freq_hz <= self.max_hz() + slack
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.value(i))
    }
}

/// Inhomogeneous absorption line: peak optical depth and FWHM of either a
/// Gaussian or Lorentzian profile centered at zero detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousLine {
    pub fwhm_hz: f64,
    pub peak_od: f64,
    pub shape: LineShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineShape {
    Gaussian,
    Lorentzian,
}

impl InhomogeneousLine {
    pub fn new(fwhm_hz: f64, peak_od: f64, shape: LineShape) -> Result<Self> {
        if !fwhm_hz.is_finite() || !peak_od.is_finite() {
            return Err(Error::NonFinite { what: "line parameters" });
        }
        if fwhm_hz <= 0.0 {
            return Err(Error::invalid("line", format!("fwhm_hz = {fwhm_hz}, need > 0")));
        }
        if peak_od < 0.0 {
            return Err(Error::invalid("line", format!("peak_od = {peak_od}, need >= 0")));
        }
        Ok(InhomogeneousLine { fwhm_hz, peak_od, shape })
    }

    /// Optical depth of the unburned line at detuning `freq_hz`.
    pub fn od_at(&self, freq_hz: f64) -> f64 {
        match self.shape {
            LineShape::Gaussian => {
                let x = freq_hz / self.fwhm_hz;
                self.peak_od * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
            }
            LineShape::Lorentzian => self.peak_od * lorentzian_unit_peak(freq_hz, self.fwhm_hz),
        }
    }
}

/// Unit-peak Lorentzian of the given FWHM.
pub fn lorentzian_unit_peak(x_hz: f64, fwhm_hz: f64) -> f64 {
    let hw = 0.5 * fwhm_hz;
    let q = hw * hw;
    q / (x_hz * x_hz + q)
}

/// Optical depth sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalDepthProfile {
    pub grid: FrequencyGrid,
    pub od: Vec<f64>,
}

impl OpticalDepthProfile {
    pub fn new(grid: FrequencyGrid, od: Vec<f64>) -> Result<Self> {
        if od.len() != grid.n_points() {
            return Err(Error::MismatchedGrids {
                context: format!("profile has {} samples, grid has {}", od.len(), grid.n_points()),
            });
        }
        if od.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "optical depth samples" });
        }
        if let Some(v) = od.iter().find(|v| **v < 0.0) {
            return Err(Error::invalid("optical depth", format!("negative sample {v}")));
        }
        Ok(OpticalDepthProfile { grid, od })
    }

    pub fn max_od(&self) -> f64 {
        self.od.iter().cloned().fold(0.0, f64::max)
    }

    /// Trapezoidal integral of OD over the grid (Hz units).
    pub fn integrated_od(&self) -> f64 {
        let d = self.grid.spacing_hz();
        let inner: f64 = crate::numerics::pairwise_sum_by(1..self.od.len() - 1, |i| self.od[i]);
        d * (inner + 0.5 * (self.od[0] + self.od[self.od.len() - 1]))
    }

    /// Linear interpolation at an arbitrary frequency inside the grid.
    pub fn sample(&self, freq_hz: f64) -> f64 {
        let x = self.grid.fractional_index(freq_hz).clamp(0.0, (self.od.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.od.len() - 2);
        let frac = x - i as f64;
        self.od[i] * (1.0 - frac) + self.od[i + 1] * frac
    }
}

/// Render the unburned line on a grid.
pub fn line_profile(grid: &FrequencyGrid, line: &InhomogeneousLine) -> OpticalDepthProfile {
    let od = grid.iter().map(|f| line.od_at(f)).collect();
    OpticalDepthProfile { grid: grid.clone(), od }
}

/// Three ground and three excited hyperfine levels with relative oscillator
/// strengths between them.
///
/// Splittings are `[s12, s35]`: the gaps between the +-1/2 and +-3/2 levels
/// and between the +-3/2 and +-5/2 levels, in Hz. Level energies increase in
/// the order +-1/2, +-3/2, +-5/2 in both manifolds. `strength[g][e]` is the
/// relative oscillator strength of the `g -> e` transition; each row sums
/// to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineScheme {
    ground_splittings_hz: [f64; 2],
    excited_splittings_hz: [f64; 2],
    strength: [[f64; 3]; 3],
}

pub const ROW_SUM_TOL: f64 = 1e-9;

impl HyperfineScheme {
    pub fn new(
        ground_splittings_hz: [f64; 2],
        excited_splittings_hz: [f64; 2],
        strength: [[f64; 3]; 3],
    ) -> Result<Self> {
        for s in ground_splittings_hz.iter().chain(excited_splittings_hz.iter()) {
            if !s.is_finite() || *s <= 0.0 {
                return Err(Error::invalid("scheme", format!("splitting {s} Hz, need > 0")));
            }
        }
        for (g, row) in strength.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|f| !f.is_finite() || *f < 0.0) {
                return Err(Error::invalid("scheme", format!("strength row {g} has negative or non-finite entries")));
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(
                    "scheme",
                    format!("strength row {g} sums to {sum}, need 1 within {ROW_SUM_TOL:e}"),
                ));
            }
        }
        Ok(HyperfineScheme { ground_splittings_hz, excited_splittings_hz, strength })
    }

    /// Build a scheme from raw strengths, renormalizing each row to sum to 1.
    /// Returns the scheme and the largest relative deviation of a raw row sum
    /// from 1 (callers may warn when it exceeds a few percent).
    pub fn from_raw(
        ground_splittings_hz: [f64; 2],
        excited_splittings_hz: [f64; 2],
        raw_strength: [[f64; 3]; 3],
    ) -> Result<(Self, f64)> {
        let mut strength = raw_strength;
        let mut worst = 0.0f64;
        for (g, row) in strength.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if !sum.is_finite() || sum <= 0.0 {
                return Err(Error::invalid("scheme", format!("strength row {g} sums to {sum}")));
            }
            worst = worst.max((sum - 1.0).abs());
            for f in row.iter_mut() {
                *f /= sum;
            }
        }
        Ok((Self::new(ground_splittings_hz, excited_splittings_hz, strength)?, worst))
    }

    /// Pr3+:Y2SiO5 site-1 values: ground splittings 10.2 / 17.3 MHz, excited
    /// splittings 4.6 / 4.8 MHz, literature oscillator-strength table.
    pub fn pr_yso() -> Self {
        let (scheme, _) = Self::from_raw(
            [10.2e6, 17.3e6],
            [4.6e6, 4.8e6],
            PR_YSO_RAW_STRENGTH,
        )
        .expect("built-in scheme is valid");
        scheme
    }

    pub fn ground_splittings_hz(&self) -> [f64; 2] {
        self.ground_splittings_hz
    }

    pub fn excited_splittings_hz(&self) -> [f64; 2] {
        self.excited_splittings_hz
    }

    pub fn strength(&self) -> &[[f64; 3]; 3] {
        &self.strength
    }

    /// Ladder energies (Hz) of the ground levels, lowest first.
    pub fn ground_energies_hz(&self) -> [f64; 3] {
        let [s12, s35] = self.ground_splittings_hz;
        [0.0, s12, s12 + s35]
    }

    /// Ladder energies (Hz) of the excited levels, lowest first.
    pub fn excited_energies_hz(&self) -> [f64; 3] {
        let [s12, s35] = self.excited_splittings_hz;
        [0.0, s12, s12 + s35]
    }

    /// Branching ratio from excited level `e` back into ground level `g`:
    /// column-normalized oscillator strength.
    pub fn branching(&self) -> [[f64; 3]; 3] {
        let mut beta = [[0.0; 3]; 3];
        for e in 0..3 {
            let col_sum: f64 = (0..3).map(|g| self.strength[g][e]).sum();
            for g in 0..3 {
                beta[e][g] = self.strength[g][e] / col_sum;
            }
        }
        beta
    }
}

/// Raw Pr3+:Y2SiO5 relative oscillator strengths (rows: ground +-1/2, +-3/2,
/// +-5/2; columns: excited +-1/2, +-3/2, +-5/2). Rows are renormalized on use.
pub const PR_YSO_RAW_STRENGTH: [[f64; 3]; 3] = [
    [0.55, 0.38, 0.07],
    [0.40, 0.60, 0.01],
    [0.05, 0.02, 0.93],
];

/// One of the nine optical transitions of a scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEntry {
    pub ground: usize,
    pub excited: usize,
    /// Transition frequency relative to the |+-1/2 g> -> |+-1/2 e> reference
    /// transition of the same ion class.
    pub offset_hz: f64,
    pub strength: f64,
}

/// All nine transitions, ground-major order: (g0,e0), (g0,e1), ... (g2,e2).
///
/// The offset of `(g, e)` is `E_e[e] - E_g[g]` with both ladders referenced to
/// their lowest level, so the reference transition (0,0) has offset 0 and
/// higher ground levels shift transitions to lower frequency.
pub fn transition_table(scheme: &HyperfineScheme) -> [TransitionEntry; 9] {
    let eg = scheme.ground_energies_hz();
    let ee = scheme.excited_energies_hz();
    let mut out = [TransitionEntry { ground: 0, excited: 0, offset_hz: 0.0, strength: 0.0 }; 9];
    for g in 0..3 {
        for e in 0..3 {
            out[g * 3 + e] = TransitionEntry {
                ground: g,
                excited: e,
                offset_hz: ee[e] - eg[g],
                strength: scheme.strength()[g][e],
            };
        }
    }
    out
}
