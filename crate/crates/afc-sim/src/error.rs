//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: configuration
//! and I/O problems, numerical guard rejections (inputs that would produce
//! unreliable numbers), and wrap-around/causality rejections (outputs that
//! would alias in time or frequency).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // --- configuration / input shape ---
    #[error("invalid {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed CSV: {reason}")]
    CsvParse {
        path: String,
        line: usize,
        reason: String,
    },

    // --- numerical guards ---
    #[error(
        "grid under-resolves minimum feature: spacing {spacing_hz} Hz exceeds {required_hz} Hz \
         (minimum feature / 4)"
    )]
    GridUnderResolved { spacing_hz: f64, required_hz: f64 },

    #[error(
        "class grid too coarse for tooth width: spacing {spacing_hz} Hz exceeds {required_hz} Hz"
    )]
    ClassGridTooCoarse { spacing_hz: f64, required_hz: f64 },

    #[error(
        "burn step too coarse: dt * max(pump rate) = {max_w_dt:.3} exceeds 5; \
         reduce dt_s or pump_rate_per_s"
    )]
    StepTooCoarse { max_w_dt: f64 },

    #[error("mismatched grids: {context}")]
    MismatchedGrids { context: String },

    #[error(
        "grid span insufficient for pulse bandwidth: need {needed_hz} Hz around the pulse \
         center, grid provides {available_hz} Hz"
    )]
    InsufficientSpan { needed_hz: f64, available_hz: f64 },

    #[error("degenerate analysis window: {reason}")]
    DegenerateWindow { reason: String },

    #[error("no hole at {at_hz} Hz: no local minimum below 95% of the local baseline")]
    NotAHole { at_hz: f64 },

    #[error("zero input energy: cannot normalize echo metrics")]
    ZeroInputEnergy,

    #[error("echo windows overlap or are degenerate: {reason}")]
    BadEchoWindows { reason: String },

    #[error("atom count {n} outside supported range [{min}, {max}]")]
    BadAtomCount { n: usize, min: usize, max: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    // --- wrap-around / causality guards ---
    #[error(
        "optical depth does not vanish at grid edges (edge {edge_od:.3e} vs max {max_od:.3e}); \
         transfer function would wrap around in time"
    )]
    EdgeOd { edge_od: f64, max_od: f64 },

    #[error(
        "echo train wraps around the time record: {tail_fraction:.3e} of total energy within \
         5 steps of the record end (limit 1e-4); enlarge the grid point count"
    )]
    TimeWrap { tail_fraction: f64 },

    // --- command-level outcomes ---
    #[error("all {n} sweep rows failed; first error: {first}")]
    SweepAllFailed { n: usize, first: String },

    #[error(
        "oracle disagreement: envelope correlation {correlation:.6} below required {required} \
         (peak time deviation {peak_dev_steps:.2} steps)"
    )]
    OracleFailed {
        correlation: f64,
        required: f64,
        peak_dev_steps: f64,
    },

    // --- pipeline context ---
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            reason: reason.into(),
        }
    }

    /// Tag an error with the pipeline stage it came from (kept once; nested
    /// stages keep the innermost tag).
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The stage tag if present.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Process exit code for the CLI: 2 config/input, 3 numerical guard,
    /// 4 wrap-around/causality, 5 whole sweep failed, 6 oracle failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput { .. }
            | Error::Config(_)
            | Error::Io { .. }
            | Error::CsvParse { .. } => 2,
            Error::GridUnderResolved { .. }
            | Error::ClassGridTooCoarse { .. }
            | Error::StepTooCoarse { .. }
            | Error::MismatchedGrids { .. }
            | Error::InsufficientSpan { .. }
            | Error::DegenerateWindow { .. }
            | Error::NotAHole { .. }
            | Error::ZeroInputEnergy
            | Error::BadEchoWindows { .. }
            | Error::BadAtomCount { .. }
            | Error::NonFinite { .. } => 3,
            Error::EdgeOd { .. } | Error::TimeWrap { .. } => 4,
            Error::SweepAllFailed { .. } => 5,
            Error::OracleFailed { .. } => 6,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
