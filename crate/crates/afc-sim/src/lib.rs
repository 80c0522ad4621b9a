//! Simulator of broadband atomic-frequency-comb (AFC) optical memories in
//! rare-earth-doped crystals.
//!
//! The pipeline mirrors the experiment: a frequency-comb pump burns spectral
//! holes into the inhomogeneous absorption line by optical pumping between
//! hyperfine ground states ([`holeburn`]); the resulting optical-depth comb
//! defines a causal (minimum-phase) transfer function; a weak probe pulse is
//! propagated through it by FFT, producing a train of photon echoes spaced by
//! the inverse comb spacing ([`echo`]); scenario orchestration, parameter
//! sweeps and serialization live in [`analysis`] and [`config`].
//!
//! All frequencies are detunings (Hz) from the inhomogeneous line center.
//! Every stochastic element (laser jitter) is driven by explicit seeds, and
//! all reductions are fixed-order, so results are bit-reproducible across
//! runs and thread counts.

pub mod analysis;
pub mod config;
pub mod echo;
pub mod error;
pub mod holeburn;
pub mod io;
pub mod numerics;
pub mod plot;
pub mod spectral;

pub use error::{Error, Result};
