//! Deterministic numeric helpers shared across modules.
//!
//! Reductions that feed physical invariants (population sums, energies,
//! Monte-Carlo averages) use pairwise summation in a fixed order, so results
//! do not depend on thread count or reduction scheduling.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Pairwise sum of `f(i)` over an index range. Error grows like
/// O(log n * eps) instead of O(n * eps) for sequential summation.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(range: std::ops::Range<usize>, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        match hi - lo {
            0 => 0.0,
            1 => f(lo),
            2 => f(lo) + f(lo + 1),
            n => {
                let mid = lo + n / 2;
                go(lo, mid, f) + go(mid, hi, f)
            }
        }
    }
    go(range.start, range.end, &f)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(0..xs.len(), |i| xs[i])
}

/// SplitMix64 step; used to derive independent, reproducible seeds for jitter
/// realizations and sweep rows from one base seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for a numbered sub-stream (jitter realization `index` of a burn).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// Seed for a sweep row: mixes the base seed with the row's parameter value,
/// so a row's result depends on its value, not its position in the list.
pub fn derive_seed_for_value(base: u64, value: f64) -> u64 {
    splitmix64(base ^ splitmix64(value.to_bits()))
}

/// In-place forward DFT (negative exponent).
pub fn fft_forward(data: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// In-place inverse DFT including the 1/N normalization.
pub fn fft_inverse(data: &mut [Complex64]) {
    FftPlanner::new().plan_fft_inverse(data.len()).process(data);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_exact_small() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // stable across calls
        assert_eq!(a, derive_seed(42, 0));
    }

    #[test]
    fn value_seed_ignores_position() {
        assert_eq!(derive_seed_for_value(7, 2.5), derive_seed_for_value(7, 2.5));
        assert_ne!(derive_seed_for_value(7, 2.5), derive_seed_for_value(7, 2.5000001));
    }

    #[test]
    fn fft_round_trip() {
        let mut data: Vec<Complex64> =
            (0..64).map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos())).collect();
        let orig = data.clone();
        fft_forward(&mut data);
        fft_inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_parseval() {
        let mut data: Vec<Complex64> =
            (0..128).map(|i| Complex64::new((i as f64).cos(), 0.0)).collect();
        let e_time: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        fft_forward(&mut data);
        let e_freq: f64 = data.iter().map(|v| v.norm_sqr()).sum::<f64>() / 128.0;
        assert_relative_eq!(e_time, e_freq, max_relative = 1e-12);
    }
}
