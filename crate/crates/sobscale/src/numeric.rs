//! Deterministic reductions used by every norm and inner product.
//!
//! All sums in this crate go through the fixed pairwise tree implemented
//! here: a slice is split at its midpoint recursively, and runs of at most
//! 32 elements are added left to right. The tree depends only on the length
//! of the slice, never on thread count or data values, so results are
//! bit-for-bit reproducible run to run. The O(log n) error growth of
//! pairwise summation also keeps long reductions near machine precision.

use num_complex::Complex64;

const PAIRWISE_LEAF: usize = 32;

/// Sums real values over the fixed pairwise tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sums complex values over the fixed pairwise tree.
pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = Complex64::new(0.0, 0.0);
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// `count` evenly spaced values from a to b inclusive.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "linspace needs at least two points");
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { b } else { a + step * i as f64 })
        .collect()
}

/// Relative deviation |a - b| / max(|a|, |b|), zero when both vanish.
pub fn rel_dev(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
