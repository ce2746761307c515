//! Shared descriptive statistics.
//!
//! Every quantile in the crate goes through [`quantile_sorted`] so that
//! signatures, wait-time summaries, and stability reports all use the same
//! interpolation rule and are reproducible bit-for-bit.

use crate::num::Scalar;

/// Quantile by linear interpolation between closest ranks.
///
/// For a sorted sample `x_0..x_{n-1}` and `q` in `[0, 1]`, the rank position
/// is `h = (n - 1) * q` and the result is
/// `x_floor(h) + (h - floor(h)) * (x_floor(h)+1 - x_floor(h))`.
///
/// Panics if `values` is empty or not sorted ascending (debug only).
pub fn quantile_sorted<F: Scalar>(values: &[F], q: F) -> F {
    assert!(!values.is_empty(), "quantile of empty sample");
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]), "sample not sorted");
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let h = F::from_usize_lossy(n - 1) * q;
    let lo = h.floor();
    let idx = lo
        .to_usize()
        .unwrap_or(0)
        .min(n - 1);
    if idx + 1 >= n {
        return values[n - 1];
    }
    values[idx] + (h - lo) * (values[idx + 1] - values[idx])
}

/// Quantile of an unsorted sample; sorts a copy.
pub fn quantile<F: Scalar>(values: &[F], q: F) -> F {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in sample"));
    quantile_sorted(&v, q)
}

pub fn mean<F: Scalar>(values: &[F]) -> F {
    assert!(!values.is_empty(), "mean of empty sample");
    values.iter().copied().sum::<F>() / F::from_usize_lossy(values.len())
}

/// Population standard deviation (n denominator).
pub fn std_pop<F: Scalar>(values: &[F]) -> F {
    let m = mean(values);
    let ss = values
        .iter()
        .map(|&v| (v - m) * (v - m))
        .sum::<F>();
    (ss / F::from_usize_lossy(values.len())).sqrt()
}

/// Sample standard deviation (n-1 denominator); 0 for samples of size 1.
pub fn std_sample<F: Scalar>(values: &[F]) -> F {
    if values.len() < 2 {
        return F::zero();
    }
    let m = mean(values);
    let ss = values
        .iter()
        .map(|&v| (v - m) * (v - m))
        .sum::<F>();
    (ss / F::from_usize_lossy(values.len() - 1)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_is_its_own_quantile() {
        assert_eq!(quantile_sorted(&[42.0], 0.1), 42.0);
        assert_eq!(quantile_sorted(&[42.0], 0.9), 42.0);
    }

    // Hand evaluation of the interpolation rule on {0,10,...,90}:
    // p10 rank h = 9*0.1 = 0.9 -> 0 + 0.9*10 = 9; p90 h = 8.1 -> 80 + 0.1*10 = 81.
    #[test]
    fn decile_interpolation_matches_hand_computation() {
        let v: Vec<f64> = (0..10).map(|i| (i * 10) as f64).collect();
        assert!((quantile_sorted(&v, 0.1) - 9.0).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.9) - 81.0).abs() < 1e-12);
    }

    #[test]
    fn median_of_three() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(std_pop(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(std_sample(&[5.0, 5.0, 5.0]), 0.0);
    }
}
