//! Ordinary least squares on a dense design matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedMatrix { row: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<F> {
    pub intercept: F,
    pub coefficients: Vec<F>,
}

impl<F: Scalar> LinearModel<F> {
    pub fn predict(&self, x: &[F]) -> F {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(&c, &v)| c * v)
                .sum::<F>()
    }
}

/// Least-squares fit via the normal equations with Gaussian elimination and
/// partial pivoting; an intercept column is added internally.
pub fn fit_linear<F: Scalar>(x: &[Vec<F>], y: &[F]) -> Result<LinearModel<F>, LinearError> {
    let n = x.len();
    if n < 2 {
        return Err(LinearError::TooFewRows(n));
    }
    let p = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(LinearError::RaggedMatrix { row: i, got: row.len(), expected: p });
        }
    }
    let cols = p + 1; // intercept first

    // Normal equations: A = X'X, b = X'y, with X including the 1s column.
    let mut a = vec![vec![F::zero(); cols]; cols];
    let mut b = vec![F::zero(); cols];
    let design_value = |row: usize, col: usize| -> F {
        if col == 0 {
            F::one()
        } else {
            x[row][col - 1]
        }
    };
    for i in 0..cols {
        for j in i..cols {
            let mut s = F::zero();
            for r in 0..n {
                s += design_value(r, i) * design_value(r, j);
            }
            a[i][j] = s;
            a[j][i] = s;
        }
        let mut s = F::zero();
        for r in 0..n {
            s += design_value(r, i) * y[r];
        }
        b[i] = s;
    }

    let beta = solve(a, b)?;
    Ok(LinearModel { intercept: beta[0], coefficients: beta[1..].to_vec() })
}

fn solve<F: Scalar>(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Result<Vec<F>, LinearError> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(F::zero(), F::max)
        .max(F::one());
    let tol = scale * F::from_f64_lossy(1e-12);

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("nonempty");
        if a[pivot_row][col].abs() <= tol {
            return Err(LinearError::RankDeficient);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let bv = b[col];
            b[row] -= factor * bv;
        }
    }

    let mut beta = vec![F::zero(); n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * beta[k];
        }
        beta[col] = s / a[col][col];
    }
    Ok(beta)
}

pub fn residuals<F: Scalar>(model: &LinearModel<F>, x: &[Vec<F>], y: &[F]) -> Vec<F> {
    x.iter().zip(y).map(|(row, &yi)| yi - model.predict(row)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_line_recovered() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let m = fit_linear(&x, &y).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
        assert!(residuals(&m, &x, &y).iter().all(|r| r.abs() < 1e-9));
    }

    // Seeded synthetic regression in the attendance range the models see:
    // slope must come back within 0.01.
    #[test]
    fn noisy_slope_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..130 {
            let att = rng.gen_range(10_000.0..75_000.0);
            let noise: f64 = StandardNormal.sample(&mut rng);
            x.push(vec![att]);
            y.push(-1200.0 + 0.174 * att + 300.0 * noise);
        }
        let m = fit_linear(&x, &y).unwrap();
        assert!((m.coefficients[0] - 0.174).abs() < 0.01, "slope {}", m.coefficients[0]);
        assert!(m.coefficients[0] > 0.0 && m.intercept < 1_000.0);
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(0.0..100.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 + 2.0 * r[0] - 0.5 * r[1] + rng.gen_range(-1.0..1.0)).collect();
        let m = fit_linear(&x, &y).unwrap();
        let res = residuals(&m, &x, &y);
        let y_scale: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..2 {
            let dot: f64 = res.iter().zip(&x).map(|(r, row)| r * row[j]).sum();
            let x_scale: f64 = x.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
            assert!(dot.abs() / (x_scale * y_scale).max(1e-12) < 1e-6);
        }
        let sum: f64 = res.iter().sum();
        assert!(sum.abs() / y_scale < 1e-6, "residuals also orthogonal to the intercept");
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_linear(&x, &y), Err(LinearError::RankDeficient)));
    }
}
