//! Ridge regression with an unpenalized intercept.
//!
//! Features and targets are centered, the penalized normal equations
//! `(XcᵀXc + λI) w = Xcᵀ tc` are solved by Cholesky factorization, and the
//! intercept is recovered from the means.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Default penalty, relative to the mean centered feature energy.
pub const DEFAULT_RELATIVE_LAMBDA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl RidgeModel {
    pub fn predict(&self, features: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

struct Moments {
    mean_x: DVector<f64>,
    mean_t: f64,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    /// Largest uncentered column energy, the reference for pivot size.
    raw_energy: f64,
}

fn moments(features: &[Vec<f64>], targets: &[f64]) -> Result<Moments> {
    let rows = features.len();
    if rows == 0 {
        return Err(invalid("features", "need at least one row"));
    }
    if targets.len() != rows {
        return Err(Error::LengthMismatch {
            expected: rows,
            found: targets.len(),
        });
    }
    let f = features[0].len();
    if f == 0 {
        return Err(invalid("features", "need at least one column"));
    }
    if let Some(bad) = features.iter().find(|r| r.len() != f) {
        return Err(Error::LengthMismatch {
            expected: f,
            found: bad.len(),
        });
    }
    let n = rows as f64;
    let mut mean_x = DVector::zeros(f);
    for row in features {
        for (m, x) in mean_x.iter_mut().zip(row) {
            *m += x / n;
        }
    }
    let mean_t = targets.iter().sum::<f64>() / n;
    let mut gram = DMatrix::zeros(f, f);
    let mut cross = DVector::zeros(f);
    let mut centered = DVector::zeros(f);
    let mut raw = DVector::<f64>::zeros(f);
    for (row, t) in features.iter().zip(targets) {
        for j in 0..f {
            centered[j] = row[j] - mean_x[j];
            raw[j] += row[j] * row[j];
        }
        gram.syger(1.0, &centered, &centered, 1.0);
        cross.axpy(t - mean_t, &centered, 1.0);
    }
    gram.fill_upper_triangle_with_lower_triangle();
    Ok(Moments {
        mean_x,
        mean_t,
        gram,
        cross,
        raw_energy: raw.max(),
    })
}

fn solve(m: Moments, lambda: f64) -> Result<RidgeModel> {
    let f = m.gram.nrows();
    let reference = m.raw_energy.max(lambda);
    let mut a = m.gram;
    for j in 0..f {
        a[(j, j)] += lambda;
    }
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let min_pivot = chol.l_dirty().diagonal().min();
    if !(min_pivot * min_pivot > 1e-10 * reference) {
        return Err(Error::SingularSystem);
    }
    let w = chol.solve(&m.cross);
    let bias = m.mean_t - w.dot(&m.mean_x);
    Ok(RidgeModel {
        weights: w.iter().copied().collect(),
        bias,
    })
}

/// Minimizes `‖Xw + b − t‖² + λ‖w‖²`.
pub fn ridge_fit(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must be finite and nonnegative"));
    }
    solve(moments(features, targets)?, lambda)
}

/// As [`ridge_fit`] with `λ = relative · trace(XcᵀXc) / F`, so the penalty
/// follows the feature scale. Features without any variation give `λ = 0`
/// and therefore a singular system.
pub fn ridge_fit_relative(
    features: &[Vec<f64>],
    targets: &[f64],
    relative: f64,
) -> Result<RidgeModel> {
    if !(relative >= 0.0) || !relative.is_finite() {
        return Err(invalid("lambda", "must be finite and nonnegative"));
    }
    let m = moments(features, targets)?;
    let lambda = relative * m.gram.trace() / m.gram.nrows() as f64;
    solve(m, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn identity_system_is_exact() {
        let x = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let m = ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0);
        // three rows cannot pin three weights and a bias: centered Gram is rank 2
        assert_eq!(m, Err(Error::SingularSystem));

        let mut x4 = x.clone();
        x4.push(vec![0.0, 0.0, 0.0]);
        let m = ridge_fit(&x4, &[1.0, 2.0, 3.0, 0.0], 0.0).unwrap();
        for (w, e) in m.weights.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*w, e, epsilon = 1e-10);
        }
        assert_relative_eq!(m.bias, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn huge_penalty_returns_mean() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, (i * i % 7) as f64])
            .collect();
        let t: Vec<f64> = (0..20).map(|i| 0.5 * i as f64 + 1.0).collect();
        let m = ridge_fit(&x, &t, 1e15).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
        assert_relative_eq!(m.bias, t.iter().sum::<f64>() / 20.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_features_are_singular_without_penalty() {
        let x = vec![vec![2.0, 2.0]; 10];
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(ridge_fit(&x, &t, 0.0), Err(Error::SingularSystem));
        assert_eq!(ridge_fit_relative(&x, &t, 1e-4), Err(Error::SingularSystem));
        let m = ridge_fit(&x, &t, 1.0).unwrap();
        assert_eq!(m.weights, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_errors() {
        assert!(ridge_fit(&[], &[], 0.1).is_err());
        assert!(ridge_fit(&[vec![1.0]], &[1.0, 2.0], 0.1).is_err());
        assert!(ridge_fit(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], 0.1).is_err());
        assert!(ridge_fit(&[vec![1.0]], &[1.0], -1.0).is_err());
    }
}
