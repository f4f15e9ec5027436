//! Natural cubic smoothing spline with a target number of degrees of freedom.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MrhError, Result};

/// Penalty matrix `K = Q R^{-1} Q'` of the natural cubic spline through `x`.
fn penalty(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut q = DMatrix::<f64>::zeros(n, n - 2);
    let mut r = DMatrix::<f64>::zeros(n - 2, n - 2);
    for j in 1..n - 1 {
        let c = j - 1;
        q[(j - 1, c)] = 1.0 / h[j - 1];
        q[(j, c)] = -1.0 / h[j - 1] - 1.0 / h[j];
        q[(j + 1, c)] = 1.0 / h[j];
        r[(c, c)] = (h[j - 1] + h[j]) / 3.0;
        if c + 1 < n - 2 {
            r[(c, c + 1)] = h[j] / 6.0;
            r[(c + 1, c)] = h[j] / 6.0;
        }
    }
    let r_inv = r.try_inverse().expect("spline band matrix is positive definite");
    &q * r_inv * q.transpose()
}

/// Fitted values at `x` of the smoothing spline whose smoother matrix has
/// trace `df`. `df >= n` interpolates; `df = 2` is the least-squares line.
pub fn smoothing_spline(x: &[f64], y: &[f64], df: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(MrhError::Config("x and y lengths differ".into()));
    }
    if !(df > 1.0) {
        return Err(MrhError::Config(format!("smoothing degrees of freedom must exceed 1, got {df}")));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MrhError::Config("smoothing abscissae must increase strictly".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MrhError::Domain("cannot smooth non-finite values".into()));
    }
    if n < 3 || df >= n as f64 {
        return Ok(y.to_vec());
    }
    let span = x[n - 1] - x[0];
    let scaled: Vec<f64> = x.iter().map(|v| (v - x[0]) / span).collect();
    let eig = SymmetricEigen::new(penalty(&scaled));
    let mu: Vec<f64> = eig.eigenvalues.iter().map(|&m| m.max(0.0)).collect();
    let trace = |lambda: f64| mu.iter().map(|m| 1.0 / (1.0 + lambda * m)).sum::<f64>();
    let target = df.max(2.0);
    let lambda = if target <= 2.0 {
        f64::INFINITY
    } else {
        let (mut lo, mut hi) = (-30.0f64, 30.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if trace(mid.exp()) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    };
    let u = &eig.eigenvectors;
    let coef = u.transpose() * DVector::from_column_slice(y);
    let max_mu = mu.iter().cloned().fold(0.0, f64::max);
    let shrunk = DVector::from_iterator(
        n,
        coef.iter().zip(&mu).map(|(&c, &m)| {
            // Eigenvalues at rounding level belong to the linear null space.
            if m <= 1e-10 * max_mu {
                c
            } else if lambda.is_infinite() {
                0.0
            } else {
                c / (1.0 + lambda * m)
            }
        }),
    );
    Ok((u * shrunk).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_reproduced() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        for df in [1.5, 2.0, 4.0, 10.0] {
            let fit = smoothing_spline(&x, &y, df).unwrap();
            assert!(fit.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-8), "df={df}");
        }
    }

    #[test]
    fn full_df_interpolates_and_low_df_fits_a_line() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 9.0, 7.0];
        assert_eq!(smoothing_spline(&x, &y, 8.0).unwrap(), y);
        let line = smoothing_spline(&x, &y, 2.0).unwrap();
        let xm = 3.5;
        let ym = y.iter().sum::<f64>() / 8.0;
        let slope = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>()
            / x.iter().map(|a| (a - xm) * (a - xm)).sum::<f64>();
        for (xi, fi) in x.iter().zip(&line) {
            assert!((fi - (ym + slope * (xi - xm))).abs() < 1e-8);
        }
    }

    #[test]
    fn smoothing_reduces_roughness() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.4).sin() + if (*v as i32) % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let rough = |v: &[f64]| v.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).powi(2)).sum::<f64>();
        let fit = smoothing_spline(&x, &y, 6.0).unwrap();
        assert!(rough(&fit) < rough(&y));
        let mean_y = y.iter().sum::<f64>();
        let mean_f = fit.iter().sum::<f64>();
        assert!((mean_y - mean_f).abs() < 1e-8);
    }

    #[test]
    fn invalid_inputs() {
        assert!(smoothing_spline(&[0.0, 1.0], &[1.0], 2.0).is_err());
        assert!(smoothing_spline(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], 1.0).is_err());
        assert!(smoothing_spline(&[0.0, 0.0, 2.0], &[1.0, 2.0, 3.0], 2.5).is_err());
    }
}
