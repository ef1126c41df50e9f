//! Least squares through a Householder QR factorization of the design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of the orthogonal component below which a column is
/// treated as a linear combination of the columns before it.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub tss: f64,
    pub n: usize,
    pub p: usize,
    /// `(X^T X)^{-1}`, so coefficient covariance is `sigma2 * cov_unscaled`.
    pub cov_unscaled: DMatrix<f64>,
}

impl OlsFit {
    pub fn dof(&self) -> usize {
        self.n - self.p
    }

    /// Residual variance with the unbiased `n - p` divisor.
    pub fn sigma2(&self) -> f64 {
        self.rss / self.dof() as f64
    }

    pub fn r2(&self) -> f64 {
        if self.tss > 0.0 {
            1.0 - self.rss / self.tss
        } else if self.rss == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn std_errors(&self) -> Vec<f64> {
        let s2 = self.sigma2();
        (0..self.p).map(|j| (s2 * self.cov_unscaled[(j, j)]).sqrt()).collect()
    }
}

/// Solve `min ||y - X b||`. `names` labels the columns for error messages.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    debug_assert_eq!(names.len(), p);
    if y.len() != n {
        return Err(Error::Data(format!("{} responses for {n} design rows", y.len())));
    }
    if n < p || p == 0 {
        return Err(Error::Data(format!("{n} rows cannot determine {p} coefficients")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("design or response contains non-finite values".into()));
    }

    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= COLLINEAR_TOL * col_norm {
            let earlier = &names[..j];
            let detail = if col_norm == 0.0 {
                "is identically zero".to_string()
            } else if earlier.is_empty() {
                "is degenerate".to_string()
            } else {
                format!("is collinear with [{}]", earlier.join(", "))
            };
            return Err(Error::Singular(format!("column '{}' {detail}", names[j])));
        }
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Singular("triangular inverse failed".into()))?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let fitted = x * &coef;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss = y.iter().map(|v| (v - mean).powi(2)).sum();

    Ok(OlsFit {
        coefficients: coef.iter().copied().collect(),
        residuals,
        rss,
        tss,
        n,
        p,
        cov_unscaled,
    })
}
