//! Closed-form answers for small models, used to check the general machinery.

use nalgebra::{Matrix2, Vector2};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Upper tail of the standard normal, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact p-value of the likelihood-ratio test for a single step
/// `k ~ N(theta * F, sigma2)` comparing `f0` (null) against `f1`.
///
/// The statistic is monotone in `k`, so the p-value is a normal tail
/// probability under `f0`.
pub fn analytic_pvalue_1d(theta: f64, sigma2: f64, f0: f64, f1: f64, k_obs: f64) -> Result<f64> {
    if f0 == f1 {
        return Err(Error::UndefinedContrast(format!("null and alternative are both {f0} Tg")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate("sigma2 must be positive".into()));
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    let sd = sigma2.sqrt();
    let z = (k_obs - theta * f0) / sd;
    // lambda increases with k when theta * (f1 - f0) > 0
    if theta * (f1 - f0) > 0.0 {
        Ok(normal_sf(z))
    } else {
        Ok(normal_sf(-z))
    }
}

/// Two-variable chain `y1 = a1 + b1 F + e1`, `y2 = a2 + b2 F + c y1 + e2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateChain {
    pub a1: f64,
    pub b1: f64,
    pub s1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c: f64,
    pub s2: f64,
}

impl BivariateChain {
    /// Joint log-density from the implied bivariate normal, without factorising.
    pub fn joint_logpdf(&self, f: f64, y1: f64, y2: f64) -> f64 {
        let m1 = self.a1 + self.b1 * f;
        let m2 = self.a2 + self.b2 * f + self.c * m1;
        let cov = Matrix2::new(
            self.s1,
            self.c * self.s1,
            self.c * self.s1,
            self.c * self.c * self.s1 + self.s2,
        );
        let d = Vector2::new(y1 - m1, y2 - m2);
        let inv = cov.try_inverse().expect("positive definite");
        let quad = (d.transpose() * inv * d)[(0, 0)];
        -0.5 * quad - 0.5 * cov.determinant().ln() - (2.0 * std::f64::consts::PI).ln()
    }
}

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// 5% critical value of the one-sample KS test (Stephens' approximation).
pub fn ks_critical_5pct(n: usize) -> f64 {
    ks_critical(n, 1.358)
}

/// 1% critical value, same approximation.
pub fn ks_critical_1pct(n: usize) -> f64 {
    ks_critical(n, 1.628)
}

fn ks_critical(n: usize, c: f64) -> f64 {
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}
