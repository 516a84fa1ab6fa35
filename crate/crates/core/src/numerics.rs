//! Normal-distribution kernels used throughout the fitting engine.
//!
//! The truncated-normal moments are the numerically delicate part: deep right
//! censoring pushes the standardized truncation point far into the upper tail,
//! where `phi(z) / (1 - Phi(z))` is a ratio of two underflowing quantities. The
//! hazard (inverse Mills ratio) is therefore evaluated piecewise:
//!
//! - `z <= 8`: direct ratio with `1 - Phi(z)` taken from `erfc`, which keeps full
//!   relative precision in the tail;
//! - `8 < z <= 38`: continued fraction for the Mills ratio, no underflow;
//! - `z > 38`: leading asymptotic terms, `h(z) = z + 1/z` and a conditional
//!   variance of `sigma^2 / z^2`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// `1 / sqrt(2 pi)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const CONTINUED_FRACTION_FROM: f64 = 8.0;
const ASYMPTOTIC_FROM: f64 = 38.0;
const CONTINUED_FRACTION_TERMS: usize = 120;

/// Log-scale censoring threshold `y* = log t*`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationPoint(f64);

impl TruncationPoint {
    pub fn new(y_star: f64) -> Result<Self> {
        if !y_star.is_finite() {
            return Err(Error::InvalidInput(format!(
                "truncation point must be finite, got {y_star}"
            )));
        }
        Ok(Self(y_star))
    }

    /// Truncation point for a censoring time on the original scale.
    pub fn from_time(t_star: f64) -> Result<Self> {
        if !(t_star > 0.0) {
            return Err(Error::InvalidInput(format!(
                "censoring time must be positive, got {t_star}"
            )));
        }
        Self::new(t_star.ln())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 - Phi(z)` without cancellation.
#[inline]
pub fn std_normal_survival(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `log(1 - Phi(z))`, accurate in both tails.
pub fn log_std_normal_survival(z: f64) -> f64 {
    if z < 0.0 {
        // 1 - Phi(z) = 1 - Phi(-|z|) with Phi(-|z|) small
        (-std_normal_survival(-z)).ln_1p()
    } else if z <= CONTINUED_FRACTION_FROM {
        std_normal_survival(z).ln()
    } else {
        -0.5 * z * z - LN_SQRT_2PI - continued_fraction_denominator(z).ln()
    }
}

/// Denominator `f` of the Mills ratio continued fraction,
/// `R(z) = 1 / (z + 1/(z + 2/(z + 3/(z + ...))))`, so that `R(z) = 1/f`.
/// Valid for `z` well above zero; used only for `z > 8`.
fn continued_fraction_denominator(z: f64) -> f64 {
    let mut f = z;
    for k in (1..=CONTINUED_FRACTION_TERMS).rev() {
        f = z + k as f64 / f;
    }
    f
}

/// Hazard `phi(z)/(1 - Phi(z))` together with the standardized conditional
/// variance factor `Var(Z | Z > z)`.
fn hazard_and_variance_factor(z: f64) -> (f64, f64) {
    if z > ASYMPTOTIC_FROM {
        return (z + 1.0 / z, 1.0 / (z * z));
    }
    if z > CONTINUED_FRACTION_FROM {
        // h = z + 1/f1 where f1 is the tail of the continued fraction; keep
        // the excess over z separate so 1 + z h - h^2 = 1 - h (h - z).
        let mut f = z;
        for k in (2..=CONTINUED_FRACTION_TERMS).rev() {
            f = z + k as f64 / f;
        }
        let excess = 1.0 / f;
        let h = z + excess;
        return (h, (1.0 - h * excess).max(0.0));
    }
    let h = std_normal_pdf(z) / std_normal_survival(z);
    (h, (1.0 + z * h - h * h).max(0.0))
}

/// First and second moments of `N(mu, sigma^2)` truncated to `(y*, inf)`.
pub fn trunc_normal_moments(mu: f64, sigma: f64, y_star: TruncationPoint) -> (f64, f64) {
    debug_assert!(sigma > 0.0);
    let z = (y_star.value() - mu) / sigma;
    let (h, variance_factor) = hazard_and_variance_factor(z);
    let mean = mu + sigma * h;
    // sigma^2 (1 + z h) + 2 mu E(y) - mu^2, rearranged as Var + E(y)^2
    let second = sigma * sigma * variance_factor + mean * mean;
    (mean, second)
}

/// `E(y | y > y*)` for `y ~ N(mu, sigma^2)`.
pub fn trunc_normal_mean(mu: f64, sigma: f64, y_star: TruncationPoint) -> f64 {
    trunc_normal_moments(mu, sigma, y_star).0
}

/// `E(y^2 | y > y*)` for `y ~ N(mu, sigma^2)`.
pub fn trunc_normal_second_moment(mu: f64, sigma: f64, y_star: TruncationPoint) -> f64 {
    trunc_normal_moments(mu, sigma, y_star).1
}

/// Cholesky factor of `sigma`, retried once with a small ridge when the plain
/// factorization fails.
pub fn regularized_cholesky(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(sigma.clone()) {
        return Ok(chol);
    }
    let d = sigma.nrows();
    let ridge = 1e-8 * sigma.trace() / d as f64;
    if !(ridge > 0.0) {
        return Err(Error::NonPositiveDefinite);
    }
    let mut ridged = sigma.clone();
    for i in 0..d {
        ridged[(i, i)] += ridge;
    }
    Cholesky::new(ridged).ok_or(Error::NonPositiveDefinite)
}

/// A multivariate normal density with its factorization cached, for repeated
/// evaluation at many points.
#[derive(Debug, Clone)]
pub struct MvnDensity {
    mean: DVector<f64>,
    chol_lower: DMatrix<f64>,
    log_norm: f64,
}

impl MvnDensity {
    pub fn new(mean: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: sigma.nrows(),
            });
        }
        let chol = regularized_cholesky(sigma)?;
        let chol_lower = chol.unpack();
        let log_det: f64 = 2.0 * chol_lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -(d as f64) * LN_SQRT_2PI - 0.5 * log_det;
        Ok(Self {
            mean: mean.clone(),
            chol_lower,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        // Forward substitution L v = x - mu; quadratic form is |v|^2.
        let mut quad = 0.0;
        let mut v = vec![0.0; d];
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.chol_lower[(i, j)] * v[j];
            }
            v[i] = acc / self.chol_lower[(i, i)];
            quad += v[i] * v[i];
        }
        Ok(self.log_norm - 0.5 * quad)
    }
}

/// Log-density of `N_d(mu, sigma)` at `x`.
pub fn mvn_logpdf(x: &[f64], mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    MvnDensity::new(mu, sigma)?.log_pdf(x)
}

/// `log(sum(exp(values)))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
