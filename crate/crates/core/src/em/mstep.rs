use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ComponentParams, Dataset, MixtureModel};
use crate::numerics::regularized_cholesky;

use super::{CensoredMoments, Responsibilities};

/// Weighted AFT regression estimates for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub b0: f64,
    pub b: DVector<f64>,
    pub sigma2: f64,
}

/// Weighted covariate moments of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateFit {
    pub total_weight: f64,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

pub fn weighted_covariate_moments(
    data: &Dataset,
    weights: &[f64],
    component: usize,
) -> Result<CovariateFit> {
    let d = data.dim();
    let total_weight: f64 = weights.iter().sum();
    if !(total_weight > d as f64 * f64::EPSILON) {
        return Err(Error::EmptyComponent { component });
    }
    let mut mean = DVector::zeros(d);
    for (i, &w) in weights.iter().enumerate() {
        for (m, x) in mean.iter_mut().zip(data.covariates(i)) {
            *m += w * x;
        }
    }
    mean /= total_weight;
    let mut scatter = DMatrix::zeros(d, d);
    for (i, &w) in weights.iter().enumerate() {
        let x = data.covariates(i);
        for r in 0..d {
            let dr = x[r] - mean[r];
            for c in 0..=r {
                scatter[(r, c)] += w * dr * (x[c] - mean[c]);
            }
        }
    }
    for r in 0..d {
        for c in 0..r {
            scatter[(c, r)] = scatter[(r, c)];
        }
    }
    scatter /= total_weight;
    Ok(CovariateFit {
        total_weight,
        mean,
        scatter,
    })
}

/// Closed-form weighted regression of the expected log-times on the
/// covariates: slopes from the centered cross-moments against the weighted
/// covariate scatter, intercept from the weighted means, and the variance
/// from the expected squared residuals.
pub fn weighted_regression(
    data: &Dataset,
    weights: &[f64],
    ey: &[f64],
    ey2: &[f64],
    covariates: &CovariateFit,
    variance_floor: f64,
    component: usize,
) -> Result<RegressionFit> {
    let d = data.dim();
    let w_total = covariates.total_weight;
    let y_bar = weights.iter().zip(ey).map(|(w, y)| w * y).sum::<f64>() / w_total;
    let mut cross = DVector::zeros(d);
    for (i, &w) in weights.iter().enumerate() {
        let dy = ey[i] - y_bar;
        for (c, (x, m)) in cross
            .iter_mut()
            .zip(data.covariates(i).iter().zip(covariates.mean.iter()))
        {
            *c += w * (x - m) * dy;
        }
    }
    cross /= w_total;
    let chol = regularized_cholesky(&covariates.scatter)
        .map_err(|_| Error::SingularDesign { component })?;
    let b = chol.solve(&cross);
    let b0 = y_bar - b.dot(&covariates.mean);

    let mut rss = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let pred = b0 + b.iter().zip(data.covariates(i)).map(|(b, x)| b * x).sum::<f64>();
        // E(y^2) - 2 p E(y) + p^2 split as squared bias plus conditional variance
        let resid = ey[i] - pred;
        let cond_var = (ey2[i] - ey[i] * ey[i]).max(0.0);
        rss += w * (resid * resid + cond_var);
    }
    let sigma2 = (rss / w_total).max(variance_floor);
    if !(b0.is_finite() && sigma2.is_finite() && b.iter().all(|v| v.is_finite())) {
        return Err(Error::SingularDesign { component });
    }
    Ok(RegressionFit { b0, b, sigma2 })
}

/// Closed-form maximizer of the expected complete-data log-likelihood.
pub fn m_step(
    data: &Dataset,
    tau: &Responsibilities,
    moments: &CensoredMoments,
    variance_floor: f64,
) -> Result<MixtureModel> {
    let n = data.len();
    let g_count = tau.n_components();
    if tau.n_rows() != n || moments.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: tau.n_rows(),
        });
    }
    if moments.n_components() != g_count {
        return Err(Error::DimensionMismatch {
            expected: g_count,
            found: moments.n_components(),
        });
    }
    let d = data.dim();
    let mut components = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let weights = tau.column(g);
        let cov = weighted_covariate_moments(data, &weights, g)?;
        let ey = moments.ey_column(g);
        let ey2 = moments.ey2_column(g);
        let reg = weighted_regression(data, &weights, &ey, &ey2, &cov, variance_floor, g)?;

        let sigma_mat = match nalgebra::Cholesky::new(cov.scatter.clone()) {
            Some(_) => cov.scatter,
            None => {
                let ridge = 1e-8 * cov.scatter.trace() / d as f64;
                let ridged = &cov.scatter + DMatrix::identity(d, d) * ridge;
                if !(ridge > 0.0) || nalgebra::Cholesky::new(ridged.clone()).is_none() {
                    return Err(Error::SingularDesign { component: g });
                }
                ridged
            }
        };
        components.push(ComponentParams {
            pi: cov.total_weight / n as f64,
            mu: cov.mean,
            sigma_mat,
            b0: reg.b0,
            b: reg.b,
            sigma2: reg.sigma2,
        });
    }
    MixtureModel::new(components)
}
