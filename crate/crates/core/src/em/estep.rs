use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureModel, Status};
use crate::numerics::{log_sum_exp, trunc_normal_moments, MvnDensity, TruncationPoint};

use super::{CensoredMoments, Responsibilities};

/// Per-record, per-component log joint terms
/// `log pi_g + log phi_d(x_i | psi_g) + log f_g(y_i | x_i)` for failures and
/// the same with `log S_g(y*_i | x_i)` for censored records. Row-major `N x G`.
pub(crate) struct JointTerms {
    pub n_components: usize,
    pub values: Vec<f64>,
}

impl JointTerms {
    pub fn compute(model: &MixtureModel, data: &Dataset) -> Result<Self> {
        model.check_data(data)?;
        let g_count = model.n_components();
        let densities = model
            .components()
            .iter()
            .map(|c| MvnDensity::new(&c.mu, &c.sigma_mat))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(data.len() * g_count);
        for i in 0..data.len() {
            let x = data.covariates(i);
            let y = data.log_time(i);
            let censored = data.status(i).is_censored();
            for (comp, density) in model.components().iter().zip(&densities) {
                let time_term = if censored {
                    comp.cond_log_survival(x, y)?
                } else {
                    comp.cond_log_density(x, y)?
                };
                values.push(comp.pi.ln() + density.log_pdf(x)? + time_term);
            }
        }
        Ok(Self {
            n_components: g_count,
            values,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_components..(i + 1) * self.n_components]
    }

    pub fn loglik(&self, data: &Dataset) -> f64 {
        let mut total = 0.0;
        for i in 0..data.len() {
            total += match data.status(i) {
                Status::Failed(g) => self.row(i)[g - 1],
                Status::Censored => log_sum_exp(self.row(i)),
            };
        }
        total
    }

    pub fn responsibilities(&self, data: &Dataset) -> Result<Responsibilities> {
        let g_count = self.n_components;
        let mut tau = vec![0.0; data.len() * g_count];
        for i in 0..data.len() {
            let out = &mut tau[i * g_count..(i + 1) * g_count];
            match data.status(i) {
                Status::Failed(g) => out[g - 1] = 1.0,
                Status::Censored => {
                    let row = self.row(i);
                    let norm = log_sum_exp(row);
                    if norm == f64::NEG_INFINITY || !norm.is_finite() {
                        return Err(Error::DegenerateRow { row: i });
                    }
                    for (o, v) in out.iter_mut().zip(row) {
                        *o = (v - norm).exp();
                    }
                    // exact unit row sum
                    let s: f64 = out.iter().sum();
                    out.iter_mut().for_each(|o| *o /= s);
                }
            }
        }
        Ok(Responsibilities::from_values(data.len(), g_count, tau))
    }
}

/// Observed-data log-likelihood: failures contribute their own cause's joint
/// term, censored records the log of the mixture of survival-weighted terms.
pub fn observed_loglik(model: &MixtureModel, data: &Dataset) -> Result<f64> {
    Ok(JointTerms::compute(model, data)?.loglik(data))
}

/// Posterior membership probabilities. Rows of observed failures are the
/// cause indicator; censored rows are normalized in log space.
pub fn e_step_responsibilities(model: &MixtureModel, data: &Dataset) -> Result<Responsibilities> {
    JointTerms::compute(model, data)?.responsibilities(data)
}

/// Conditional first and second moments of log failure time for each
/// record under each component.
pub fn impute_censored_moments(model: &MixtureModel, data: &Dataset) -> Result<CensoredMoments> {
    model.check_data(data)?;
    let g_count = model.n_components();
    let n = data.len();
    let mut ey = Vec::with_capacity(n * g_count);
    let mut ey2 = Vec::with_capacity(n * g_count);
    for i in 0..n {
        let y = data.log_time(i);
        let x = data.covariates(i);
        if data.status(i).is_censored() {
            let y_star = TruncationPoint::new(y)?;
            for comp in model.components() {
                let mu = comp.linear_predictor(x)?;
                let (m1, m2) = trunc_normal_moments(mu, comp.sigma2.sqrt(), y_star);
                ey.push(m1);
                ey2.push(m2);
            }
        } else {
            for _ in 0..g_count {
                ey.push(y);
                ey2.push(y * y);
            }
        }
    }
    Ok(CensoredMoments::from_values(n, g_count, ey, ey2))
}

/// Moments that treat every censoring time as if it were the failure time;
/// used only to seed the first M-step.
pub(crate) fn observed_time_moments(data: &Dataset, g_count: usize) -> CensoredMoments {
    let n = data.len();
    let mut ey = Vec::with_capacity(n * g_count);
    let mut ey2 = Vec::with_capacity(n * g_count);
    for i in 0..n {
        let y = data.log_time(i);
        for _ in 0..g_count {
            ey.push(y);
            ey2.push(y * y);
        }
    }
    CensoredMoments::from_values(n, g_count, ey, ey2)
}
