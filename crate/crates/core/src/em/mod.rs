//! Expectation-maximization fitting of the cluster-weighted log-normal AFT
//! mixture.
//!
//! Every conditional maximizer is available in closed form, so each
//! iteration is a single E-step (responsibilities of censored records plus
//! truncated-normal moments of their latent log failure times) followed by a
//! single M-step over all parameter blocks. Convergence is judged with the
//! Aitken-extrapolated log-likelihood.

mod estep;
mod init;
mod mstep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureModel};

pub use estep::{e_step_responsibilities, impute_censored_moments, observed_loglik};
pub use init::{initialize, InitStrategy};
pub use mstep::{
    m_step, weighted_covariate_moments, weighted_regression, CovariateFit, RegressionFit,
};

use estep::{observed_time_moments, JointTerms};

/// Row-major `N x G` matrix of posterior membership probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    n_rows: usize,
    n_components: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    pub fn from_values(n_rows: usize, n_components: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_rows * n_components);
        Self {
            n_rows,
            n_components,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_components..(i + 1) * self.n_components]
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.values[i * self.n_components + g]
    }

    pub fn column(&self, g: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, g)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_components)
            .map(|g| (0..self.n_rows).map(|i| self.get(i, g)).sum())
            .collect()
    }

    fn permute_columns(&mut self, order: &[usize]) {
        for i in 0..self.n_rows {
            let old: Vec<f64> = self.row(i).to_vec();
            for (new_g, &old_g) in order.iter().enumerate() {
                self.values[i * self.n_components + new_g] = old[old_g];
            }
        }
    }
}

/// `E(y_ig)` and `E(y_ig^2)` for every record and component, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredMoments {
    n_rows: usize,
    n_components: usize,
    ey: Vec<f64>,
    ey2: Vec<f64>,
}

impl CensoredMoments {
    pub fn from_values(n_rows: usize, n_components: usize, ey: Vec<f64>, ey2: Vec<f64>) -> Self {
        assert_eq!(ey.len(), n_rows * n_components);
        assert_eq!(ey2.len(), n_rows * n_components);
        Self {
            n_rows,
            n_components,
            ey,
            ey2,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn ey(&self, i: usize, g: usize) -> f64 {
        self.ey[i * self.n_components + g]
    }

    pub fn ey2(&self, i: usize, g: usize) -> f64 {
        self.ey2[i * self.n_components + g]
    }

    pub fn ey_column(&self, g: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.ey(i, g)).collect()
    }

    pub fn ey2_column(&self, g: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.ey2(i, g)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Aitken stopping tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    /// Lower bound on every regression variance.
    pub variance_floor: f64,
    pub init: InitStrategy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iter: 2000,
            n_restarts: 20,
            seed: 1,
            variance_floor: 1e-10,
            init: InitStrategy::LabelSeeded,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.max_iter < 3 {
            return Err(Error::InvalidInput("max_iter must be at least 3".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::InvalidInput("n_restarts must be positive".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidInput("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: MixtureModel,
    pub loglik_trace: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub responsibilities: Responsibilities,
    /// Index of the winning restart.
    pub restart: usize,
    pub n_failed_restarts: usize,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Aitken-accelerated stopping rule on three consecutive log-likelihoods.
pub fn aitken_should_stop(l_prev2: f64, l_prev: f64, l_curr: f64, epsilon: f64) -> bool {
    let denom = l_prev - l_prev2;
    if denom.abs() <= 1e-14 {
        return true;
    }
    let a = (l_curr - l_prev) / denom;
    if a >= 1.0 {
        return false;
    }
    let l_asymptotic = l_prev + (l_curr - l_prev) / (1.0 - a);
    l_asymptotic - l_curr < epsilon
}

/// Puts the model in canonical component order.
///
/// A component that owns at least one observed failure is tied to that cause
/// and keeps its index. Components with no observed failures are
/// exchangeable; those are ordered among their own slots by descending
/// mixing weight, ties broken by the first coordinate of the covariate mean.
/// Returns the permutation applied (`order[new] = old`).
pub fn canonical_order(model: &MixtureModel, data: &Dataset) -> Vec<usize> {
    let counts = data.failures_per_cause();
    let g_count = model.n_components();
    let free: Vec<usize> = (0..g_count)
        .filter(|&g| counts.get(g).copied().unwrap_or(0) == 0)
        .collect();
    let mut sorted = free.clone();
    sorted.sort_by(|&a, &b| {
        let (ca, cb) = (model.component(a), model.component(b));
        cb.pi
            .total_cmp(&ca.pi)
            .then_with(|| ca.mu[0].total_cmp(&cb.mu[0]))
            .then_with(|| a.cmp(&b))
    });
    let mut order: Vec<usize> = (0..g_count).collect();
    for (slot, src) in free.iter().zip(sorted) {
        order[*slot] = src;
    }
    order
}

fn canonicalize(result: &mut FitResult, data: &Dataset) {
    let order = canonical_order(&result.model, data);
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let comps = result.model.clone().into_components();
    let reordered = order.iter().map(|&o| comps[o].clone()).collect();
    result.model = MixtureModel::new(reordered).expect("permutation keeps invariants");
    result.responsibilities.permute_columns(&order);
}

/// One EM run from a single initialization.
pub fn fit_single(data: &Dataset, config: &FitConfig, seed: u64) -> Result<FitResult> {
    let g_count = data.n_causes();
    let tau0 = initialize(data, seed, config.init);
    let mut model = m_step(
        data,
        &tau0,
        &observed_time_moments(data, g_count),
        config.variance_floor,
    )?;
    let mut terms = JointTerms::compute(&model, data)?;
    let mut trace = vec![terms.loglik(data)];
    let mut tau = tau0;
    let mut converged = false;
    let mut n_iter = 0;
    while n_iter < config.max_iter {
        let moments = impute_censored_moments(&model, data)?;
        tau = terms.responsibilities(data)?;
        model = m_step(data, &tau, &moments, config.variance_floor)?;
        terms = JointTerms::compute(&model, data)?;
        let ll = terms.loglik(data);
        if !ll.is_finite() {
            return Err(Error::InvalidInput(format!(
                "log-likelihood became non-finite at iteration {}",
                n_iter + 1
            )));
        }
        trace.push(ll);
        n_iter += 1;
        let k = trace.len();
        if k >= 3 && aitken_should_stop(trace[k - 3], trace[k - 2], trace[k - 1], config.epsilon)
        {
            converged = true;
            break;
        }
    }
    // report posteriors under the final parameters
    let responsibilities = terms.responsibilities(data).unwrap_or(tau);
    let mut result = FitResult {
        model,
        loglik_trace: trace,
        n_iter,
        converged,
        responsibilities,
        restart: 0,
        n_failed_restarts: 0,
    };
    canonicalize(&mut result, data);
    Ok(result)
}

/// Best of `config.n_restarts` independent EM runs. Restart `r` uses seed
/// `config.seed + r`; the winner is the highest final log-likelihood, lowest
/// restart index on ties, so the result does not depend on scheduling.
pub fn fit(data: &Dataset, n_components: usize, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if n_components == 0 {
        return Err(Error::InvalidInput("number of components must be positive".into()));
    }
    if data.n_causes() > n_components {
        return Err(Error::CauseOutOfRange {
            cause: data.n_causes(),
            n_causes: n_components,
        });
    }
    let d = data.dim();
    if data.len() <= n_components * (d + 2) {
        return Err(Error::InvalidInput(format!(
            "{} records are too few for {} components in dimension {} (need more than {})",
            data.len(),
            n_components,
            d,
            n_components * (d + 2)
        )));
    }
    let relabelled;
    let data = if data.n_causes() == n_components {
        data
    } else {
        relabelled = data.relabel_causes(n_components)?;
        &relabelled
    };

    let runs: Vec<Result<FitResult>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| fit_single(data, config, config.seed.wrapping_add(r as u64)))
        .collect();

    let n_failed = runs.iter().filter(|r| r.is_err()).count();
    let mut best: Option<FitResult> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let Ok(mut run) = run else { continue };
        run.restart = r;
        let better = match &best {
            None => true,
            Some(b) => run.loglik() > b.loglik(),
        };
        if better {
            best = Some(run);
        }
    }
    let mut best = best.ok_or(Error::AllRestartsFailed {
        restarts: config.n_restarts,
    })?;
    best.n_failed_restarts = n_failed;
    Ok(best)
}
