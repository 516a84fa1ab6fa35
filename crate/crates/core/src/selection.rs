//! Information criteria for comparing fitted mixtures.

use serde::{Deserialize, Serialize};

use crate::em::{observed_loglik, FitResult};
use crate::error::Result;
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub loglik: f64,
    pub k: usize,
    pub n: usize,
    pub aic: f64,
    pub bic: f64,
}

impl ModelScore {
    pub fn new(loglik: f64, k: usize, n: usize) -> Self {
        Self {
            loglik,
            k,
            n,
            aic: -2.0 * loglik + 2.0 * k as f64,
            bic: -2.0 * loglik + k as f64 * (n as f64).ln(),
        }
    }

    pub fn value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Aic,
    Bic,
}

/// Free parameters of a `G`-component model in `d` covariates: `G - 1`
/// mixing weights and, per component, the covariate mean and covariance,
/// the regression intercept and slopes, and the regression variance.
pub fn count_parameters(n_components: usize, d: usize) -> usize {
    (n_components - 1) + n_components * (d + d * (d + 1) / 2 + 1 + d + 1)
}

pub fn score(fit: &FitResult, data: &Dataset) -> Result<ModelScore> {
    let loglik = observed_loglik(&fit.model, data)?;
    let k = count_parameters(fit.model.n_components(), fit.model.dim());
    Ok(ModelScore::new(loglik, k, data.len()))
}

/// Label of the candidate with the smallest criterion; ties go to fewer
/// parameters, then to the earlier entry. `None` for an empty list.
pub fn select_best<L>(scores: &[(L, ModelScore)], criterion: Criterion) -> Option<&L> {
    let mut best: Option<&(L, ModelScore)> = None;
    for cand in scores {
        best = match best {
            None => Some(cand),
            Some(b) => {
                let (vc, vb) = (cand.1.value(criterion), b.1.value(criterion));
                if vc < vb || (vc == vb && cand.1.k < b.1.k) {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|(label, _)| label)
}
