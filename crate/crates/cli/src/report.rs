//! The versioned JSON report written by `fit` and `bootstrap` and read back
//! by `curves`.

use std::path::Path;

use cwaft::bootstrap::{BootstrapReport, ComponentSe};
use cwaft::em::{FitResult, InitStrategy};
use cwaft::selection::ModelScore;
use cwaft::{ComponentParams, Dataset, MixtureModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Standardization;

pub const SCHEMA_ID: &str = "cwaft-report-v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read model report {path}: {reason}")]
    Unreadable { path: String, reason: String },

    #[error("model report {path} is not a valid {SCHEMA_ID} report: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub groups: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub variance_floor: f64,
    pub init: InitStrategy,
    pub standardize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub input: String,
    pub seed: u64,
    pub config: RunConfig,
    pub version: String,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub n_censored: usize,
    pub failures_per_cause: Vec<usize>,
    pub covariates: Vec<String>,
}

/// One component in table layout; `sigma` is the covariate covariance by rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBlock {
    pub cause: usize,
    pub pi: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub b0: f64,
    pub b: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBlock {
    pub replicates: usize,
    pub n_failed: usize,
    pub se: Vec<ComponentBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub manifest: Manifest,
    pub standardization: Option<Standardization>,
    pub data: DataSummary,
    pub components: Vec<ComponentBlock>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_parameters: usize,
    pub n_iter: usize,
    pub converged: bool,
    pub restart: usize,
    pub n_failed_restarts: usize,
    pub bootstrap: Option<BootstrapBlock>,
}

fn rows(d: usize, row_major: &[f64]) -> Vec<Vec<f64>> {
    row_major.chunks(d).map(<[f64]>::to_vec).collect()
}

fn component_block(cause: usize, c: &ComponentParams) -> ComponentBlock {
    let d = c.dim();
    let flat: Vec<f64> = (0..d)
        .flat_map(|r| (0..d).map(move |k| (r, k)))
        .map(|(r, k)| c.sigma_mat[(r, k)])
        .collect();
    ComponentBlock {
        cause,
        pi: c.pi,
        mu: c.mu.iter().copied().collect(),
        sigma: rows(d, &flat),
        b0: c.b0,
        b: c.b.iter().copied().collect(),
        sigma2: c.sigma2,
    }
}

fn se_block(cause: usize, se: &ComponentSe) -> ComponentBlock {
    ComponentBlock {
        cause,
        pi: se.pi,
        mu: se.mu.clone(),
        sigma: rows(se.mu.len(), &se.sigma_mat),
        b0: se.b0,
        b: se.b.clone(),
        sigma2: se.sigma2,
    }
}

impl BootstrapBlock {
    pub fn from_report(report: &BootstrapReport) -> Self {
        Self {
            replicates: report.b,
            n_failed: report.n_failed,
            se: report
                .se
                .iter()
                .enumerate()
                .map(|(g, se)| se_block(g + 1, se))
                .collect(),
        }
    }
}

impl Report {
    pub fn new(
        manifest: Manifest,
        standardization: Option<Standardization>,
        data: &Dataset,
        covariates: Vec<String>,
        fit: &FitResult,
        score: &ModelScore,
    ) -> Self {
        Self {
            schema: SCHEMA_ID.to_string(),
            manifest,
            standardization,
            data: DataSummary {
                n: data.len(),
                n_censored: data.n_censored(),
                failures_per_cause: data.failures_per_cause(),
                covariates,
            },
            components: fit
                .model
                .components()
                .iter()
                .enumerate()
                .map(|(g, c)| component_block(g + 1, c))
                .collect(),
            loglik: score.loglik,
            aic: score.aic,
            bic: score.bic,
            n_parameters: score.k,
            n_iter: fit.n_iter,
            converged: fit.converged,
            restart: fit.restart,
            n_failed_restarts: fit.n_failed_restarts,
            bootstrap: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let invalid = |reason: String| ReportError::Invalid {
            path: path.display().to_string(),
            reason,
        };
        let report: Report = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if report.schema != SCHEMA_ID {
            return Err(invalid(format!("schema is `{}`", report.schema)));
        }
        Ok(report)
    }

    /// Rebuilds the fitted mixture from the component blocks.
    pub fn model(&self) -> Result<MixtureModel, cwaft::Error> {
        let components = self
            .components
            .iter()
            .map(|c| {
                let d = c.mu.len();
                if c.sigma.len() != d || c.sigma.iter().any(|r| r.len() != d) || c.b.len() != d {
                    return Err(cwaft::Error::DimensionMismatch {
                        expected: d,
                        found: c.sigma.len(),
                    });
                }
                let flat: Vec<f64> = c.sigma.iter().flatten().copied().collect();
                Ok(ComponentParams {
                    pi: c.pi,
                    mu: DVector::from_vec(c.mu.clone()),
                    sigma_mat: DMatrix::from_row_slice(d, d, &flat),
                    b0: c.b0,
                    b: DVector::from_vec(c.b.clone()),
                    sigma2: c.sigma2,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        MixtureModel::new(components)
    }
}
