//! Data records, mixture parameters, and per-component conditional densities
//! on the log-time scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_std_normal_survival, LN_SQRT_2PI};

/// Failure status of a subject. Causes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Failed(usize),
    Censored,
}

impl Status {
    /// CSV encoding: 0 for censored, the cause label otherwise.
    pub fn code(self) -> usize {
        match self {
            Status::Failed(g) => g,
            Status::Censored => 0,
        }
    }

    pub fn from_code(code: usize) -> Self {
        if code == 0 {
            Status::Censored
        } else {
            Status::Failed(code)
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Status::Censored)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub covariates: Vec<f64>,
    pub time: f64,
    pub status: Status,
}

impl SurvivalRecord {
    pub fn new(covariates: Vec<f64>, time: f64, status: Status) -> Self {
        Self {
            covariates,
            time,
            status,
        }
    }
}

/// A validated set of records with log-times cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    log_times: Vec<f64>,
    dim: usize,
    n_causes: usize,
}

impl Dataset {
    /// Builds a dataset, inferring the number of causes from the largest label.
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        let n_causes = records.iter().map(|r| r.status.code()).max().unwrap_or(0);
        Self::with_causes(records, n_causes.max(1))
    }

    pub fn with_causes(records: Vec<SurvivalRecord>, n_causes: usize) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset is empty".into()))?;
        let dim = first.covariates.len();
        if dim == 0 {
            return Err(Error::InvalidInput("records need at least one covariate".into()));
        }
        if n_causes == 0 {
            return Err(Error::InvalidInput("number of causes must be positive".into()));
        }
        let mut log_times = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.covariates.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.covariates.len(),
                });
            }
            if !(r.time > 0.0 && r.time.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "record {i}: time must be positive and finite, got {}",
                    r.time
                )));
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("record {i}: non-finite covariate")));
            }
            if let Status::Failed(g) = r.status {
                if g == 0 || g > n_causes {
                    return Err(Error::CauseOutOfRange { cause: g, n_causes });
                }
            }
            log_times.push(r.time.ln());
        }
        Ok(Self {
            records,
            log_times,
            dim,
            n_causes,
        })
    }

    /// The same records re-labelled for `n_causes` mixture components.
    pub fn relabel_causes(&self, n_causes: usize) -> Result<Self> {
        Self::with_causes(self.records.clone(), n_causes)
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_causes(&self) -> usize {
        self.n_causes
    }

    #[inline]
    pub fn log_time(&self, i: usize) -> f64 {
        self.log_times[i]
    }

    #[inline]
    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.records[i].covariates
    }

    #[inline]
    pub fn status(&self, i: usize) -> Status {
        self.records[i].status
    }

    pub fn n_censored(&self) -> usize {
        self.records.iter().filter(|r| r.status.is_censored()).count()
    }

    /// Failure counts per cause, index `g - 1`.
    pub fn failures_per_cause(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_causes];
        for r in &self.records {
            if let Status::Failed(g) = r.status {
                counts[g - 1] += 1;
            }
        }
        counts
    }
}

/// Parameters of one mixture component: mixing weight, covariate Gaussian,
/// and the log-normal AFT regression.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    pub pi: f64,
    pub mu: DVector<f64>,
    pub sigma_mat: DMatrix<f64>,
    pub b0: f64,
    pub b: DVector<f64>,
    pub sigma2: f64,
}

impl ComponentParams {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.b.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `b0 + b'x`, the mean of log failure time given `x`.
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.linear_predictor_unchecked(x))
    }

    #[inline]
    pub(crate) fn linear_predictor_unchecked(&self, x: &[f64]) -> f64 {
        self.b0 + self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn cond_log_density(&self, x: &[f64], y: f64) -> Result<f64> {
        self.check_dim(x)?;
        let z = (y - self.linear_predictor_unchecked(x)) / self.sigma2.sqrt();
        Ok(-LN_SQRT_2PI - 0.5 * self.sigma2.ln() - 0.5 * z * z)
    }

    pub fn cond_log_survival(&self, x: &[f64], y: f64) -> Result<f64> {
        self.check_dim(x)?;
        let z = (y - self.linear_predictor_unchecked(x)) / self.sigma2.sqrt();
        Ok(log_std_normal_survival(z))
    }

    /// `S(t | x) = 1 - Phi((log t - mu(x)) / sigma)` on the original time scale.
    pub fn conditional_survival_time(&self, x: &[f64], t: f64) -> Result<f64> {
        if t <= 0.0 {
            self.check_dim(x)?;
            return Ok(1.0);
        }
        Ok(self.cond_log_survival(x, t.ln())?.exp())
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.mu.len() != d || self.b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.mu.len().max(self.b.len()),
            });
        }
        if self.sigma_mat.nrows() != d || self.sigma_mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.sigma_mat.nrows(),
            });
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "regression variance must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "mixing weight must lie in (0, 1], got {}",
                self.pi
            )));
        }
        Ok(())
    }
}

/// A `G`-component mixture; component `g` (0-based) models cause `g + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<ComponentParams>,
    dim: usize,
}

impl MixtureModel {
    pub fn new(components: Vec<ComponentParams>) -> Result<Self> {
        let dim = components
            .first()
            .ok_or_else(|| Error::InvalidInput("mixture needs at least one component".into()))?
            .dim();
        for c in &components {
            c.validate(dim)?;
        }
        let sum: f64 = components.iter().map(|c| c.pi).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMixingWeights { sum });
        }
        Ok(Self { components, dim })
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    pub fn component(&self, g: usize) -> &ComponentParams {
        &self.components[g]
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: data.dim(),
            });
        }
        if data.n_causes() > self.n_components() {
            return Err(Error::CauseOutOfRange {
                cause: data.n_causes(),
                n_causes: self.n_components(),
            });
        }
        Ok(())
    }

    pub(crate) fn into_components(self) -> Vec<ComponentParams> {
        self.components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn component(b0: f64, b: &[f64], sigma2: f64) -> ComponentParams {
        let d = b.len();
        ComponentParams {
            pi: 1.0,
            mu: DVector::zeros(d),
            sigma_mat: DMatrix::identity(d, d),
            b0,
            b: DVector::from_row_slice(b),
            sigma2,
        }
    }

    #[test]
    fn linear_predictor_examples() {
        let zero = component(0.0, &[0.0, 0.0], 1.0);
        assert_eq!(zero.linear_predictor(&[3.0, -7.0]).unwrap(), 0.0);
        let g1 = component(2.0, &[1.3, 0.8], 1.0);
        assert!((g1.linear_predictor(&[0.5, 2.3]).unwrap() - 4.49).abs() < 1e-12);
        let g2 = component(1.4, &[1.4, 1.3], 1.0);
        assert!((g2.linear_predictor(&[0.7, 1.8]).unwrap() - 4.72).abs() < 1e-12);
        assert!(matches!(
            g2.linear_predictor(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn conditional_density_examples() {
        let c = component(0.5, &[1.0], 1.0);
        let lp = c.linear_predictor(&[2.0]).unwrap();
        assert!((c.cond_log_density(&[2.0], lp).unwrap() + 0.918_938_5).abs() < 1e-7);
        assert!((c.cond_log_density(&[2.0], lp + 1.0).unwrap() + 1.418_938_5).abs() < 1e-7);
        // frozen from a 40-digit evaluation of the closed form
        let g1 = component(2.0, &[1.3, 0.8], 0.9);
        let v = g1.cond_log_density(&[0.5, 2.3], 4.0).unwrap();
        assert!((v + 0.999_647_164_264_648_5).abs() < 1e-12);
    }

    #[test]
    fn conditional_survival_examples() {
        let c = component(1.0, &[0.5], 4.0);
        let x = [2.0];
        let lp = c.linear_predictor(&x).unwrap();
        assert!((c.cond_log_survival(&x, lp).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!(c.cond_log_survival(&x, lp - 30.0 * 2.0).unwrap().abs() < 1e-15);
        let one_sd = c.cond_log_survival(&x, lp + 2.0).unwrap();
        assert!((one_sd - 0.158_655_253_931_457_05f64.ln()).abs() < 1e-12);
        assert!((c.conditional_survival_time(&x, lp.exp()).unwrap() - 0.5).abs() < 1e-15);
        assert!((c.conditional_survival_time(&x, 1e-300).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(c.conditional_survival_time(&x, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let mut a = component(0.0, &[0.0], 1.0);
        let mut b = a.clone();
        a.pi = 0.5;
        b.pi = 0.5 + 2e-10;
        assert!(matches!(
            MixtureModel::new(vec![a.clone(), b.clone()]),
            Err(Error::InvalidMixingWeights { .. })
        ));
        b.pi = 0.5 + 5e-11;
        assert!(MixtureModel::new(vec![a, b]).is_ok());
    }

    #[test]
    fn dataset_validation() {
        let ok = SurvivalRecord::new(vec![1.0], 2.0, Status::Failed(2));
        let ds = Dataset::new(vec![ok.clone(), SurvivalRecord::new(vec![0.0], 1.0, Status::Censored)])
            .unwrap();
        assert_eq!(ds.n_causes(), 2);
        assert_eq!(ds.n_censored(), 1);
        assert_eq!(ds.failures_per_cause(), vec![0, 1]);
        assert!((ds.log_time(0) - 2f64.ln()).abs() < 1e-15);

        assert!(Dataset::new(vec![]).is_err());
        let zero_time = SurvivalRecord::new(vec![1.0], 0.0, Status::Censored);
        assert!(Dataset::new(vec![zero_time]).is_err());
        let wrong_dim = SurvivalRecord::new(vec![1.0, 2.0], 1.0, Status::Censored);
        assert!(matches!(
            Dataset::new(vec![ok.clone(), wrong_dim]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::with_causes(vec![ok], 1),
            Err(Error::CauseOutOfRange { cause: 2, n_causes: 1 })
        ));
    }
}
