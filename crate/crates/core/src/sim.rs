//! Synthetic competing-risks data from a known cluster-weighted AFT mixture.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Status, SurvivalRecord};

/// Generating parameters of one latent group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub weight: f64,
    pub mu: Vec<f64>,
    /// Row-major `d x d` covariance of the covariates.
    pub sigma_mat: Vec<f64>,
    pub b0: f64,
    pub b: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub groups: Vec<GroupSpec>,
    pub n_total: usize,
    pub n_censored: usize,
    /// Standard deviation of the normal draw whose absolute value is
    /// subtracted from the log failure time of a censored record.
    pub censor_scale: f64,
    pub seed: u64,
}

impl Default for SimScenario {
    /// Two groups in two covariates with unit regression error, 500 records,
    /// 50 of them censored.
    fn default() -> Self {
        Self {
            groups: vec![
                GroupSpec {
                    weight: 0.5,
                    mu: vec![0.5, 2.3],
                    sigma_mat: vec![0.05, 0.0, 0.0, 0.15],
                    b0: 2.0,
                    b: vec![1.3, 0.8],
                    sigma2: 1.0,
                },
                GroupSpec {
                    weight: 0.5,
                    mu: vec![0.7, 1.8],
                    sigma_mat: vec![0.20, 0.0, 0.0, 0.20],
                    b0: 1.4,
                    b: vec![1.4, 1.3],
                    sigma2: 1.0,
                },
            ],
            n_total: 500,
            n_censored: 50,
            censor_scale: 0.5,
            seed: 1,
        }
    }
}

/// The latent truth behind one generated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub index: usize,
    /// 1-based group label.
    pub group: usize,
    pub failure_time: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub data: Dataset,
    pub truth: Vec<TruthRow>,
}

impl SimScenario {
    pub fn dim(&self) -> usize {
        self.groups.first().map_or(0, |g| g.mu.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one group".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidInput("scenario needs at least one covariate".into()));
        }
        for g in &self.groups {
            if g.mu.len() != d || g.b.len() != d || g.sigma_mat.len() != d * d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: g.mu.len(),
                });
            }
            if !(g.weight >= 0.0) || !(g.sigma2 > 0.0) {
                return Err(Error::InvalidInput("group weight or variance out of range".into()));
            }
        }
        let total: f64 = self.groups.iter().map(|g| g.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMixingWeights { sum: total });
        }
        if self.n_total == 0 || self.n_censored > self.n_total {
            return Err(Error::InvalidInput(
                "need n_total > 0 and n_censored <= n_total".into(),
            ));
        }
        if !(self.censor_scale > 0.0) {
            return Err(Error::InvalidInput("censor_scale must be positive".into()));
        }
        Ok(())
    }
}

pub fn generate(scenario: &SimScenario) -> Result<SimOutput> {
    scenario.validate()?;
    let d = scenario.dim();
    let factors = scenario
        .groups
        .iter()
        .map(|g| {
            let sigma = DMatrix::from_row_slice(d, d, &g.sigma_mat);
            nalgebra::Cholesky::new(sigma)
                .map(|c| c.unpack())
                .ok_or(Error::NonPositiveDefinite)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut records = Vec::with_capacity(scenario.n_total);
    let mut truth = Vec::with_capacity(scenario.n_total);
    for index in 0..scenario.n_total {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut g = scenario.groups.len() - 1;
        for (k, spec) in scenario.groups.iter().enumerate() {
            acc += spec.weight;
            if u < acc {
                g = k;
                break;
            }
        }
        let spec = &scenario.groups[g];
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = DVector::from_row_slice(&spec.mu) + &factors[g] * z;
        let w: f64 = rng.sample(StandardNormal);
        let y = spec.b0
            + spec.b.iter().zip(x.iter()).map(|(b, x)| b * x).sum::<f64>()
            + spec.sigma2.sqrt() * w;
        let t = y.exp();
        records.push(SurvivalRecord::new(x.iter().copied().collect(), t, Status::Failed(g + 1)));
        truth.push(TruthRow {
            index,
            group: g + 1,
            failure_time: t,
        });
    }

    let shift = Normal::new(0.0, scenario.censor_scale).expect("scale validated");
    let mut chosen = index::sample(&mut rng, scenario.n_total, scenario.n_censored).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let mut v: f64 = rng.sample(shift);
        while v == 0.0 {
            v = rng.sample(shift);
        }
        let r = &mut records[i];
        r.time *= (-v.abs()).exp();
        r.status = Status::Censored;
    }

    let data = Dataset::with_causes(records, scenario.groups.len())?;
    Ok(SimOutput { data, truth })
}
