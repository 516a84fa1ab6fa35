//! Stratified nonparametric bootstrap for parameter standard errors.
//!
//! Each replicate resamples, with replacement, within every failure cause and
//! within the censored set, so the replicate keeps the observed composition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureModel, Status};

/// Standard deviations laid out like [`crate::model::ComponentParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSe {
    pub pi: f64,
    pub mu: Vec<f64>,
    /// Row-major `d x d`.
    pub sigma_mat: Vec<f64>,
    pub b0: f64,
    pub b: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone)]
pub struct BootstrapReport {
    pub b: usize,
    /// Fitted models of the successful replicates, in replicate order.
    pub estimates: Vec<MixtureModel>,
    pub se: Vec<ComponentSe>,
    pub n_failed: usize,
}

/// Indices of each stratum: causes `1..=G` in order, then the censored set.
pub fn strata(data: &Dataset) -> Vec<Vec<usize>> {
    let g_count = data.n_causes();
    let mut out = vec![Vec::new(); g_count + 1];
    for i in 0..data.len() {
        match data.status(i) {
            Status::Failed(g) => out[g - 1].push(i),
            Status::Censored => out[g_count].push(i),
        }
    }
    out
}

pub fn stratified_resample(data: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(data.len());
    for stratum in strata(data) {
        for _ in 0..stratum.len() {
            let pick = stratum[rng.random_range(0..stratum.len())];
            records.push(data.records()[pick].clone());
        }
    }
    Dataset::with_causes(records, data.n_causes()).expect("resampled records stay valid")
}

fn flatten(model: &MixtureModel) -> Vec<f64> {
    let mut out = Vec::new();
    for c in model.components() {
        out.push(c.pi);
        out.extend(c.mu.iter());
        // row-major
        for r in 0..c.sigma_mat.nrows() {
            for col in 0..c.sigma_mat.ncols() {
                out.push(c.sigma_mat[(r, col)]);
            }
        }
        out.push(c.b0);
        out.extend(c.b.iter());
        out.push(c.sigma2);
    }
    out
}

/// Element-wise sample standard deviations (divisor `m - 1`) across models.
pub fn standard_errors(estimates: &[MixtureModel]) -> Result<Vec<ComponentSe>> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::TooFewSuccesses { successes: m });
    }
    let flats: Vec<Vec<f64>> = estimates.iter().map(flatten).collect();
    let width = flats[0].len();
    let sd: Vec<f64> = (0..width)
        .map(|j| {
            // shifted by the first value so identical inputs give exactly zero
            let origin = flats[0][j];
            let mean = flats.iter().map(|f| f[j] - origin).sum::<f64>() / m as f64;
            let ss: f64 = flats.iter().map(|f| (f[j] - origin - mean).powi(2)).sum();
            (ss / (m - 1) as f64).sqrt()
        })
        .collect();

    let d = estimates[0].dim();
    let mut it = sd.into_iter();
    let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
    Ok((0..estimates[0].n_components())
        .map(|_| ComponentSe {
            pi: take(1)[0],
            mu: take(d),
            sigma_mat: take(d * d),
            b0: take(1)[0],
            b: take(d),
            sigma2: take(1)[0],
        })
        .collect())
}

/// Fits `b` stratified replicates; replicate `i` resamples and fits with seed
/// `config.seed + i`. Replicates whose every restart fails are counted in
/// `n_failed` and left out of the standard errors.
pub fn bootstrap_se(
    data: &Dataset,
    n_components: usize,
    config: &FitConfig,
    b: usize,
) -> Result<BootstrapReport> {
    if b < 2 {
        return Err(Error::InvalidInput("need at least 2 bootstrap replicates".into()));
    }
    config.validate()?;
    let d = data.dim();
    if data.len() <= n_components * (d + 2) || data.n_causes() > n_components {
        return Err(Error::InvalidInput(format!(
            "data with {} records and {} causes cannot support {} components",
            data.len(),
            data.n_causes(),
            n_components
        )));
    }
    let fits: Vec<Result<MixtureModel>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            let replicate = stratified_resample(data, seed);
            let cfg = FitConfig { seed, ..*config };
            fit(&replicate, n_components, &cfg).map(|r| r.model)
        })
        .collect();
    let n_failed = fits.iter().filter(|f| f.is_err()).count();
    let estimates: Vec<MixtureModel> = fits.into_iter().filter_map(|f| f.ok()).collect();
    let se = standard_errors(&estimates)?;
    Ok(BootstrapReport {
        b,
        estimates,
        se,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ComponentParams, SurvivalRecord};
    use nalgebra::{DMatrix, DVector};

    fn toy(sizes: (usize, usize, usize)) -> Dataset {
        let mut recs = Vec::new();
        let mut push = |n: usize, code: usize| {
            for k in 0..n {
                recs.push(SurvivalRecord::new(
                    vec![k as f64 + 0.1 * code as f64],
                    1.0 + k as f64,
                    Status::from_code(code),
                ));
            }
        };
        push(sizes.0, 1);
        push(sizes.1, 2);
        push(sizes.2, 0);
        Dataset::with_causes(recs, 2).unwrap()
    }

    fn sizes(data: &Dataset) -> Vec<usize> {
        strata(data).iter().map(Vec::len).collect()
    }

    #[test]
    fn singleton_strata_resample_to_themselves() {
        let data = toy((1, 1, 1));
        for seed in 0..5 {
            assert_eq!(stratified_resample(&data, seed), data);
        }
    }

    #[test]
    fn stratum_sizes_preserved() {
        let data = toy((3, 2, 4));
        for seed in 0..50 {
            let rep = stratified_resample(&data, seed);
            assert_eq!(sizes(&rep), vec![3, 2, 4]);
            // every record comes from its own stratum
            for r in rep.records() {
                assert!(data.records().contains(r));
            }
        }
    }

    #[test]
    fn resample_is_deterministic() {
        let data = toy((5, 4, 3));
        assert_eq!(stratified_resample(&data, 9), stratified_resample(&data, 9));
    }

    fn model_with(pi1: f64, b0: f64) -> MixtureModel {
        let comp = |pi: f64| ComponentParams {
            pi,
            mu: DVector::from_vec(vec![0.0, 1.0]),
            sigma_mat: DMatrix::identity(2, 2),
            b0,
            b: DVector::from_vec(vec![0.5, -0.5]),
            sigma2: 1.0,
        };
        MixtureModel::new(vec![comp(pi1), comp(1.0 - pi1)]).unwrap()
    }

    #[test]
    fn identical_estimates_have_zero_se() {
        let m = model_with(0.4, 1.0);
        let se = standard_errors(&[m.clone(), m.clone(), m]).unwrap();
        assert_eq!(se.len(), 2);
        for c in &se {
            assert_eq!(c.pi, 0.0);
            assert!(c.mu.iter().chain(&c.sigma_mat).chain(&c.b).all(|&v| v == 0.0));
            assert_eq!(c.sigma2, 0.0);
        }
    }

    #[test]
    fn two_point_se_uses_n_minus_one() {
        let a = model_with(0.4, 1.0);
        let b = model_with(0.6, 3.0);
        let se = standard_errors(&[a, b]).unwrap();
        let expect_pi = 0.2 / 2f64.sqrt();
        assert!((se[0].pi - expect_pi).abs() < 1e-15);
        assert!((se[1].pi - expect_pi).abs() < 1e-15);
        assert!((se[0].b0 - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(se[0].mu, vec![0.0, 0.0]);
        assert_eq!(se[0].sigma_mat.len(), 4);
    }

    #[test]
    fn too_few_estimates() {
        assert_eq!(
            standard_errors(&[model_with(0.5, 0.0)]).unwrap_err(),
            Error::TooFewSuccesses { successes: 1 }
        );
    }

    #[test]
    fn bootstrap_rejects_one_replicate_and_tiny_data() {
        let data = toy((1, 1, 1));
        let cfg = FitConfig::default();
        assert!(bootstrap_se(&data, 2, &cfg, 1).is_err());
        assert!(matches!(
            bootstrap_se(&data, 2, &cfg, 2),
            Err(Error::InvalidInput(_))
        ));
    }
}
