//! Independent reference implementations shared by the integration tests and
//! the acceptance harness. Nothing here calls into the library's numerical
//! code paths; only data types are shared.

#![allow(dead_code)]

use cwaft::em::{CensoredMoments, Responsibilities};
use cwaft::{Dataset, Status, SurvivalRecord};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over `[a, b]`, split into unit panels first. The
/// tolerance is relative to a coarse estimate of the whole integral.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let panels = ((b - a).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let bounds: Vec<(f64, f64)> = (0..panels)
        .map(|k| (a + k as f64 * h, a + (k + 1) as f64 * h))
        .collect();
    let coarse: f64 = bounds
        .iter()
        .map(|&(lo, hi)| {
            let q = 0.25 * (hi - lo);
            (0..4)
                .map(|j| {
                    let (x0, x1) = (lo + j as f64 * q, lo + (j + 1) as f64 * q);
                    simpson(x0, x1, f(x0), f(0.5 * (x0 + x1)), f(x1))
                })
                .sum::<f64>()
        })
        .sum();
    let tol = rel_tol * coarse.abs() / panels as f64;
    bounds
        .iter()
        .map(|&(lo, hi)| {
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adaptive(f, lo, hi, fa, fm, fb, whole, tol, 40)
        })
        .sum()
}

/// First and second moments of `N(mu, sigma^2)` truncated to `(mu + sigma z, inf)`
/// by quadrature of the standard normal density over `u > z`. Every
/// integrand is non-negative: for `z < 0` the odd part of `u phi(u)` on
/// `(z, -z)` integrates to zero and is dropped before integrating, and the
/// second moment integrates `(mu + sigma u)^2` directly.
pub fn trunc_moments_quadrature(mu: f64, sigma: f64, z: f64) -> (f64, f64) {
    // rescaled so the largest weight on the range is 1
    let peak = if z > 0.0 { 0.5 * z * z } else { 0.0 };
    let w = move |u: f64| (peak - 0.5 * u * u).exp();
    let upper = z.abs() + 40.0;
    let tol = 1e-14;
    let mass = integrate(&|u| w(u), z, upper, tol);
    let first = integrate(&|u| u * w(u), z.abs(), upper, tol);
    let second = integrate(&|u| (mu + sigma * u).powi(2) * w(u), z, upper, tol);
    (mu + sigma * first / mass, second / mass)
}

/// Kaplan-Meier by its definition: for each distinct failure time in
/// increasing order, multiply by `1 - d / n` with `n` counted as all records
/// whose time is at least that time.
pub fn naive_km(records: &[SurvivalRecord]) -> (Vec<f64>, Vec<f64>) {
    let times = distinct_failure_times(records);
    let mut s = 1.0;
    let mut values = Vec::new();
    for &t in &times {
        let n = records.iter().filter(|r| r.time >= t).count();
        let d = records
            .iter()
            .filter(|r| r.time == t && !r.status.is_censored())
            .count();
        s *= 1.0 - d as f64 / n as f64;
        values.push(s);
    }
    (times, values)
}

/// Aalen-Johansen incidence of `cause` by its definition.
pub fn naive_aj(records: &[SurvivalRecord], cause: usize) -> (Vec<f64>, Vec<f64>) {
    let times = distinct_failure_times(records);
    let mut s = 1.0;
    let mut cif = 0.0;
    let mut values = Vec::new();
    for &t in &times {
        let n = records.iter().filter(|r| r.time >= t).count() as f64;
        let d_all = records
            .iter()
            .filter(|r| r.time == t && !r.status.is_censored())
            .count();
        let d_cause = records
            .iter()
            .filter(|r| r.time == t && r.status == Status::Failed(cause))
            .count();
        cif += s * (d_cause as f64 / n);
        s *= 1.0 - d_all as f64 / n;
        values.push(cif);
    }
    (times, values)
}

fn distinct_failure_times(records: &[SurvivalRecord]) -> Vec<f64> {
    let mut times: Vec<f64> = records
        .iter()
        .filter(|r| !r.status.is_censored())
        .map(|r| r.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Every multiset of size `1..=max_n` drawn from `kinds`, as index counts.
pub fn multisets(kinds: usize, max_n: usize) -> Vec<Vec<usize>> {
    fn rec(kinds: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for k in start..kinds {
            cur.push(k);
            rec(kinds, k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(kinds, 0, max_n, &mut Vec::new(), &mut out);
    out
}

/// Reference closed-form parameters of one weighted component.
#[derive(Debug, Clone)]
pub struct WlsReference {
    pub pi: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub b0: f64,
    pub b: DVector<f64>,
    pub sigma2: f64,
}

/// Weighted least squares through a QR factorization of the square-root
/// weighted design `[1, x]`, plus direct weighted covariate moments.
pub fn wls_reference(
    data: &Dataset,
    weights: &[f64],
    ey: &[f64],
    ey2: &[f64],
) -> WlsReference {
    let n = data.len();
    let d = data.dim();
    let total: f64 = weights.iter().sum();
    let design = DMatrix::from_fn(n, d + 1, |i, j| {
        let x = if j == 0 { 1.0 } else { data.covariates(i)[j - 1] };
        weights[i].sqrt() * x
    });
    let rhs = DVector::from_fn(n, |i, _| weights[i].sqrt() * ey[i]);
    let qr = design.clone().qr();
    let coef = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &rhs))
        .expect("full-rank design");
    let mut rss = 0.0;
    for i in 0..n {
        let x = data.covariates(i);
        let pred = coef[0] + (0..d).map(|j| coef[j + 1] * x[j]).sum::<f64>();
        rss += weights[i] * ((ey[i] - pred).powi(2) + (ey2[i] - ey[i] * ey[i]));
    }
    let mean = DVector::from_fn(d, |j, _| {
        (0..n).map(|i| weights[i] * data.covariates(i)[j]).sum::<f64>() / total
    });
    let cov = DMatrix::from_fn(d, d, |r, c| {
        (0..n)
            .map(|i| {
                let x = data.covariates(i);
                weights[i] * (x[r] - mean[r]) * (x[c] - mean[c])
            })
            .sum::<f64>()
            / total
    });
    WlsReference {
        pi: total / n as f64,
        mean,
        cov,
        b0: coef[0],
        b: DVector::from_fn(d, |j, _| coef[j + 1]),
        sigma2: rss / total,
    }
}

/// A random two-component weighted problem: failures carry indicator
/// weights, censored rows split `(w, 1 - w)`, and censored rows get
/// arbitrary imputed moments with positive conditional variance.
pub struct WeightedProblem {
    pub data: Dataset,
    pub tau: Responsibilities,
    pub moments: CensoredMoments,
}

pub fn random_weighted_problem(seed: u64) -> WeightedProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=3);
    let n = rng.random_range(30..=80);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = rng.random_range(0.1..50.0);
        // at least a handful of each cause so both components are identifiable
        let status = match i % 5 {
            0 | 1 => Status::Failed(1),
            2 | 3 => Status::Failed(2),
            _ => Status::Censored,
        };
        records.push(SurvivalRecord::new(x, t, status));
    }
    let data = Dataset::with_causes(records, 2).unwrap();
    let mut tau = Vec::with_capacity(2 * n);
    let mut ey = Vec::with_capacity(2 * n);
    let mut ey2 = Vec::with_capacity(2 * n);
    for i in 0..n {
        let y = data.log_time(i);
        match data.status(i) {
            Status::Failed(g) => {
                tau.extend(if g == 1 { [1.0, 0.0] } else { [0.0, 1.0] });
                ey.extend([y, y]);
                ey2.extend([y * y, y * y]);
            }
            Status::Censored => {
                let w: f64 = rng.random_range(0.0..1.0);
                tau.extend([w, 1.0 - w]);
                for _ in 0..2 {
                    let m = y + rng.random_range(0.0..3.0);
                    let v = rng.random_range(0.01..2.0);
                    ey.push(m);
                    ey2.push(m * m + v);
                }
            }
        }
    }
    WeightedProblem {
        tau: Responsibilities::from_values(n, 2, tau),
        moments: CensoredMoments::from_values(n, 2, ey, ey2),
        data,
    }
}

/// Largest error scaled by `max(1, |reference|)`.
pub fn scaled_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}
