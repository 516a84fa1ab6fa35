//! Survival and cumulative incidence curves: model-based population averages
//! and the nonparametric Kaplan-Meier / Aalen-Johansen references.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureModel, Status};

/// Two-sided 95% standard normal quantile.
const Z_975: f64 = 1.959_963_984_540_054;

/// Right-continuous piecewise-constant curve. `values[k]` holds on
/// `[times[k], times[k + 1])`; before `times[0]` the curve equals
/// `value_at_zero`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub value_at_zero: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Pointwise variance estimate, when the estimator provides one.
    pub variance: Option<Vec<f64>>,
}

impl StepFunction {
    fn plain(times: Vec<f64>, values: Vec<f64>, value_at_zero: f64) -> Self {
        Self {
            times,
            values,
            value_at_zero,
            lower: None,
            upper: None,
            variance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        // number of knots <= t
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            self.value_at_zero
        } else {
            self.values[k - 1]
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.value_at_zero)
    }

    /// `time,value[,lower,upper]` with a header row and LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => {
                writeln!(out, "time,value,lower,upper")?;
                for k in 0..self.times.len() {
                    writeln!(out, "{},{},{},{}", self.times[k], self.values[k], lo[k], hi[k])?;
                }
            }
            _ => {
                writeln!(out, "time,value")?;
                for (t, v) in self.times.iter().zip(&self.values) {
                    writeln!(out, "{t},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluation grid for parametric curves: `points` equally spaced times on
/// `(0, 1.05 max(time)]` merged with every distinct observed time.
pub fn default_grid(data: &Dataset, points: usize) -> Vec<f64> {
    let max_t = data
        .records()
        .iter()
        .map(|r| r.time)
        .fold(0.0_f64, f64::max);
    let upper = 1.05 * max_t;
    let mut grid: Vec<f64> = (1..=points)
        .map(|k| upper * k as f64 / points as f64)
        .chain(data.records().iter().map(|r| r.time))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("grid times must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_cause(model: &MixtureModel, g: usize) -> Result<()> {
    if g == 0 || g > model.n_components() {
        return Err(Error::CauseOutOfRange {
            cause: g,
            n_causes: model.n_components(),
        });
    }
    Ok(())
}

fn check_dim(model: &MixtureModel, data: &Dataset) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    Ok(())
}

/// `(1/N) sum_i S_g(t | x_i)` for component index `g` (0-based).
fn averaged_component_survival(model: &MixtureModel, data: &Dataset, g: usize, t: f64) -> f64 {
    let comp = model.component(g);
    let total: f64 = (0..data.len())
        .map(|i| {
            comp.conditional_survival_time(data.covariates(i), t)
                .expect("dimension checked")
        })
        .sum();
    total / data.len() as f64
}

/// Population-averaged overall survival `G(t) = (1/N) sum_i sum_g pi_g S_g(t | x_i)`.
pub fn overall_survival(model: &MixtureModel, data: &Dataset, grid: &[f64]) -> Result<StepFunction> {
    check_dim(model, data)?;
    check_grid(grid)?;
    let values = grid
        .iter()
        .map(|&t| {
            (0..model.n_components())
                .map(|g| model.component(g).pi * averaged_component_survival(model, data, g, t))
                .sum()
        })
        .collect();
    Ok(StepFunction::plain(grid.to_vec(), values, 1.0))
}

/// Model cumulative incidence `pi_g (1 - (1/N) sum_i S_g(t | x_i))` for cause `g` (1-based).
pub fn model_cif(
    model: &MixtureModel,
    data: &Dataset,
    g: usize,
    grid: &[f64],
) -> Result<StepFunction> {
    check_cause(model, g)?;
    check_dim(model, data)?;
    check_grid(grid)?;
    let pi = model.component(g - 1).pi;
    let values = grid
        .iter()
        .map(|&t| pi * (1.0 - averaged_component_survival(model, data, g - 1, t)))
        .collect();
    Ok(StepFunction::plain(grid.to_vec(), values, 0.0))
}

/// Fraction expected never to fail from the cause of interest:
/// `pi_g (1/N) sum_i S_g(t0 | x_i)` for the competing cause `g` (1-based).
pub fn cure_rate(model: &MixtureModel, data: &Dataset, competing_g: usize, t0: f64) -> Result<f64> {
    check_cause(model, competing_g)?;
    check_dim(model, data)?;
    if !(t0 > 0.0) {
        return Err(Error::InvalidInput("t0 must be positive".into()));
    }
    let pi = model.component(competing_g - 1).pi;
    Ok(pi * averaged_component_survival(model, data, competing_g - 1, t0))
}

/// Per distinct time: number at risk, failures per cause, censorings.
/// Records tied with a failure time count as at risk for it.
struct RiskTable {
    times: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<Vec<usize>>,
}

impl RiskTable {
    fn build(data: &Dataset) -> Self {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.records()[a].time.total_cmp(&data.records()[b].time));
        let g_count = data.n_causes();
        let mut table = RiskTable {
            times: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
        };
        let mut remaining = data.len();
        let mut k = 0;
        while k < order.len() {
            let t = data.records()[order[k]].time;
            let mut events = vec![0usize; g_count];
            let mut leaving = 0;
            while k < order.len() && data.records()[order[k]].time == t {
                if let Status::Failed(g) = data.records()[order[k]].status {
                    events[g - 1] += 1;
                }
                leaving += 1;
                k += 1;
            }
            if events.iter().any(|&e| e > 0) {
                table.times.push(t);
                table.at_risk.push(remaining);
                table.events.push(events);
            }
            remaining -= leaving;
        }
        table
    }
}

/// All-cause Kaplan-Meier curve with Greenwood variance and log-minus-log
/// 95% pointwise bounds.
pub fn kaplan_meier(data: &Dataset) -> StepFunction {
    let table = RiskTable::build(data);
    let m = table.times.len();
    let mut values = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut variance = Vec::with_capacity(m);
    let mut s = 1.0;
    let mut greenwood = 0.0;
    for j in 0..m {
        let n = table.at_risk[j];
        let d: usize = table.events[j].iter().sum();
        s *= 1.0 - d as f64 / n as f64;
        greenwood += if n > d {
            d as f64 / (n as f64 * (n - d) as f64)
        } else {
            f64::INFINITY
        };
        values.push(s);
        variance.push(if s > 0.0 { s * s * greenwood } else { 0.0 });
        if s > 0.0 && s < 1.0 {
            let se = greenwood.sqrt() / s.ln().abs();
            lower.push(s.powf((Z_975 * se).exp()));
            upper.push(s.powf((-Z_975 * se).exp()));
        } else {
            lower.push(s);
            upper.push(s);
        }
    }
    StepFunction {
        times: table.times,
        values,
        value_at_zero: 1.0,
        lower: Some(lower),
        upper: Some(upper),
        variance: Some(variance),
    }
}

/// Aalen-Johansen cumulative incidence of cause `g` (1-based):
/// `sum_{t_j <= t} S(t_j-) d_gj / n_j` with `S` the all-cause Kaplan-Meier.
pub fn aalen_johansen_cif(data: &Dataset, g: usize) -> Result<StepFunction> {
    if g == 0 || g > data.n_causes() {
        return Err(Error::CauseOutOfRange {
            cause: g,
            n_causes: data.n_causes(),
        });
    }
    let table = RiskTable::build(data);
    let mut values = Vec::with_capacity(table.times.len());
    let mut s = 1.0;
    let mut cif = 0.0;
    for j in 0..table.times.len() {
        let n = table.at_risk[j] as f64;
        let d: usize = table.events[j].iter().sum();
        cif += s * (table.events[j][g - 1] as f64 / n);
        s *= 1.0 - d as f64 / n;
        values.push(cif);
    }
    Ok(StepFunction::plain(table.times, values, 0.0))
}
