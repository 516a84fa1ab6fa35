use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Status};

use super::Responsibilities;

/// How censored rows are seeded before the first M-step. Failure rows are
/// always the indicator of their cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Indicator rows for failures, symmetric Dirichlet draws for censored rows.
    #[default]
    LabelSeeded,
    /// Dirichlet draws for every row, then failure rows overwritten.
    RandomSoft,
}

fn dirichlet_row<R: Rng>(rng: &mut R, out: &mut [f64]) {
    let mut total = 0.0;
    for o in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        *o = e;
        total += e;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

pub fn initialize(data: &Dataset, seed: u64, strategy: InitStrategy) -> Responsibilities {
    let g_count = data.n_causes();
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tau = vec![0.0; n * g_count];
    for i in 0..n {
        let row = &mut tau[i * g_count..(i + 1) * g_count];
        let status = data.status(i);
        if strategy == InitStrategy::RandomSoft || status.is_censored() {
            dirichlet_row(&mut rng, row);
        }
        if let Status::Failed(g) = status {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[g - 1] = 1.0;
        }
    }
    Responsibilities::from_values(n, g_count, tau)
}
