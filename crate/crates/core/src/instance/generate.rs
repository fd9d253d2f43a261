use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CostRounding, Instance, InstanceError};

const MAX_ATTEMPTS: usize = 10_000;

/// Parameters of the random instance generator.
///
/// Defaults reproduce the synthetic training distribution: coordinates in
/// `[0, 100]^2`, integer scores in `[0, 100]`, integer budget in `[100, 400]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub budget_range: [i64; 2],
    pub coord_range: [f64; 2],
    pub score_range: [i64; 2],
}

impl GeneratorConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            budget_range: [100, 400],
            coord_range: [0.0, 100.0],
            score_range: [0, 100],
        }
    }

    pub fn with_budget(mut self, lo: i64, hi: i64) -> Self {
        self.budget_range = [lo, hi];
        self
    }
}

/// Draws a random instance with exact Euclidean costs.
///
/// Vertex 0 is the start and vertex `n-1` the end; both score 0. A draw whose
/// end vertex lies beyond the budget is discarded and redrawn from the same
/// stream, so the result is still a pure function of `(config, seed)`.
pub fn generate_random(config: &GeneratorConfig, seed: u64) -> Result<Instance, InstanceError> {
    let n = config.n;
    if n < 2 {
        return Err(InstanceError::InvalidDimension(n));
    }
    let [b_lo, b_hi] = config.budget_range;
    let [c_lo, c_hi] = config.coord_range;
    let [s_lo, s_hi] = config.score_range;
    if b_lo > b_hi || b_lo < 0 {
        return Err(InstanceError::InvalidGenerator(format!(
            "budget range [{b_lo}, {b_hi}]"
        )));
    }
    if !(c_lo <= c_hi) || !c_lo.is_finite() || !c_hi.is_finite() {
        return Err(InstanceError::InvalidGenerator(format!(
            "coordinate range [{c_lo}, {c_hi}]"
        )));
    }
    if s_lo > s_hi || s_lo < 0 {
        return Err(InstanceError::InvalidGenerator(format!(
            "score range [{s_lo}, {s_hi}]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(c_lo..=c_hi), rng.gen_range(c_lo..=c_hi)])
            .collect();
        let scores: Vec<f64> = (0..n)
            .map(|v| {
                if v == 0 || v == n - 1 {
                    0.0
                } else {
                    rng.gen_range(s_lo..=s_hi) as f64
                }
            })
            .collect();
        let t_max = rng.gen_range(b_lo..=b_hi) as f64;
        match Instance::from_coords(
            format!("rand-n{n}-s{seed}"),
            coords,
            scores,
            t_max,
            0,
            n - 1,
            CostRounding::ExactEuclidean,
        ) {
            Err(InstanceError::InfeasibleBudget { .. }) => continue,
            other => return other,
        }
    }
    Err(InstanceError::InvalidGenerator(format!(
        "no draw with a reachable end vertex after {MAX_ATTEMPTS} attempts"
    )))
}
