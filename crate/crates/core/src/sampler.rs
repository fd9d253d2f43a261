//! Random feasible routes for statistical edge features.
//!
//! Each route walks a uniform random permutation of the intermediate
//! vertices and keeps every vertex that still leaves room to reach the end.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, Route};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("no feasible route: cost(start, end) = {cost} exceeds budget {t_max}")]
    InfeasibleInstance { cost: f64, t_max: f64 },
}

/// `m` sampled routes with their objectives and 1-based ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub routes: Vec<Route>,
    pub objectives: Vec<f64>,
    pub rankings: Vec<usize>,
}

impl SampleSet {
    pub fn m(&self) -> usize {
        self.routes.len()
    }

    /// Writes one `{route, objective}` JSON object per line, 1-based.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            route: Vec<usize>,
            objective: &'a f64,
        }
        for (r, y) in self.routes.iter().zip(&self.objectives) {
            let line = Line {
                route: r.vertices.iter().map(|v| v + 1).collect(),
                objective: y,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Draws `m` routes; sample `k` uses its own random stream, so the result
/// does not depend on the number of worker threads.
pub fn sample(inst: &Instance, m: usize, seed: u64) -> Result<SampleSet, SampleError> {
    if m == 0 {
        return Err(SampleError::EmptySample);
    }
    let direct = inst.cost(inst.start(), inst.end());
    if direct > inst.t_max() {
        return Err(SampleError::InfeasibleInstance {
            cost: direct,
            t_max: inst.t_max(),
        });
    }
    if m + 1 < inst.n() {
        log::warn!(
            "sample size {m} is below n - 1 = {}; some edges cannot be sampled",
            inst.n() - 1
        );
    }
    let candidates: Vec<usize> = inst.intermediates().collect();
    let routes: Vec<Route> = (0..m)
        .into_par_iter()
        .map_init(
            || candidates.clone(),
            |perm, k| {
                let mut rng = rng::stream(seed, k as u64);
                perm.copy_from_slice(&candidates);
                perm.shuffle(&mut rng);
                random_route(inst, perm)
            },
        )
        .collect();
    let objectives: Vec<f64> = routes.iter().map(|r| r.objective).collect();
    let rankings = rank(&objectives);
    Ok(SampleSet {
        routes,
        objectives,
        rankings,
    })
}

/// Greedy feasible walk over `order`, keeping every vertex that fits.
pub fn random_route(inst: &Instance, order: &[usize]) -> Route {
    let (start, end, t_max) = (inst.start(), inst.end(), inst.t_max());
    let mut vertices = Vec::with_capacity(order.len() + 2);
    vertices.push(start);
    let mut cur = start;
    let mut used = 0.0;
    let mut objective = inst.score(start);
    for &v in order {
        let step = inst.cost(cur, v);
        if used + step + inst.cost(v, end) <= t_max {
            vertices.push(v);
            used += step;
            objective += inst.score(v);
            cur = v;
        }
    }
    used += inst.cost(cur, end);
    vertices.push(end);
    if !inst.is_closed() {
        objective += inst.score(end);
    }
    Route {
        vertices,
        cost: used,
        objective,
    }
}

/// 1-based ranks by descending value; equal values rank by ascending index.
pub fn rank(objectives: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&a, &b| objectives[b].total_cmp(&objectives[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; objectives.len()];
    for (r, &k) in order.iter().enumerate() {
        ranks[k] = r + 1;
    }
    ranks
}
