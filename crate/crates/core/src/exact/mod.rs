//! Exact solution of small instances by depth-first branch and bound.
//!
//! Two engines share one interface. The path search grows partial routes
//! from the start vertex and cuts a branch when no completion can beat the
//! incumbent under a fractional-knapsack bound, or when the same vertex set
//! was already reached at the same endpoint with no more budget spent. The
//! branch-and-cut engine bounds with a linear relaxation tightened by
//! subtour cuts and handles symmetric instances beyond the reach of the
//! path search.

mod cut;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, Dataset, FeatureError, COST_FLOOR};
use crate::instance::{Instance, Route};
use crate::local_search::greedy_route;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("no feasible route: cost(start, end) = {cost} exceeds budget {t_max}")]
    InfeasibleInstance { cost: f64, t_max: f64 },
    #[error("no instance was solved to optimality; the training set is empty")]
    EmptyTrainingSet,
    #[error("instance `{name}`: {source}")]
    Features {
        name: String,
        source: FeatureError,
    },
}

/// Outcome of [`solve_bnb`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub route: Route,
    pub objective: f64,
    pub nodes_explored: u64,
    pub proved_optimal: bool,
    pub wall_time: f64,
    /// `(seconds, objective)` each time the incumbent improved.
    pub incumbent_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Branch and cut for symmetric instances with more than
    /// [`AUTO_PATH_SEARCH_MAX_N`] vertices, path search otherwise.
    #[default]
    Auto,
    PathSearch,
    BranchAndCut,
}

pub const AUTO_PATH_SEARCH_MAX_N: usize = 12;

#[derive(Debug, Clone)]
pub struct BnbOptions {
    pub engine: Engine,
    pub time_limit: Duration,
    /// Objective of a known feasible route. Branches whose bound falls
    /// strictly below it are cut; the returned route is still the first
    /// optimum in search order.
    pub threshold: Option<f64>,
    /// Maximum number of dominance entries kept; 0 disables dominance.
    pub memo_capacity: usize,
}

impl BnbOptions {
    pub fn with_time_limit(seconds: f64) -> Self {
        Self {
            engine: Engine::Auto,
            time_limit: Duration::from_secs_f64(seconds.max(0.0)),
            threshold: None,
            memo_capacity: 20_000_000,
        }
    }
}

/// Solves `inst` to optimality unless `time_limit` seconds elapse first.
pub fn solve_bnb(inst: &Instance, time_limit: f64) -> Result<ExactResult, ExactError> {
    solve_bnb_with(inst, &BnbOptions::with_time_limit(time_limit))
}

pub fn solve_bnb_with(inst: &Instance, opts: &BnbOptions) -> Result<ExactResult, ExactError> {
    let direct = inst.cost(inst.start(), inst.end());
    if direct > inst.t_max() {
        return Err(ExactError::InfeasibleInstance {
            cost: direct,
            t_max: inst.t_max(),
        });
    }
    let began = Instant::now();
    if opts.time_limit.is_zero() {
        let route = inst.trivial_route();
        return Ok(ExactResult {
            objective: route.objective,
            incumbent_trace: vec![(0.0, route.objective)],
            route,
            nodes_explored: 0,
            proved_optimal: false,
            wall_time: began.elapsed().as_secs_f64(),
        });
    }
    let use_cuts = match opts.engine {
        Engine::Auto => inst.is_symmetric() && inst.n() > AUTO_PATH_SEARCH_MAX_N,
        Engine::PathSearch => false,
        Engine::BranchAndCut => {
            if !inst.is_symmetric() {
                log::warn!(
                    "instance `{}` is asymmetric; using path search instead of branch and cut",
                    inst.name()
                );
            }
            inst.is_symmetric()
        }
    };
    let (route, nodes, proved, trace) = if use_cuts {
        let out = cut::branch_and_cut(inst, starting_route(inst), began, opts.time_limit);
        (out.best, out.nodes, out.proved, out.trace)
    } else {
        let mut search = PathSearch::new(inst, opts, began);
        let start = inst.start();
        search.visited[start] = true;
        search.path.push(start);
        search.dfs(start, 0.0, inst.score(start), 0);
        let route = Route::new(inst, search.best_path.clone());
        (route, search.nodes, !search.timed_out, search.trace)
    };
    debug_assert_eq!(inst.feasible(&route), Ok(true));
    Ok(ExactResult {
        objective: route.objective,
        route,
        nodes_explored: nodes,
        proved_optimal: proved,
        wall_time: began.elapsed().as_secs_f64(),
        incumbent_trace: trace,
    })
}

/// Best of the greedy local-search route and, for closed routes, every
/// single-vertex round trip.
fn starting_route(inst: &Instance) -> Route {
    let mut best = greedy_route(inst);
    if inst.is_closed() {
        let d = inst.start();
        for v in inst.intermediates() {
            let trip = Route::new(inst, vec![d, v, d]);
            if trip.cost <= inst.t_max() && trip.objective > best.objective {
                best = trip;
            }
        }
    }
    best
}

struct PathSearch<'a> {
    inst: &'a Instance,
    end: usize,
    t_max: f64,
    end_score: f64,
    symmetric: bool,
    /// Shortest-path distances, present when direct costs violate the
    /// triangle inequality.
    closure: Option<Vec<f64>>,
    /// Neighbours of each vertex by ascending symmetric cost.
    near: Vec<Vec<usize>>,
    visited: Vec<bool>,
    key: u128,
    path: Vec<usize>,
    best_obj: f64,
    best_path: Vec<usize>,
    threshold: f64,
    nodes: u64,
    began: Instant,
    deadline: Duration,
    timed_out: bool,
    memo: HashMap<(u128, u16), f64>,
    memo_capacity: usize,
    allowed: Vec<bool>,
    items: Vec<(f64, f64)>,
    trace: Vec<(f64, f64)>,
}

impl<'a> PathSearch<'a> {
    fn new(inst: &'a Instance, opts: &BnbOptions, began: Instant) -> Self {
        let n = inst.n();
        let end = inst.end();
        let symmetric = inst.is_symmetric();
        let near = (0..n)
            .map(|v| {
                let mut order: Vec<usize> = (0..n).filter(|&u| u != v).collect();
                order.sort_by(|&a, &b| inst.cost(v, a).total_cmp(&inst.cost(v, b)).then(a.cmp(&b)));
                order
            })
            .collect();
        let closure = (!inst.is_metric()).then(|| {
            let mut d = inst.cost_matrix().to_vec();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = d[i * n + k] + d[k * n + j];
                        if via < d[i * n + j] {
                            d[i * n + j] = via;
                        }
                    }
                }
            }
            d
        });
        let end_score = if inst.is_closed() { 0.0 } else { inst.score(end) };
        let trivial = vec![inst.start(), end];
        let trivial_obj = inst.path_objective(&trivial);
        Self {
            inst,
            end,
            t_max: inst.t_max(),
            end_score,
            symmetric,
            closure,
            near,
            visited: vec![false; n],
            key: 0,
            path: Vec::with_capacity(n + 1),
            best_obj: trivial_obj,
            best_path: trivial,
            threshold: opts.threshold.unwrap_or(f64::NEG_INFINITY),
            nodes: 0,
            began,
            deadline: opts.time_limit,
            timed_out: false,
            memo: HashMap::new(),
            memo_capacity: if n <= 128 { opts.memo_capacity } else { 0 },
            allowed: vec![false; n],
            items: Vec::with_capacity(n),
            trace: vec![(0.0, trivial_obj)],
        }
    }

    fn dfs(&mut self, cur: usize, used: f64, score: f64, depth: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 4096 == 0 && self.began.elapsed() >= self.deadline {
            self.timed_out = true;
            return;
        }
        let inst = self.inst;
        let complete = score + self.end_score;
        if complete > self.best_obj && used + inst.cost(cur, self.end) <= self.t_max {
            self.best_obj = complete;
            self.best_path.clear();
            self.best_path.extend_from_slice(&self.path);
            self.best_path.push(self.end);
            self.trace.push((self.began.elapsed().as_secs_f64(), complete));
        }
        if depth > 0 && self.memo_capacity > 0 {
            let key = (self.key, cur as u16);
            let full = self.memo.len() >= self.memo_capacity;
            match self.memo.get_mut(&key) {
                Some(prev) if *prev <= used => return,
                Some(prev) => *prev = used,
                None if !full => {
                    self.memo.insert(key, used);
                }
                None => {}
            }
        }

        let row = inst.cost_row(cur);
        let n = inst.n();
        let to_end = |v: usize| match &self.closure {
            None => inst.cost(v, self.end),
            Some(d) => d[v * n + self.end],
        };
        let mut cands: Vec<usize> = inst
            .intermediates()
            .filter(|&v| !self.visited[v] && used + row[v] + to_end(v) <= self.t_max)
            .collect();
        if cands.is_empty() {
            return;
        }
        let bound = match &self.closure {
            None => complete + self.knapsack_bound(cur, used, &cands),
            Some(d) => {
                // vertices reachable through detours also count
                let reach: Vec<usize> = inst
                    .intermediates()
                    .filter(|&v| {
                        !self.visited[v]
                            && used + d[cur * n + v] + d[v * n + self.end] <= self.t_max
                    })
                    .collect();
                complete + self.knapsack_bound(cur, used, &reach)
            }
        };
        if bound <= self.best_obj || bound < self.threshold {
            return;
        }

        let ratio = |v: usize| inst.score(v) / row[v].max(COST_FLOOR);
        cands.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
        for v in cands {
            self.visited[v] = true;
            self.key ^= 1u128 << (v & 127);
            self.path.push(v);
            self.dfs(v, used + row[v], score + inst.score(v), depth + 1);
            self.path.pop();
            self.key ^= 1u128 << (v & 127);
            self.visited[v] = false;
            if self.timed_out {
                return;
            }
        }
    }

    /// Upper bound on the score still collectable from `cands`.
    ///
    /// Each edge's cost is split between its endpoints, so a visited vertex
    /// consumes at least half its two cheapest admissible edges, and the
    /// leaving and arriving half-edges at `cur` and the end are fixed.
    fn knapsack_bound(&mut self, cur: usize, used: f64, cands: &[usize]) -> f64 {
        let inst = self.inst;
        let end = self.end;
        for &v in cands {
            self.allowed[v] = true;
        }
        let mut leave = f64::INFINITY;
        let mut arrive = f64::INFINITY;
        self.items.clear();
        for &v in cands {
            leave = leave.min(inst.cost(cur, v));
            arrive = arrive.min(inst.cost(v, end));
            let weight = if self.symmetric && cur != end {
                // both incident edges touch distinct members of cands + {cur, end}
                let mut two = [f64::INFINITY; 2];
                let mut found = 0;
                for &u in &self.near[v] {
                    if self.allowed[u] || u == cur || u == end {
                        two[found] = inst.cost(v, u);
                        found += 1;
                        if found == 2 {
                            break;
                        }
                    }
                }
                if found < 2 {
                    two[1] = two[0];
                }
                0.5 * (two[0] + two[1])
            } else {
                let mut min_in = inst.cost(cur, v);
                let mut min_out = inst.cost(v, end);
                for &u in cands {
                    if u != v {
                        min_in = min_in.min(inst.cost(u, v));
                        min_out = min_out.min(inst.cost(v, u));
                    }
                }
                0.5 * (min_in + min_out)
            };
            self.items.push((inst.score(v), weight));
        }
        for &v in cands {
            self.allowed[v] = false;
        }
        let mut capacity = self.t_max - used - 0.5 * (leave + arrive);
        if capacity < 0.0 {
            return 0.0;
        }
        self.items.sort_by(|a, b| (b.0 * a.1).total_cmp(&(a.0 * b.1)));
        let mut gain = 0.0;
        for &(s, w) in &self.items {
            if w <= capacity {
                capacity -= w;
                gain += s;
            } else {
                gain += s * capacity / w;
                break;
            }
        }
        gain
    }
}

/// Best route by enumerating every ordered subset of intermediate vertices.
///
/// Exponential; intended as a reference for instances with at most ten
/// vertices.
pub fn brute_force(inst: &Instance) -> Route {
    let inter: Vec<usize> = inst.intermediates().collect();
    let mut best = inst.trivial_route();
    let mut used = vec![false; inter.len()];
    let mut seq = vec![inst.start()];
    fn walk(
        inst: &Instance,
        inter: &[usize],
        used: &mut [bool],
        seq: &mut Vec<usize>,
        best: &mut Route,
    ) {
        seq.push(inst.end());
        let route = Route::new(inst, seq.clone());
        if route.cost <= inst.t_max() && route.objective > best.objective {
            *best = route;
        }
        seq.pop();
        for k in 0..inter.len() {
            if !used[k] {
                used[k] = true;
                seq.push(inter[k]);
                walk(inst, inter, used, seq, best);
                seq.pop();
                used[k] = false;
            }
        }
    }
    walk(inst, &inter, &mut used, &mut seq, &mut best);
    best
}

/// Per-instance labelling outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub instance: String,
    /// 1-based vertex sequence.
    pub optimal_route: Vec<usize>,
    pub objective: f64,
    pub proved: bool,
    pub nodes_explored: u64,
    pub wall_time: f64,
}

/// Labelled rows of every proved instance plus one record per instance.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub data: Dataset,
    pub records: Vec<LabelRecord>,
}

/// Solves each instance, drops those not proved optimal within
/// `time_limit`, and labels the features of the rest.
///
/// Instance `k` samples its `m` routes with seed `seed + k`.
pub fn build_training_set(
    instances: &[Instance],
    time_limit: f64,
    m: usize,
    seed: u64,
) -> Result<TrainingSet, ExactError> {
    let solved: Vec<(LabelRecord, Option<Dataset>)> = instances
        .par_iter()
        .enumerate()
        .map(|(k, inst)| {
            let res = solve_bnb(inst, time_limit)?;
            let record = LabelRecord {
                instance: inst.name().to_string(),
                optimal_route: res.route.vertices.iter().map(|v| v + 1).collect(),
                objective: res.objective,
                proved: res.proved_optimal,
                nodes_explored: res.nodes_explored,
                wall_time: res.wall_time,
            };
            if !res.proved_optimal {
                log::warn!(
                    "instance `{}` not proved optimal within {time_limit}s; dropped",
                    inst.name()
                );
                return Ok((record, None));
            }
            let wrap = |source| ExactError::Features {
                name: inst.name().to_string(),
                source,
            };
            let rows = features::extract(inst, m, seed.wrapping_add(k as u64))
                .and_then(|f| f.with_labels(inst, &res.route))
                .map_err(wrap)?;
            Ok((record, Some(rows.into_dataset())))
        })
        .collect::<Result<_, ExactError>>()?;
    let mut data = Dataset::default();
    let mut records = Vec::with_capacity(solved.len());
    for (record, rows) in solved {
        if let Some(rows) = rows {
            data.extend(rows);
        }
        records.push(record);
    }
    if data.is_empty() {
        return Err(ExactError::EmptyTrainingSet);
    }
    Ok(TrainingSet { data, records })
}
