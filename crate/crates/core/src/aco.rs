//! Ant System and Max-Min Ant System for the orienteering problem, with
//! optional injection of predicted edge probabilities.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Prediction;
use crate::features::COST_FLOOR;
use crate::instance::{Instance, Route};
use crate::local_search::greedy_route;
use crate::rng;

pub use crate::local_search::two_opt_improve;

/// Lower bound on predicted probabilities before they enter `eta` or `tau`.
pub const ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AcoError {
    #[error("integration mode {0:?} needs a prediction")]
    MissingPrediction(Integration),
    #[error("integration mode none takes no prediction")]
    UnexpectedPrediction,
    #[error("prediction covers {got} vertices, instance has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("best objective must be positive, got {0}")]
    InvalidObjective(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    As,
    Mmas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    IterationBest,
    GlobalBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    None,
    Eta,
    EtaHat,
    TauSeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ConstructionBudget,
    /// Stop after this many consecutive iterations without improvement.
    NoImprove(usize),
}

/// Amount an MMAS update route deposits on each of its edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Deposit {
    /// `1 / y` of the depositing route.
    Paper,
    /// `y / y_gb^2`: equal to `1 / y_gb` for the global best, smaller for worse routes.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub delta: f64,
    pub t_pts: usize,
    /// AS deposit constant is `c_scale * y_best`.
    pub c_scale: f64,
    pub ants: usize,
    /// Total number of constructed routes.
    pub budget: usize,
    pub update_rule: UpdateRule,
    pub integration: Integration,
    pub seed: u64,
    pub termination: Termination,
    pub local_search: bool,
    pub deposit: Deposit,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Mmas,
            alpha: 1.0,
            beta: 1.0,
            rho: 0.05,
            delta: 0.5,
            t_pts: 100,
            c_scale: 100.0,
            ants: 0,
            budget: 0,
            update_rule: UpdateRule::IterationBest,
            integration: Integration::None,
            seed: 0,
            termination: Termination::ConstructionBudget,
            local_search: false,
            deposit: Deposit::Paper,
        }
    }
}

impl AcoConfig {
    /// Standard settings for an `n`-vertex instance: `100n` ants for AS, `n`
    /// for MMAS, `1000n` constructions.
    pub fn new(variant: Variant, n: usize) -> Self {
        Self {
            variant,
            ants: match variant {
                Variant::As => 100 * n,
                Variant::Mmas => n,
            },
            budget: 1000 * n,
            ..Self::default()
        }
    }

    /// MMAS with `eta_hat`, 50 ants, global-best updates, 2-opt and a
    /// 200-iteration no-improvement stop.
    pub fn sota(n: usize) -> Self {
        Self {
            ants: 50,
            update_rule: UpdateRule::GlobalBest,
            integration: Integration::EtaHat,
            termination: Termination::NoImprove(200),
            local_search: true,
            ..Self::new(Variant::Mmas, n)
        }
    }

    pub fn with_integration(mut self, integration: Integration) -> Self {
        self.integration = integration;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<(), AcoError> {
        let bad = |what: String| Err(AcoError::InvalidConfig(what));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {}", self.beta));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho = {} outside (0, 1)", self.rho));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta = {} outside [0, 1]", self.delta));
        }
        if !(self.c_scale > 0.0) {
            return bad(format!("c_scale = {}", self.c_scale));
        }
        if self.ants == 0 {
            return bad("ants = 0".into());
        }
        if self.ants >= 1 << 32 {
            return bad(format!("ants = {}", self.ants));
        }
        Ok(())
    }
}

/// The evolving model: pheromone `tau`, heuristic `eta`, MMAS bounds and the
/// cached transition weights `tau^alpha * eta^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneState {
    n: usize,
    tau: Vec<f64>,
    eta: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
    pub tau_max: f64,
    pub tau_min: f64,
    /// Iterations since the global best last improved.
    pub stagnation: usize,
    /// Best objective seen so far; 0 before the first iteration.
    pub y_best: f64,
    /// Floored predictions kept for `tau_seed` re-initialization.
    seed_p: Option<Vec<f64>>,
    /// `c(j, end)` for every `j`.
    to_end: Vec<f64>,
}

impl PheromoneState {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn tau(&self, i: usize, j: usize) -> f64 {
        self.tau[i * self.n + j]
    }

    #[inline]
    pub fn eta(&self, i: usize, j: usize) -> f64 {
        self.eta[i * self.n + j]
    }

    /// Transition weight `tau_ij^alpha * eta_ij^beta`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Off-diagonal `tau` values.
    pub fn tau_values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.tau
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &t)| t)
    }

    /// Replaces `tau` (row-major `n x n`) and refreshes the weights.
    pub fn set_tau(&mut self, tau: Vec<f64>) {
        assert_eq!(tau.len(), self.n * self.n);
        self.tau = tau;
        self.refresh();
    }

    fn refresh(&mut self) {
        let (a, b) = (self.alpha, self.beta);
        let pow = |x: f64, e: f64| {
            if e == 1.0 {
                x
            } else if e == 0.0 {
                1.0
            } else {
                x.powf(e)
            }
        };
        for ((w, &t), &e) in self.weights.iter_mut().zip(&self.tau).zip(&self.eta) {
            *w = pow(t, a) * pow(e, b);
        }
    }

    fn evaporate(&mut self, rho: f64) {
        let keep = 1.0 - rho;
        self.tau.iter_mut().for_each(|t| *t *= keep);
    }

    fn clamp(&mut self) {
        let (lo, hi) = (self.tau_min, self.tau_max);
        self.tau.iter_mut().for_each(|t| *t = t.clamp(lo, hi));
    }

    fn set_bounds(&mut self, rho: f64, y: f64) {
        self.tau_max = 1.0 / (rho * y);
        self.tau_min = self.tau_max / (2.0 * self.n as f64);
    }

    /// `tau` from the kept predictions, min-max rescaled into
    /// `[tau_min, tau_max]`; constant predictions map to the midpoint.
    fn reseed(&mut self) {
        let Some(p) = &self.seed_p else { return };
        let n = self.n;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, &v) in p.iter().enumerate() {
            if k / n != k % n {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let (tmin, tmax) = (self.tau_min, self.tau_max);
        let range = hi - lo;
        if !(range > 0.0) {
            log::debug!("constant prediction; tau seeded at the bound midpoint");
        }
        for (t, &v) in self.tau.iter_mut().zip(p) {
            *t = if range > 0.0 {
                (tmin + (v - lo) / range * (tmax - tmin)).clamp(tmin, tmax)
            } else {
                0.5 * (tmin + tmax)
            };
        }
    }
}

/// `s_j / c_ij` with costs floored away from zero.
fn score_heuristic(inst: &Instance, i: usize, j: usize) -> f64 {
    inst.score(j) / inst.cost(i, j).max(COST_FLOOR)
}

pub fn init_model(
    inst: &Instance,
    config: &AcoConfig,
    pred: Option<&Prediction>,
) -> Result<PheromoneState, AcoError> {
    config.validate()?;
    let n = inst.n();
    let pred = match (config.integration, pred) {
        (Integration::None, None) => None,
        (Integration::None, Some(_)) => return Err(AcoError::UnexpectedPrediction),
        (mode, None) => return Err(AcoError::MissingPrediction(mode)),
        (_, Some(p)) if p.n() != n => {
            return Err(AcoError::DimensionMismatch {
                got: p.n(),
                expected: n,
            })
        }
        (_, Some(p)) => Some(p),
    };
    let floored = |i: usize, j: usize| pred.map_or(1.0, |p| p.get(i, j).max(ETA_FLOOR));

    let mut eta = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                eta[i * n + j] = match config.integration {
                    Integration::None | Integration::TauSeed => score_heuristic(inst, i, j),
                    Integration::Eta => floored(i, j),
                    Integration::EtaHat => floored(i, j) * score_heuristic(inst, i, j),
                };
            }
        }
    }
    let seed_p = (config.integration == Integration::TauSeed).then(|| {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[i * n + j] = floored(i, j);
                }
            }
        }
        p
    });

    let mut state = PheromoneState {
        n,
        tau: vec![1.0; n * n],
        eta,
        weights: vec![0.0; n * n],
        alpha: config.alpha,
        beta: config.beta,
        tau_max: f64::INFINITY,
        tau_min: 0.0,
        stagnation: 0,
        y_best: 0.0,
        seed_p,
        to_end: (0..n).map(|j| inst.cost(j, inst.end())).collect(),
    };
    match config.variant {
        Variant::As => {
            if let Some(p) = &state.seed_p {
                state.tau = p.clone();
            }
        }
        Variant::Mmas => {
            let estimate = greedy_route(inst).objective;
            state.set_bounds(config.rho, if estimate > 0.0 { estimate } else { 1.0 });
            state.tau.iter_mut().for_each(|t| *t = state.tau_max);
            state.reseed();
        }
    }
    state.refresh();
    Ok(state)
}

/// Index of the first positive weight whose cumulative sum `cum` reaches `r`.
fn roulette(cum: &[f64], r: f64) -> Option<usize> {
    let total = *cum.last()?;
    if !(total > 0.0) {
        return None;
    }
    let mut k = cum.partition_point(|&c| c < r).min(cum.len() - 1);
    // only a leading run of zero weights can satisfy r <= cum[k] with w_k = 0
    while cum[k] <= 0.0 {
        k += 1;
    }
    Some(k)
}

/// Builds one route from the start vertex, drawing each next vertex among
/// those that still leave time to reach the end.
pub fn construct<R: Rng + ?Sized>(
    inst: &Instance,
    state: &PheromoneState,
    _config: &AcoConfig,
    rng: &mut R,
) -> Route {
    let (start, end, t_max) = (inst.start(), inst.end(), inst.t_max());
    let metric = inst.is_metric();
    let mut candidates: Vec<usize> = (0..inst.n()).filter(|&v| v != start && v != end).collect();
    let mut cum: Vec<f64> = Vec::with_capacity(candidates.len());
    let mut feasible: Vec<usize> = Vec::with_capacity(candidates.len());
    let to_end = &state.to_end;
    let mut vertices = vec![start];
    let mut cur = start;
    let mut used = 0.0;
    loop {
        cum.clear();
        feasible.clear();
        let mut total = 0.0;
        let row = inst.cost_row(cur);
        let w_row = &state.weights[cur * state.n..(cur + 1) * state.n];
        for &j in &candidates {
            if used + row[j] + to_end[j] <= t_max {
                feasible.push(j);
                total += w_row[j];
                cum.push(total);
            }
        }
        if feasible.is_empty() {
            break;
        }
        let pick = if total > 0.0 && total.is_finite() {
            roulette(&cum, rng.gen::<f64>() * total).expect("positive total")
        } else {
            log::trace!("all transition weights zero at vertex {cur}; choosing uniformly");
            rng.gen_range(0..feasible.len())
        };
        let next = feasible[pick];
        used += row[next];
        vertices.push(next);
        cur = next;
        if metric {
            // by the triangle inequality an unreachable vertex stays unreachable
            std::mem::swap(&mut candidates, &mut feasible);
            candidates.retain(|&v| v != next);
        } else {
            candidates.retain(|&v| v != next);
        }
    }
    vertices.push(end);
    Route::new(inst, vertices)
}

fn deposit_edges(state: &mut PheromoneState, route: &Route, amount: f64) {
    let n = state.n;
    for (i, j) in route.edges() {
        state.tau[i * n + j] += amount;
    }
}

/// Evaporates and lets every route deposit `y_k / C`, `C = c_scale * y_best`.
pub fn update_as(state: &mut PheromoneState, routes: &[Route], objectives: &[f64], config: &AcoConfig) {
    state.evaporate(config.rho);
    let y_best = objectives.iter().copied().fold(state.y_best, f64::max);
    state.y_best = y_best;
    let c = config.c_scale * y_best;
    if c > 0.0 {
        for (route, &y) in routes.iter().zip(objectives) {
            deposit_edges(state, route, y / c);
        }
    }
    state.refresh();
}

/// Evaporates, deposits along `best_route`, recomputes the bounds from the
/// global best and clamps every `tau` into them.
pub fn update_mmas(
    state: &mut PheromoneState,
    best_route: &Route,
    y_best: f64,
    config: &AcoConfig,
) -> Result<(), AcoError> {
    if !(y_best > 0.0) || !y_best.is_finite() {
        return Err(AcoError::InvalidObjective(y_best));
    }
    state.y_best = state.y_best.max(y_best);
    let y_gb = state.y_best;
    state.evaporate(config.rho);
    let amount = match config.deposit {
        Deposit::Paper => 1.0 / y_best,
        Deposit::Proportional => y_best / (y_gb * y_gb),
    };
    deposit_edges(state, best_route, amount);
    state.set_bounds(config.rho, y_gb);
    state.clamp();
    state.refresh();
    Ok(())
}

/// Pushes `tau` toward `tau_max` by `delta`, or re-seeds it from the
/// prediction in `tau_seed` mode; resets the stagnation counter. AS has no
/// upper bound and is left untouched.
pub fn smooth(state: &mut PheromoneState, config: &AcoConfig, pred: Option<&Prediction>) {
    state.stagnation = 0;
    if config.variant != Variant::Mmas {
        return;
    }
    if config.integration == Integration::TauSeed {
        if let Some(p) = pred {
            if p.n() == state.n {
                let n = state.n;
                let mut seed = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            seed[i * n + j] = p.get(i, j).max(ETA_FLOOR);
                        }
                    }
                }
                state.seed_p = Some(seed);
            }
        }
        state.reseed();
    } else {
        let (hi, d) = (state.tau_max, config.delta);
        state.tau.iter_mut().for_each(|t| *t = (*t + d * (hi - *t)).min(hi));
    }
    state.refresh();
}

/// Convergence record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    /// `(constructions so far, best objective so far)` after every iteration.
    pub checkpoints: Vec<(usize, f64)>,
    pub best: Route,
    pub wall_time: f64,
}

impl RunTrace {
    pub fn best_objective(&self) -> f64 {
        self.best.objective
    }

    /// Best objective after the first iteration.
    pub fn first_iteration_best(&self) -> f64 {
        self.checkpoints.first().map_or(0.0, |c| c.1)
    }

    pub fn constructions(&self) -> usize {
        self.checkpoints.last().map_or(0, |c| c.0)
    }

    /// Best objective once `constructions` routes have been built.
    pub fn best_at(&self, constructions: usize) -> Option<f64> {
        let k = self.checkpoints.partition_point(|c| c.0 <= constructions);
        (k > 0).then(|| self.checkpoints[k - 1].1)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["constructions", "best_objective"])?;
        for (c, y) in &self.checkpoints {
            w.write_record([c.to_string(), y.to_string()])?;
        }
        w.flush()
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<(usize, f64)>, csv::Error> {
        let mut r = csv::Reader::from_reader(input);
        r.deserialize::<(usize, f64)>().collect()
    }
}

/// Runs the colony until the construction budget is spent or, with
/// no-improvement termination, the best has been flat for `T` iterations.
pub fn run(inst: &Instance, config: &AcoConfig, pred: Option<&Prediction>) -> Result<RunTrace, AcoError> {
    let began = Instant::now();
    let mut state = init_model(inst, config, pred)?;
    if config.budget == 0 {
        return Err(AcoError::InvalidConfig("construction budget 0".into()));
    }
    let mut best: Option<Route> = None;
    let mut checkpoints = Vec::new();
    let mut constructions = 0usize;
    let mut flat = 0usize;
    let mut iteration = 0u64;
    while constructions < config.budget {
        let k = config.ants.min(config.budget - constructions);
        let mut routes: Vec<Route> = (0..k as u64)
            .into_par_iter()
            .map(|a| construct(inst, &state, config, &mut rng::ant_stream(config.seed, iteration, a)))
            .collect();
        constructions += k;
        let mut ib = 0;
        for (a, r) in routes.iter().enumerate() {
            if r.objective > routes[ib].objective {
                ib = a;
            }
        }
        if config.local_search {
            let improved = two_opt_improve(inst, &routes[ib]);
            if improved.objective > routes[ib].objective
                || (improved.objective == routes[ib].objective && improved.cost < routes[ib].cost)
            {
                routes[ib] = improved;
            }
        }
        let y_ib = routes[ib].objective;
        let improved = best.as_ref().map_or(true, |b| y_ib > b.objective);
        if improved {
            best = Some(routes[ib].clone());
            state.stagnation = 0;
            flat = 0;
        } else {
            state.stagnation += 1;
            flat += 1;
        }
        let gb = best.as_ref().expect("set in first iteration");

        match config.variant {
            Variant::As => {
                let objectives: Vec<f64> = routes.iter().map(|r| r.objective).collect();
                update_as(&mut state, &routes, &objectives, config);
            }
            Variant::Mmas => {
                let chosen = match config.update_rule {
                    UpdateRule::IterationBest => &routes[ib],
                    UpdateRule::GlobalBest => gb,
                };
                if chosen.objective > 0.0 {
                    update_mmas(&mut state, chosen, chosen.objective, config)?;
                } else {
                    state.evaporate(config.rho);
                    state.clamp();
                    state.refresh();
                }
                if state.stagnation >= config.t_pts {
                    smooth(&mut state, config, pred);
                }
            }
        }
        checkpoints.push((constructions, gb.objective));
        iteration += 1;
        if let Termination::NoImprove(limit) = config.termination {
            if flat >= limit {
                break;
            }
        }
    }
    Ok(RunTrace {
        checkpoints,
        best: best.expect("at least one iteration"),
        wall_time: began.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_random, CostRounding, GeneratorConfig};

    fn line(scores: Vec<f64>, t_max: f64) -> Instance {
        let n = scores.len();
        let coords = (0..n).map(|k| [k as f64, 0.0]).collect();
        Instance::from_coords("line", coords, scores, t_max, 0, n - 1, CostRounding::ExactEuclidean)
            .unwrap()
    }

    fn mmas(n: usize) -> AcoConfig {
        AcoConfig::new(Variant::Mmas, n)
    }

    #[test]
    fn heuristic_is_score_over_cost() {
        let coords = vec![[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]];
        let inst = Instance::from_coords(
            "h",
            coords,
            vec![0.0, 10.0, 0.0],
            100.0,
            0,
            2,
            CostRounding::ExactEuclidean,
        )
        .unwrap();
        let state = init_model(&inst, &mmas(3), None).unwrap();
        assert_eq!(state.eta(0, 1), 5.0);
    }

    #[test]
    fn unit_prediction_leaves_eta_hat_equal_to_none() {
        let inst = generate_random(&GeneratorConfig::new(12), 1).unwrap();
        let plain = init_model(&inst, &mmas(12), None).unwrap();
        let cfg = mmas(12).with_integration(Integration::EtaHat);
        let hat = init_model(&inst, &cfg, Some(&Prediction::constant(12, 1.0))).unwrap();
        assert_eq!(plain.eta, hat.eta);
    }

    #[test]
    fn eta_mode_floors_predictions() {
        let inst = generate_random(&GeneratorConfig::new(6), 1).unwrap();
        let cfg = mmas(6).with_integration(Integration::Eta);
        let state = init_model(&inst, &cfg, Some(&Prediction::constant(6, 0.0))).unwrap();
        assert!(state.tau_values().count() == 30);
        assert_eq!(state.eta(1, 2), ETA_FLOOR);
    }

    #[test]
    fn constant_prediction_seeds_the_midpoint() {
        let inst = generate_random(&GeneratorConfig::new(10), 2).unwrap();
        let cfg = mmas(10).with_integration(Integration::TauSeed);
        let state = init_model(&inst, &cfg, Some(&Prediction::constant(10, 0.3))).unwrap();
        let mid = 0.5 * (state.tau_min + state.tau_max);
        assert!(state.tau_values().all(|t| t == mid));
    }

    #[test]
    fn tau_seed_spans_the_bounds() {
        let inst = generate_random(&GeneratorConfig::new(10), 2).unwrap();
        let n = 10;
        let p: Vec<f64> = (0..n * n).map(|k| ((k * 37) % 100) as f64 / 100.0).collect();
        let cfg = mmas(n).with_integration(Integration::TauSeed);
        let state = init_model(&inst, &cfg, Some(&Prediction::from_matrix(n, p, "t"))).unwrap();
        let lo = state.tau_values().fold(f64::INFINITY, f64::min);
        let hi = state.tau_values().fold(0.0, f64::max);
        assert!((lo - state.tau_min).abs() < 1e-15 && (hi - state.tau_max).abs() < 1e-15);
    }

    #[test]
    fn tau_seed_matches_eta_hat_for_ant_system() {
        let inst = generate_random(&GeneratorConfig::new(9), 4).unwrap();
        let n = 9;
        let p: Vec<f64> = (0..n * n).map(|k| 0.05 + ((k * 13) % 17) as f64 / 20.0).collect();
        let pred = Prediction::from_matrix(n, p, "t");
        let base = AcoConfig::new(Variant::As, n);
        let seeded = init_model(&inst, &base.clone().with_integration(Integration::TauSeed), Some(&pred))
            .unwrap();
        let hat = init_model(&inst, &base.with_integration(Integration::EtaHat), Some(&pred)).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let (a, b) = (seeded.weight(i, j), hat.weight(i, j));
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn prediction_presence_must_match_mode() {
        let inst = generate_random(&GeneratorConfig::new(5), 0).unwrap();
        let cfg = mmas(5).with_integration(Integration::Eta);
        assert_eq!(
            init_model(&inst, &cfg, None).unwrap_err(),
            AcoError::MissingPrediction(Integration::Eta)
        );
        assert_eq!(
            init_model(&inst, &mmas(5), Some(&Prediction::constant(5, 0.5))).unwrap_err(),
            AcoError::UnexpectedPrediction
        );
        assert!(matches!(
            init_model(&inst, &cfg, Some(&Prediction::constant(6, 0.5))),
            Err(AcoError::DimensionMismatch { got: 6, expected: 5 })
        ));
    }

    #[test]
    fn roulette_prefers_lower_index_on_boundaries() {
        assert_eq!(roulette(&[1.0, 2.0], 1.0), Some(0));
        assert_eq!(roulette(&[0.0, 2.0, 3.0], 0.0), Some(1));
        assert_eq!(roulette(&[1.0, 1.0, 2.0], 1.5), Some(2));
        assert_eq!(roulette(&[1.0, 1.0, 2.0], 2.0), Some(2));
        assert_eq!(roulette(&[0.0, 0.0], 0.0), None);
    }

    #[test]
    fn zero_eta_vertex_is_never_chosen() {
        // vertex 2 scores 0, so eta(i, 2) = 0 and only vertex 1 can follow the start
        let inst = line(vec![0.0, 5.0, 0.0, 5.0, 0.0], 4.0);
        let state = init_model(&inst, &mmas(5), None).unwrap();
        for seed in 0..200 {
            let r = construct(&inst, &state, &mmas(5), &mut rng::stream(seed, 0));
            assert_ne!(r.vertices[1], 2);
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let inst = line(vec![0.0, 0.0, 0.0, 0.0], 3.0);
        let state = init_model(&inst, &mmas(4), None).unwrap();
        let mut seen = [0usize; 4];
        for seed in 0..400 {
            let r = construct(&inst, &state, &mmas(4), &mut rng::stream(seed, 0));
            assert_eq!(inst.feasible(&r), Ok(true));
            seen[r.vertices[1]] += 1;
        }
        assert!(seen[1] > 100 && seen[2] > 100);
    }

    #[test]
    fn as_update_without_deposits_scales_by_retention() {
        let inst = generate_random(&GeneratorConfig::new(8), 3).unwrap();
        let cfg = AcoConfig::new(Variant::As, 8);
        let mut state = init_model(&inst, &cfg, None).unwrap();
        update_as(&mut state, &[], &[], &cfg);
        assert!(state.tau_values().all(|t| t == 0.95));
    }

    #[test]
    fn as_deposit_is_objective_over_c() {
        let inst = line(vec![0.0, 4.0, 6.0, 0.0], 10.0);
        let cfg = AcoConfig::new(Variant::As, 4);
        let mut state = init_model(&inst, &cfg, None).unwrap();
        let route = Route::new(&inst, vec![0, 1, 2, 3]);
        update_as(&mut state, &[route.clone()], &[10.0], &cfg);
        assert!((state.tau(0, 1) - 0.96).abs() < 1e-15);
        assert_eq!(state.tau(1, 0), 0.95);
        update_as(&mut state, &[route.clone(), route], &[10.0, 10.0], &cfg);
        assert!((state.tau(1, 2) - (0.96 * 0.95 + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn as_with_zero_evaporation_is_bit_identical() {
        let inst = generate_random(&GeneratorConfig::new(7), 8).unwrap();
        let mut cfg = AcoConfig::new(Variant::As, 7);
        cfg.rho = f64::MIN_POSITIVE;
        let mut state = init_model(&inst, &cfg, None).unwrap();
        let before = state.clone();
        update_as(&mut state, &[], &[], &cfg);
        assert_eq!(state.tau, before.tau);
    }

    #[test]
    fn mmas_bounds_follow_best_objective() {
        let inst = generate_random(&GeneratorConfig::new(50), 5).unwrap();
        let cfg = mmas(50);
        let mut state = init_model(&inst, &cfg, None).unwrap();
        let r = inst.trivial_route();
        update_mmas(&mut state, &r, 100.0, &cfg).unwrap();
        assert!((state.tau_max - 0.2).abs() < 1e-15);
        assert!((state.tau_min - 0.002).abs() < 1e-15);
        assert!(state.tau_values().all(|t| t >= state.tau_min && t <= state.tau_max));
        assert_eq!(
            update_mmas(&mut state, &r, 0.0, &cfg),
            Err(AcoError::InvalidObjective(0.0))
        );
    }

    #[test]
    fn smoothing_interpolates_toward_the_upper_bound() {
        let inst = generate_random(&GeneratorConfig::new(6), 5).unwrap();
        let mut cfg = mmas(6);
        let mut state = init_model(&inst, &cfg, None).unwrap();
        state.tau_max = 0.2;
        state.tau_min = 0.01;
        state.set_tau(vec![0.1; 36]);
        cfg.delta = 0.5;
        smooth(&mut state, &cfg, None);
        assert!(state.tau_values().all(|t| (t - 0.15).abs() < 1e-15));
        cfg.delta = 0.0;
        smooth(&mut state, &cfg, None);
        assert!(state.tau_values().all(|t| (t - 0.15).abs() < 1e-15));
        cfg.delta = 1.0;
        state.stagnation = 7;
        smooth(&mut state, &cfg, None);
        assert!(state.tau_values().all(|t| t == 0.2));
        assert_eq!(state.stagnation, 0);
    }

    #[test]
    fn single_iteration_budget() {
        let inst = generate_random(&GeneratorConfig::new(20), 6).unwrap();
        let cfg = mmas(20).with_budget(20);
        let trace = run(&inst, &cfg, None).unwrap();
        assert_eq!(trace.checkpoints.len(), 1);
        assert_eq!(trace.checkpoints[0], (20, trace.best.objective));
    }

    #[test]
    fn runs_are_reproducible_and_monotone() {
        let inst = generate_random(&GeneratorConfig::new(25), 7).unwrap();
        for variant in [Variant::As, Variant::Mmas] {
            let mut cfg = AcoConfig::new(variant, 25).with_seed(3).with_budget(3000);
            cfg.ants = 25;
            cfg.t_pts = 5;
            let a = run(&inst, &cfg, None).unwrap();
            let b = run(&inst, &cfg, None).unwrap();
            assert_eq!(a.checkpoints, b.checkpoints);
            assert_eq!(a.best, b.best);
            assert!(a.checkpoints.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(inst.feasible(&a.best), Ok(true));
            assert_eq!(a.constructions(), 3000);
        }
    }

    #[test]
    fn no_improve_termination_stops_early() {
        let inst = generate_random(&GeneratorConfig::new(15), 9).unwrap();
        let mut cfg = AcoConfig::sota(15).with_integration(Integration::None).with_budget(1_000_000);
        cfg.termination = Termination::NoImprove(10);
        let trace = run(&inst, &cfg, None).unwrap();
        assert!(trace.constructions() < 1_000_000);
        let k = trace.checkpoints.len();
        assert!(k > 10);
        let last = trace.checkpoints[k - 1].1;
        assert!(trace.checkpoints[k - 11..].iter().all(|c| c.1 == last));
    }

    #[test]
    fn trace_csv_round_trip() {
        let inst = generate_random(&GeneratorConfig::new(10), 1).unwrap();
        let trace = run(&inst, &mmas(10).with_budget(50), None).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("constructions,best_objective\n"));
        assert_eq!(RunTrace::read_csv(&buf[..]).unwrap(), trace.checkpoints);
        assert_eq!(trace.best_at(9), None);
        assert_eq!(trace.best_at(10), Some(trace.checkpoints[0].1));
    }
}
