//! Route improvement by 2-opt segment reversal and greedy vertex insertion.

use crate::features::COST_FLOOR;
use crate::instance::{Instance, Route};

/// Alternates 2-opt (until no reversal shortens the route) with insertion
/// of the unvisited vertex of best score-to-extra-cost ratio, stopping when
/// nothing fits. Objective never decreases and the budget is never exceeded.
pub fn two_opt_improve(inst: &Instance, route: &Route) -> Route {
    let mut vertices = route.vertices.clone();
    let mut in_route = vec![false; inst.n()];
    for &v in &vertices {
        in_route[v] = true;
    }
    let mut cost = inst.path_cost(&vertices);
    loop {
        cost += two_opt(inst, &mut vertices);
        match best_insertion(inst, &vertices, &in_route, inst.t_max() - cost) {
            Some((v, pos, extra)) => {
                vertices.insert(pos, v);
                in_route[v] = true;
                cost += extra;
            }
            None => break,
        }
    }
    let improved = Route::new(inst, vertices);
    debug_assert!(improved.cost <= inst.t_max() || improved.cost <= route.cost);
    improved
}

/// Applies improving reversals until none is left; returns the cost change.
pub fn two_opt(inst: &Instance, vertices: &mut [usize]) -> f64 {
    let len = vertices.len();
    if len < 4 {
        return 0.0;
    }
    let symmetric = inst.is_symmetric();
    let mut total = 0.0;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..len - 2 {
            for j in i + 1..len - 1 {
                let delta = if symmetric {
                    let (a, b) = (vertices[i - 1], vertices[j + 1]);
                    let (vi, vj) = (vertices[i], vertices[j]);
                    inst.cost(a, vj) + inst.cost(vi, b) - inst.cost(a, vi) - inst.cost(vj, b)
                } else {
                    let before = inst.path_cost(&vertices[i - 1..=j + 1]);
                    vertices[i..=j].reverse();
                    let after = inst.path_cost(&vertices[i - 1..=j + 1]);
                    vertices[i..=j].reverse();
                    after - before
                };
                if delta < -1e-9 {
                    vertices[i..=j].reverse();
                    total += delta;
                    improved = true;
                }
            }
        }
    }
    total
}

/// Unvisited vertex with positive score maximizing score per extra cost
/// among those fitting in `slack`, with its cheapest position.
fn best_insertion(
    inst: &Instance,
    vertices: &[usize],
    in_route: &[bool],
    slack: f64,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(f64, f64, usize, usize, f64)> = None;
    for v in inst.intermediates() {
        let s = inst.score(v);
        if in_route[v] || s <= 0.0 {
            continue;
        }
        let mut cheapest: Option<(f64, usize)> = None;
        for k in 0..vertices.len() - 1 {
            let (a, b) = (vertices[k], vertices[k + 1]);
            let extra = inst.cost(a, v) + inst.cost(v, b) - inst.cost(a, b);
            if cheapest.map_or(true, |(c, _)| extra < c) {
                cheapest = Some((extra, k + 1));
            }
        }
        let Some((extra, pos)) = cheapest else { continue };
        if extra > slack {
            continue;
        }
        let ratio = s / extra.max(COST_FLOOR);
        let better = match best {
            None => true,
            Some((r, bs, ..)) => ratio > r || (ratio == r && s > bs),
        };
        if better {
            best = Some((ratio, s, v, pos, extra));
        }
    }
    best.map(|(_, _, v, pos, extra)| (v, pos, extra))
}

/// Greedy ratio insertion from the trivial route, followed by
/// [`two_opt_improve`].
pub fn greedy_route(inst: &Instance) -> Route {
    two_opt_improve(inst, &inst.trivial_route())
}
