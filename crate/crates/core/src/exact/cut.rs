//! LP-bounded branch and cut for symmetric instances.
//!
//! The route is modelled as a cycle through the start (an open route is
//! closed by an implicit end-to-start edge) with vertex variables `y` and
//! undirected edge variables `x`. Degree equations and the budget row are
//! stated up front; `x_e <= y_v` and subtour cuts
//! `x(delta(S)) >= 2 y_v` are separated lazily. Nodes are explored depth
//! first, fixing the most fractional variable to 1 before 0.

use std::time::{Duration, Instant};

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};

use crate::instance::{Instance, Route};
use crate::local_search::two_opt_improve;

const EPS: f64 = 1e-6;
const MAX_CUTS_PER_ROUND: usize = 60;

pub(super) struct CutOutcome {
    pub best: Route,
    pub nodes: u64,
    pub proved: bool,
    pub trace: Vec<(f64, f64)>,
}

struct Cut {
    terms: Vec<(Variable, f64)>,
    op: ComparisonOp,
    rhs: f64,
}

struct Model<'a> {
    inst: &'a Instance,
    closed: bool,
    /// Graph vertices: start first, then (if open) end, then usable intermediates.
    verts: Vec<usize>,
    roots: usize,
    /// Vertex variable per graph vertex; `None` for roots.
    y: Vec<Option<Variable>>,
    edges: Vec<(usize, usize)>,
    x: Vec<Variable>,
    constant: f64,
}

impl<'a> Model<'a> {
    fn build(inst: &'a Instance) -> (Self, Problem) {
        let (s, t, t_max) = (inst.start(), inst.end(), inst.t_max());
        let closed = inst.is_closed();
        let metric = inst.is_metric();
        let mut verts = vec![s];
        if !closed {
            verts.push(t);
        }
        let roots = verts.len();
        verts.extend(
            inst.intermediates()
                .filter(|&v| inst.cost(s, v) + inst.cost(v, t) <= t_max),
        );
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let y: Vec<Option<Variable>> = verts
            .iter()
            .enumerate()
            .map(|(a, &v)| (a >= roots).then(|| lp.add_var(inst.score(v), (0.0, 1.0))))
            .collect();
        let usable = |i: usize, j: usize| {
            !metric
                || inst.cost(s, i) + inst.cost(i, j) + inst.cost(j, t) <= t_max
                || inst.cost(s, j) + inst.cost(j, i) + inst.cost(i, t) <= t_max
        };
        let mut edges = Vec::new();
        let mut x = Vec::new();
        for a in 0..verts.len() {
            for b in a + 1..verts.len() {
                // the end-to-start edge is implicit for open routes
                if !closed && a < roots && b < roots {
                    continue;
                }
                if usable(verts[a], verts[b]) {
                    edges.push((a, b));
                    x.push(lp.add_var(0.0, (0.0, 1.0)));
                }
            }
        }
        for a in 0..verts.len() {
            let mut row = LinearExpr::empty();
            for (e, &(p, q)) in edges.iter().enumerate() {
                if p == a || q == a {
                    row.add(x[e], 1.0);
                }
            }
            match y[a] {
                Some(yv) => {
                    row.add(yv, -2.0);
                    lp.add_constraint(row, ComparisonOp::Eq, 0.0);
                }
                None => {
                    let degree = if closed { 2.0 } else { 1.0 };
                    lp.add_constraint(row, ComparisonOp::Eq, degree);
                }
            }
        }
        let mut budget = LinearExpr::empty();
        for (e, &(p, q)) in edges.iter().enumerate() {
            budget.add(x[e], inst.cost(verts[p], verts[q]));
        }
        lp.add_constraint(budget, ComparisonOp::Le, t_max);
        let constant = inst.score(s) + if closed { 0.0 } else { inst.score(t) };
        let model = Model {
            inst,
            closed,
            verts,
            roots,
            y,
            edges,
            x,
            constant,
        };
        (model, lp)
    }

    fn y_value(&self, sol: &Solution, a: usize) -> f64 {
        self.y[a].map_or(1.0, |v| sol[v])
    }

    /// Violated `x_e <= y_v` rows and subtour cuts, most violated first.
    fn separate(&self, sol: &Solution) -> Vec<Cut> {
        let mut found: Vec<(f64, Cut)> = Vec::new();
        for (e, &(p, q)) in self.edges.iter().enumerate() {
            let xe = sol[self.x[e]];
            for a in [p, q] {
                if let Some(yv) = self.y[a] {
                    let viol = xe - sol[yv];
                    if viol > EPS {
                        found.push((
                            viol,
                            Cut {
                                terms: vec![(self.x[e], 1.0), (yv, -1.0)],
                                op: ComparisonOp::Le,
                                rhs: 0.0,
                            },
                        ));
                    }
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        found.truncate(MAX_CUTS_PER_ROUND / 2);
        let mut cuts: Vec<Cut> = found.into_iter().map(|(_, c)| c).collect();
        cuts.extend(self.subtour_cuts(sol));
        cuts
    }

    fn subtour_cuts(&self, sol: &Solution) -> Vec<Cut> {
        let m = self.verts.len();
        let mut cap = vec![0.0; m * m];
        for (e, &(p, q)) in self.edges.iter().enumerate() {
            let xe = sol[self.x[e]];
            if xe > 1e-9 {
                cap[p * m + q] += xe;
                cap[q * m + p] += xe;
            }
        }
        if self.roots == 2 {
            cap[1] = f64::INFINITY;
            cap[m] = f64::INFINITY;
        }
        let mut order: Vec<usize> = (self.roots..m)
            .filter(|&a| self.y_value(sol, a) > EPS)
            .collect();
        order.sort_by(|&a, &b| self.y_value(sol, b).total_cmp(&self.y_value(sol, a)));
        let mut covered = vec![false; m];
        let mut cuts = Vec::new();
        for v in order {
            if covered[v] || cuts.len() >= MAX_CUTS_PER_ROUND {
                continue;
            }
            let (flow, sink_side) = max_flow(&cap, m, 0, v);
            // strongest variant: the best-covered vertex of the sink side
            let u = (0..m)
                .filter(|&a| sink_side[a])
                .max_by(|&a, &b| self.y_value(sol, a).total_cmp(&self.y_value(sol, b)))
                .unwrap_or(v);
            if flow < 2.0 * self.y_value(sol, u) - EPS {
                let mut terms = Vec::new();
                for (e, &(p, q)) in self.edges.iter().enumerate() {
                    if sink_side[p] != sink_side[q] {
                        terms.push((self.x[e], 1.0));
                    }
                }
                terms.push((self.y[u].expect("sink side excludes roots"), -2.0));
                for a in 0..m {
                    covered[a] |= sink_side[a];
                }
                cuts.push(Cut {
                    terms,
                    op: ComparisonOp::Ge,
                    rhs: 0.0,
                });
            }
        }
        cuts
    }

    fn is_integral(&self, sol: &Solution) -> bool {
        let near = |v: f64| (v - v.round()).abs() <= EPS;
        self.y.iter().flatten().all(|&v| near(sol[v])) && self.x.iter().all(|&v| near(sol[v]))
    }

    /// The route encoded by an integral, subtour-free solution.
    fn extract(&self, sol: &Solution) -> Option<Route> {
        let m = self.verts.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (e, &(p, q)) in self.edges.iter().enumerate() {
            if sol[self.x[e]] > 0.5 {
                adj[p].push(q);
                adj[q].push(p);
            }
        }
        let mut seq = vec![0];
        let mut prev = usize::MAX;
        let mut cur = 0;
        loop {
            let next = adj[cur].iter().copied().filter(|&w| w != prev).min()?;
            if next == 0 || (!self.closed && next == 1) {
                seq.push(next);
                break;
            }
            if seq.len() > m {
                return None;
            }
            seq.push(next);
            prev = cur;
            cur = next;
        }
        let vertices = seq.iter().map(|&a| self.verts[a]).collect();
        Some(Route::new(self.inst, vertices))
    }

    /// Rounds the LP point to a feasible route: insert vertices by
    /// decreasing `y` where they fit, then improve locally.
    fn round(&self, sol: &Solution) -> Route {
        let inst = self.inst;
        let mut order: Vec<usize> = (self.roots..self.verts.len())
            .filter(|&a| self.y_value(sol, a) > 0.05)
            .collect();
        order.sort_by(|&a, &b| {
            self.y_value(sol, b)
                .total_cmp(&self.y_value(sol, a))
                .then(a.cmp(&b))
        });
        let mut vertices = inst.trivial_route().vertices;
        let mut cost = inst.path_cost(&vertices);
        for a in order {
            let v = self.verts[a];
            let mut best: Option<(f64, usize)> = None;
            for k in 0..vertices.len() - 1 {
                let (p, q) = (vertices[k], vertices[k + 1]);
                let extra = inst.cost(p, v) + inst.cost(v, q) - inst.cost(p, q);
                if best.map_or(true, |(c, _)| extra < c) {
                    best = Some((extra, k + 1));
                }
            }
            if let Some((extra, pos)) = best {
                if cost + extra <= inst.t_max() {
                    vertices.insert(pos, v);
                    cost += extra;
                }
            }
        }
        two_opt_improve(inst, &Route::new(inst, vertices))
    }
}

/// Edmonds-Karp on a dense symmetric capacity matrix; returns the flow
/// value and the vertices unreachable from `source` in the residual graph.
fn max_flow(cap: &[f64], m: usize, source: usize, sink: usize) -> (f64, Vec<bool>) {
    let mut flow = vec![0.0; m * m];
    let mut total = 0.0;
    let residual = |flow: &[f64], a: usize, b: usize| cap[a * m + b] - flow[a * m + b];
    loop {
        let mut parent = vec![usize::MAX; m];
        parent[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(a) = queue.pop_front() {
            if a == sink {
                break;
            }
            for b in 0..m {
                if parent[b] == usize::MAX && residual(&flow, a, b) > 1e-9 {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        if parent[sink] == usize::MAX {
            let sink_side = parent.iter().map(|&p| p == usize::MAX).collect();
            return (total, sink_side);
        }
        let mut push = f64::INFINITY;
        let mut b = sink;
        while b != source {
            let a = parent[b];
            push = push.min(residual(&flow, a, b));
            b = a;
        }
        let mut b = sink;
        while b != source {
            let a = parent[b];
            flow[a * m + b] += push;
            flow[b * m + a] -= push;
            b = a;
        }
        total += push;
        if total >= 2.0 {
            // no subtour cut can be violated beyond this value
            return (total, vec![false; m]);
        }
    }
}

struct Search<'a> {
    model: Model<'a>,
    best: Route,
    integral_scores: bool,
    pool: Vec<Cut>,
    nodes: u64,
    began: Instant,
    limit: Duration,
    timed_out: bool,
    trace: Vec<(f64, f64)>,
}

impl Search<'_> {
    fn out_of_time(&mut self) -> bool {
        if !self.timed_out && self.began.elapsed() >= self.limit {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn offer(&mut self, route: Route) {
        if route.objective > self.best.objective
            && self.model.inst.feasible(&route).unwrap_or(false)
        {
            self.trace
                .push((self.began.elapsed().as_secs_f64(), route.objective));
            self.best = route;
        }
    }

    fn pruned(&self, sol: &Solution) -> bool {
        let bound = sol.objective() + self.model.constant;
        if self.integral_scores {
            (bound + EPS).floor() <= self.best.objective
        } else {
            bound <= self.best.objective + 1e-9
        }
    }

    fn add(&self, sol: Solution, cut: &Cut) -> Option<Solution> {
        sol.add_constraint(cut.terms.clone(), cut.op, cut.rhs).ok()
    }

    fn node(&mut self, sol: Solution, mut applied: usize) {
        self.nodes += 1;
        if self.out_of_time() {
            return;
        }
        let mut sol = sol;
        while applied < self.pool.len() {
            sol = match self.add(sol, &self.pool[applied]) {
                Some(s) => s,
                None => return,
            };
            applied += 1;
        }
        loop {
            if self.pruned(&sol) || self.out_of_time() {
                return;
            }
            let cuts = self.model.separate(&sol);
            if cuts.is_empty() {
                break;
            }
            for cut in cuts {
                self.pool.push(cut);
                sol = match self.add(sol, self.pool.last().expect("just pushed")) {
                    Some(s) => s,
                    None => return,
                };
                applied += 1;
            }
        }
        let rounded = self.model.round(&sol);
        self.offer(rounded);
        if self.pruned(&sol) {
            return;
        }
        if self.model.is_integral(&sol) {
            match self.model.extract(&sol) {
                Some(route) if self.model.inst.feasible(&route).unwrap_or(false) => {
                    self.offer(route);
                }
                Some(route) => {
                    // floating-point overrun of the budget: forbid this edge set
                    let mut terms = Vec::new();
                    for (e, &x) in self.model.x.iter().enumerate() {
                        if sol[x] > 0.5 {
                            terms.push((self.model.x[e], 1.0));
                        }
                    }
                    let rhs = terms.len() as f64 - 1.0;
                    log::debug!("cutting off budget-violating tour {:?}", route.vertices);
                    self.pool.push(Cut {
                        terms,
                        op: ComparisonOp::Le,
                        rhs,
                    });
                    self.node(sol, applied);
                }
                None => {}
            }
            return;
        }
        let Some(var) = self.branch_variable(&sol) else {
            return;
        };
        for val in [1.0, 0.0] {
            if let Ok(child) = sol.clone().fix_var(var, val) {
                self.node(child, applied);
            }
            if self.timed_out || self.pruned(&sol) {
                return;
            }
        }
    }

    fn branch_variable(&self, sol: &Solution) -> Option<Variable> {
        let frac = |v: f64| (v - v.floor()).min(v.ceil() - v);
        let model = &self.model;
        let mut best: Option<(f64, f64, Variable)> = None;
        for (a, y) in model.y.iter().enumerate() {
            let Some(y) = *y else { continue };
            let f = frac(sol[y]);
            if f > EPS {
                let score = model.inst.score(model.verts[a]);
                if best.map_or(true, |(bf, bs, _)| f > bf + 1e-9 || (f >= bf - 1e-9 && score > bs)) {
                    best = Some((f, score, y));
                }
            }
        }
        if best.is_some() {
            return best.map(|b| b.2);
        }
        model
            .x
            .iter()
            .map(|&x| (frac(sol[x]), x))
            .filter(|&(f, _)| f > EPS)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, x)| x)
    }
}

pub(super) fn branch_and_cut(
    inst: &Instance,
    incumbent: Route,
    began: Instant,
    limit: Duration,
) -> CutOutcome {
    let (model, lp) = Model::build(inst);
    let integral_scores = inst.scores().iter().all(|s| s.fract() == 0.0);
    let mut search = Search {
        model,
        trace: vec![(began.elapsed().as_secs_f64(), incumbent.objective)],
        best: incumbent,
        integral_scores,
        pool: Vec::new(),
        nodes: 0,
        began,
        limit,
        timed_out: false,
    };
    if search.model.verts.len() > search.model.roots && !search.model.edges.is_empty() {
        match lp.solve() {
            Ok(sol) => search.node(sol, 0),
            Err(e) => log::debug!("root relaxation: {e}"),
        }
    }
    CutOutcome {
        best: search.best,
        nodes: search.nodes,
        proved: !search.timed_out,
        trace: search.trace,
    }
}
