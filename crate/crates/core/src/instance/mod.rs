//! Orienteering-problem instances and routes.
//!
//! An [`Instance`] is a complete directed graph with per-vertex scores, a
//! travel budget and designated start/end vertices. A [`Route`] is a vertex
//! sequence from start to end with its accumulated cost and collected score.
//!
//! Indices are 0-based everywhere in memory and 1-based in every file format.

mod generate;
mod io;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_random, GeneratorConfig};
pub use io::{
    gen3_scores, oplib_gen3_from_tsplib, parse, parse_str, parse_tsplib_tour_problem, write_json,
    write_json_string, write_oplib_string, InstanceFormat, ParseError,
};

/// How travel costs were derived from the source data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostRounding {
    /// Unrounded Euclidean distance.
    ExactEuclidean,
    /// TSPLIB `EUC_2D`: Euclidean distance rounded to the nearest integer.
    #[serde(rename = "tsplib-euc2d")]
    TsplibEuc2d,
    /// TSPLIB `CEIL_2D`: Euclidean distance rounded up.
    #[serde(rename = "tsplib-ceil2d")]
    TsplibCeil2d,
    /// TSPLIB `ATT` pseudo-Euclidean distance.
    TsplibAtt,
    /// TSPLIB `GEO` great-circle distance.
    TsplibGeo,
    /// Costs given explicitly as a matrix.
    Explicit,
}

impl CostRounding {
    /// Distance between two points under this rounding mode.
    ///
    /// Returns `None` for [`CostRounding::Explicit`], which has no coordinate rule.
    pub fn distance(self, a: [f64; 2], b: [f64; 2]) -> Option<f64> {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let euclid = (dx * dx + dy * dy).sqrt();
        match self {
            CostRounding::ExactEuclidean => Some(euclid),
            CostRounding::TsplibEuc2d => Some(nint(euclid)),
            CostRounding::TsplibCeil2d => Some(euclid.ceil()),
            CostRounding::TsplibAtt => {
                let r = ((dx * dx + dy * dy) / 10.0).sqrt();
                let t = nint(r);
                Some(if t < r { t + 1.0 } else { t })
            }
            CostRounding::TsplibGeo => Some(geo_distance(a, b)),
            CostRounding::Explicit => None,
        }
    }
}

fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn geo_radians(x: f64) -> f64 {
    const PI: f64 = 3.141592;
    let deg = x.trunc();
    let min = x - deg;
    PI * (deg + 5.0 * min / 3.0) / 180.0
}

fn geo_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    const RRR: f64 = 6378.388;
    let (lat_a, lon_a) = (geo_radians(a[0]), geo_radians(a[1]));
    let (lat_b, lon_b) = (geo_radians(b[0]), geo_radians(b[1]));
    let q1 = (lon_a - lon_b).cos();
    let q2 = (lat_a - lat_b).cos();
    let q3 = (lat_a + lat_b).cos();
    (RRR * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0).trunc()
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("invalid dimension {0}: an instance needs at least 2 vertices")]
    InvalidDimension(usize),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("vertex index {index} out of range for {n} vertices")]
    VertexOutOfRange { index: usize, n: usize },
    #[error("invalid value for {field}: {value}")]
    InvalidValue { field: String, value: f64 },
    #[error("no feasible route: cost(start, end) = {cost} exceeds budget {t_max}")]
    InfeasibleBudget { cost: f64, t_max: f64 },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(String),
}

/// A complete orienteering-problem graph.
///
/// Immutable after construction; derived properties (symmetry, triangle
/// inequality) are computed once and cached.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    n: usize,
    coords: Option<Vec<[f64; 2]>>,
    cost: Vec<f64>,
    score: Vec<f64>,
    t_max: f64,
    start: usize,
    end: usize,
    rounding: CostRounding,
    symmetric: bool,
    metric: OnceLock<bool>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.n == other.n
            && self.coords == other.coords
            && self.cost == other.cost
            && self.score == other.score
            && self.t_max == other.t_max
            && self.start == other.start
            && self.end == other.end
            && self.rounding == other.rounding
    }
}

impl Instance {
    /// Builds an instance whose costs are derived from planar coordinates.
    pub fn from_coords(
        name: impl Into<String>,
        coords: Vec<[f64; 2]>,
        score: Vec<f64>,
        t_max: f64,
        start: usize,
        end: usize,
        rounding: CostRounding,
    ) -> Result<Self, InstanceError> {
        let n = coords.len();
        if rounding == CostRounding::Explicit {
            return Err(InstanceError::InvalidValue {
                field: "rounding".into(),
                value: f64::NAN,
            });
        }
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cost[i * n + j] = rounding
                        .distance(coords[i], coords[j])
                        .expect("coordinate rounding");
                }
            }
        }
        Self::build(name.into(), n, Some(coords), cost, score, t_max, start, end, rounding)
    }

    /// Builds an instance from an explicit row-major `n × n` cost matrix.
    pub fn from_costs(
        name: impl Into<String>,
        n: usize,
        cost: Vec<f64>,
        score: Vec<f64>,
        t_max: f64,
        start: usize,
        end: usize,
    ) -> Result<Self, InstanceError> {
        Self::build(
            name.into(),
            n,
            None,
            cost,
            score,
            t_max,
            start,
            end,
            CostRounding::Explicit,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        name: String,
        n: usize,
        coords: Option<Vec<[f64; 2]>>,
        mut cost: Vec<f64>,
        score: Vec<f64>,
        t_max: f64,
        start: usize,
        end: usize,
        rounding: CostRounding,
    ) -> Result<Self, InstanceError> {
        if n < 2 {
            return Err(InstanceError::InvalidDimension(n));
        }
        if cost.len() != n * n {
            return Err(InstanceError::LengthMismatch {
                what: "cost matrix",
                got: cost.len(),
                expected: n * n,
            });
        }
        if score.len() != n {
            return Err(InstanceError::LengthMismatch {
                what: "scores",
                got: score.len(),
                expected: n,
            });
        }
        for &idx in &[start, end] {
            if idx >= n {
                return Err(InstanceError::VertexOutOfRange { index: idx, n });
            }
        }
        if !t_max.is_finite() || t_max < 0.0 {
            return Err(InstanceError::InvalidValue {
                field: "t_max".into(),
                value: t_max,
            });
        }
        for (k, &s) in score.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(InstanceError::InvalidValue {
                    field: format!("score[{}]", k + 1),
                    value: s,
                });
            }
        }
        for i in 0..n {
            // diagonal unused
            cost[i * n + i] = 0.0;
            for j in 0..n {
                let c = cost[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(InstanceError::InvalidValue {
                        field: format!("cost[{}][{}]", i + 1, j + 1),
                        value: c,
                    });
                }
            }
        }
        let direct = cost[start * n + end];
        if direct > t_max {
            return Err(InstanceError::InfeasibleBudget {
                cost: direct,
                t_max,
            });
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| cost[i * n + j] == cost[j * n + i]));
        Ok(Self {
            name,
            n,
            coords,
            cost,
            score,
            t_max,
            start,
            end,
            rounding,
            symmetric,
            metric: OnceLock::new(),
        })
    }

    /// Same graph with a different budget.
    pub fn with_budget(&self, t_max: f64) -> Result<Self, InstanceError> {
        Self::build(
            self.name.clone(),
            self.n,
            self.coords.clone(),
            self.cost.clone(),
            self.score.clone(),
            t_max,
            self.start,
            self.end,
            self.rounding,
        )
    }

    /// Same graph under a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// Row `i` of the cost matrix.
    #[inline]
    pub fn cost_row(&self, i: usize) -> &[f64] {
        &self.cost[i * self.n..(i + 1) * self.n]
    }

    pub fn cost_matrix(&self) -> &[f64] {
        &self.cost
    }

    #[inline]
    pub fn score(&self, v: usize) -> f64 {
        self.score[v]
    }

    pub fn scores(&self) -> &[f64] {
        &self.score
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// True when the route must return to its starting vertex.
    pub fn is_closed(&self) -> bool {
        self.start == self.end
    }

    pub fn rounding(&self) -> CostRounding {
        self.rounding
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Whether `cost(i,k) <= cost(i,j) + cost(j,k)` holds for every triple.
    ///
    /// Computed on first use in `O(n^3)`.
    pub fn is_metric(&self) -> bool {
        *self.metric.get_or_init(|| {
            let n = self.n;
            for j in 0..n {
                let row_j = self.cost_row(j);
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let cij = self.cost(i, j);
                    let row_i = self.cost_row(i);
                    for k in 0..n {
                        if k != i && k != j && row_i[k] > cij + row_j[k] {
                            return false;
                        }
                    }
                }
            }
            true
        })
    }

    /// Vertices that may appear strictly between start and end, in index order.
    pub fn intermediates(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| v != self.start && v != self.end)
    }

    /// Checks whether `route` is a feasible solution.
    ///
    /// Returns an error, rather than `false`, when the route references a
    /// vertex that does not exist.
    pub fn feasible(&self, route: &Route) -> Result<bool, InstanceError> {
        self.feasible_vertices(&route.vertices)
    }

    /// [`Instance::feasible`] on a bare vertex sequence.
    pub fn feasible_vertices(&self, vertices: &[usize]) -> Result<bool, InstanceError> {
        if vertices.is_empty() {
            return Err(InstanceError::InvalidRoute("empty route".into()));
        }
        if let Some(&bad) = vertices.iter().find(|&&v| v >= self.n) {
            return Err(InstanceError::VertexOutOfRange {
                index: bad,
                n: self.n,
            });
        }
        if vertices.len() < 2
            || vertices[0] != self.start
            || vertices[vertices.len() - 1] != self.end
        {
            return Ok(false);
        }
        let mut seen = vec![false; self.n];
        // a closed route legitimately repeats its depot once, at the end
        let body = if self.is_closed() {
            &vertices[..vertices.len() - 1]
        } else {
            vertices
        };
        for &v in body {
            if seen[v] {
                return Ok(false);
            }
            seen[v] = true;
        }
        Ok(self.path_cost(vertices) <= self.t_max)
    }

    /// Accumulated travel cost along a vertex sequence.
    pub fn path_cost(&self, vertices: &[usize]) -> f64 {
        vertices
            .windows(2)
            .map(|w| self.cost(w[0], w[1]))
            .fold(0.0, |acc, c| acc + c)
    }

    /// Collected score of a vertex sequence; a closed route's depot counts once.
    pub fn path_objective(&self, vertices: &[usize]) -> f64 {
        let body = if self.is_closed() && vertices.len() > 1 {
            &vertices[..vertices.len() - 1]
        } else {
            vertices
        };
        body.iter().fold(0.0, |acc, &v| acc + self.score[v])
    }

    /// The only route that visits no intermediate vertex.
    pub fn trivial_route(&self) -> Route {
        Route::new(self, vec![self.start, self.end])
    }
}

/// An ordered vertex sequence with cached cost and objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vertices: Vec<usize>,
    pub cost: f64,
    pub objective: f64,
}

impl Route {
    /// Builds a route, accumulating cost and objective from `inst`.
    ///
    /// No feasibility check is performed; use [`Instance::feasible`].
    pub fn new(inst: &Instance, vertices: Vec<usize>) -> Self {
        let cost = inst.path_cost(&vertices);
        let objective = inst.path_objective(&vertices);
        Self {
            vertices,
            cost,
            objective,
        }
    }

    /// Directed edges `(i, j)` traversed by the route, skipping self-loops.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        route_edges(&self.vertices)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Consecutive pairs of a vertex sequence, skipping self-loops.
pub fn route_edges(vertices: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    vertices
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(i, j)| i != j)
}
