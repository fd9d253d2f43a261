//! Per-edge features for optimal-edge classification.
//!
//! Every directed edge `(i, j)`, `i != j`, gets five dimensionless values:
//! cost relative to budget (`f1`), score-per-cost relative to the best
//! outgoing and incoming alternatives (`f2`, `f3`), and two statistics of a
//! random route sample: a rank-weighted frequency (`f4`) and the Pearson
//! correlation between edge use and route objective (`f5`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Route};
use crate::sampler::{self, SampleError, SampleSet};

pub const N_FEATURES: usize = 5;

/// Lower bound applied to edge costs before they appear in a denominator.
pub const COST_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("budget must be positive to normalize edge costs, got {0}")]
    InvalidBudget(f64),
    #[error("all sampled routes share one objective value; retry with a larger sample")]
    DegenerateSamples,
    #[error("sample set has {got} routes for instance `{name}` ({expected} rankings)")]
    SampleMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("labelling route is not feasible for instance `{0}`")]
    InvalidLabelRoute(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("feature CSV: {0}")]
    Csv(String),
}

/// Row position of edge `(i, j)` in the canonical order (row-major, diagonal skipped).
#[inline]
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// Inverse of [`edge_index`].
#[inline]
pub fn edge_at(n: usize, idx: usize) -> (usize, usize) {
    let i = idx / (n - 1);
    let r = idx % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// Features of all `n(n-1)` directed edges of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatureMatrix {
    n: usize,
    rows: Vec<[f64; N_FEATURES]>,
    labels: Option<Vec<i8>>,
}

impl EdgeFeatureMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; N_FEATURES]] {
        &self.rows
    }

    pub fn row(&self, i: usize, j: usize) -> &[f64; N_FEATURES] {
        &self.rows[edge_index(self.n, i, j)]
    }

    /// `+1` for edges of the labelling route, `-1` otherwise.
    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    /// Directed edges in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows.len()).map(move |k| edge_at(self.n, k))
    }

    /// Labels every edge by membership in `route`.
    pub fn with_labels(mut self, inst: &Instance, route: &Route) -> Result<Self, FeatureError> {
        if !inst.feasible(route).unwrap_or(false) {
            return Err(FeatureError::InvalidLabelRoute(inst.name().to_string()));
        }
        let mut labels = vec![-1; self.rows.len()];
        for (i, j) in route.edges() {
            labels[edge_index(self.n, i, j)] = 1;
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn into_dataset(self) -> Dataset {
        Dataset {
            x: self.rows,
            y: self.labels.unwrap_or_default(),
        }
    }

    /// Writes `i,j,f1,...,f5[,label]` rows with 1-based vertex indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["i", "j", "f1", "f2", "f3", "f4", "f5"];
        if self.labels.is_some() {
            header.push("label");
        }
        w.write_record(&header).map_err(csv_err)?;
        for (k, (i, j)) in self.edges().enumerate() {
            let mut rec = vec![(i + 1).to_string(), (j + 1).to_string()];
            rec.extend(self.rows[k].iter().map(|v| v.to_string()));
            if let Some(l) = &self.labels {
                rec.push(l[k].to_string());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> FeatureError {
    FeatureError::Csv(e.to_string())
}

/// Feature rows, possibly from several instances, with `+1/-1` labels.
///
/// `y` is empty for unlabeled data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<[f64; N_FEATURES]>,
    pub y: Vec<i8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        !self.x.is_empty() && self.y.len() == self.x.len()
    }

    pub fn extend(&mut self, other: Dataset) {
        self.x.extend(other.x);
        self.y.extend(other.y);
    }

    /// Counts of `(positive, negative)` labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&l| l > 0).count();
        (pos, self.y.len() - pos)
    }

    /// Reads the CSV written by [`EdgeFeatureMatrix::write_csv`] or [`Dataset::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(csv_err)?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let fcols: Vec<usize> = ["f1", "f2", "f3", "f4", "f5"]
            .iter()
            .map(|c| col(c).ok_or_else(|| FeatureError::Csv(format!("missing column `{c}`"))))
            .collect::<Result<_, _>>()?;
        let label_col = col("label");
        let mut data = Dataset::default();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |c: usize| -> Result<f64, FeatureError> {
                let raw = rec.get(c).unwrap_or("");
                raw.trim().parse::<f64>().map_err(|_| {
                    FeatureError::Csv(format!(
                        "row {}: column `{}` is not numeric: `{raw}`",
                        line + 2,
                        &headers[c]
                    ))
                })
            };
            let mut row = [0.0; N_FEATURES];
            for (f, &c) in row.iter_mut().zip(&fcols) {
                *f = field(c)?;
            }
            data.x.push(row);
            if let Some(c) = label_col {
                data.y.push(if field(c)? > 0.0 { 1 } else { -1 });
            }
        }
        Ok(data)
    }

    /// Writes `f1,...,f5[,label]` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let labeled = self.is_labeled();
        let mut header = vec!["f1", "f2", "f3", "f4", "f5"];
        if labeled {
            header.push("label");
        }
        w.write_record(&header).map_err(csv_err)?;
        for (k, row) in self.x.iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if labeled {
                rec.push(self.y[k].to_string());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }
}

/// `f1`, `f2`, `f3` for every edge, in [`edge_index`] order.
pub fn graph_features(inst: &Instance) -> Result<Vec<[f64; 3]>, FeatureError> {
    let n = inst.n();
    let t_max = inst.t_max();
    if t_max <= 0.0 {
        return Err(FeatureError::InvalidBudget(t_max));
    }
    let c = |i: usize, j: usize| inst.cost(i, j).max(COST_FLOOR);
    let ratio = |i: usize, j: usize| inst.score(j) / c(i, j);

    let row_max: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| ratio(i, k))
                .fold(0.0, f64::max)
        })
        .collect();
    // s_j cancels from the incoming-edge ratio
    let col_min: Vec<f64> = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&k| k != j)
                .map(|k| c(k, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut out = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let f1 = inst.cost(i, j) / t_max;
            let f2 = if row_max[i] > 0.0 {
                ratio(i, j) / row_max[i]
            } else {
                0.0
            };
            let f3 = col_min[j] / c(i, j);
            out.push([f1, f2, f3]);
        }
    }
    Ok(out)
}

/// Rank-weighted frequency `f_r` and edge/objective correlation `f_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStatistics {
    pub f_r: Vec<f64>,
    pub f_c: Vec<f64>,
}

/// Raw `f_r`, `f_c` in [`edge_index`] order, computed in `O(mn + n^2)` from
/// route edge lists.
pub fn sample_statistics(
    inst: &Instance,
    samples: &SampleSet,
) -> Result<SampleStatistics, FeatureError> {
    let n = inst.n();
    let m = samples.m();
    if m == 0 || samples.rankings.len() != m || samples.objectives.len() != m {
        return Err(FeatureError::SampleMismatch {
            name: inst.name().to_string(),
            got: m,
            expected: samples.rankings.len(),
        });
    }
    let mf = m as f64;
    let y_bar = samples.objectives.iter().sum::<f64>() / mf;
    let y_d: f64 = samples.objectives.iter().map(|y| y - y_bar).sum();
    let sigma_y: f64 = samples
        .objectives
        .iter()
        .map(|y| (y - y_bar) * (y - y_bar))
        .sum();
    if sigma_y <= 0.0 {
        return Err(FeatureError::DegenerateSamples);
    }

    let mut f_r = vec![0.0; n * n];
    let mut count = vec![0u32; n * n];
    let mut s1 = vec![0.0; n * n];
    for k in 0..m {
        let inv_rank = 1.0 / samples.rankings[k] as f64;
        let dev = samples.objectives[k] - y_bar;
        for (i, j) in samples.routes[k].edges() {
            let e = i * n + j;
            f_r[e] += inv_rank;
            count[e] += 1;
            s1[e] += dev;
        }
    }

    let mut stats = SampleStatistics {
        f_r: Vec::with_capacity(n * (n - 1)),
        f_c: Vec::with_capacity(n * (n - 1)),
    };
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let e = i * n + j;
            stats.f_r.push(f_r[e]);
            let x_bar = count[e] as f64 / mf;
            let f_c = if count[e] == 0 || count[e] as usize == m {
                0.0
            } else {
                let sigma_c = (1.0 - x_bar) * s1[e] - x_bar * (y_d - s1[e]);
                let sigma_x = x_bar * (1.0 - x_bar) * mf;
                sigma_c / (sigma_x * sigma_y).sqrt()
            };
            stats.f_c.push(f_c);
        }
    }
    Ok(stats)
}

/// `f4 = f_r / max f_r` and `f5 = f_c / max f_c`.
///
/// When no correlation is positive, `f_c` is divided by its largest magnitude
/// instead so that signs are preserved.
pub fn statistical_features(
    inst: &Instance,
    samples: &SampleSet,
) -> Result<Vec<[f64; 2]>, FeatureError> {
    let stats = sample_statistics(inst, samples)?;
    let max_r = stats.f_r.iter().cloned().fold(0.0, f64::max);
    let max_c = stats.f_c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale_c = if max_c > 0.0 {
        max_c
    } else {
        let max_abs = stats.f_c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        log::warn!(
            "instance `{}`: no edge correlates positively with the objective (max f_c = {max_c})",
            inst.name()
        );
        max_abs
    };
    Ok(stats
        .f_r
        .iter()
        .zip(&stats.f_c)
        .map(|(&r, &c)| {
            [
                if max_r > 0.0 { r / max_r } else { 0.0 },
                if scale_c > 0.0 { c / scale_c } else { 0.0 },
            ]
        })
        .collect())
}

/// Full feature matrix from an instance and a route sample.
pub fn assemble(inst: &Instance, samples: &SampleSet) -> Result<EdgeFeatureMatrix, FeatureError> {
    let graph = graph_features(inst)?;
    let stat = statistical_features(inst, samples)?;
    let rows = graph
        .iter()
        .zip(&stat)
        .map(|(g, s)| [g[0], g[1], g[2], s[0], s[1]])
        .collect();
    Ok(EdgeFeatureMatrix {
        n: inst.n(),
        rows,
        labels: None,
    })
}

/// Samples `m` routes and assembles features, retrying with a doubled sample
/// (next seed) up to three times when the sample is degenerate.
pub fn extract(inst: &Instance, m: usize, seed: u64) -> Result<EdgeFeatureMatrix, FeatureError> {
    let mut m = m;
    let mut last = FeatureError::DegenerateSamples;
    for attempt in 0..4u64 {
        let samples = sampler::sample(inst, m, seed.wrapping_add(attempt))?;
        match assemble(inst, &samples) {
            Err(FeatureError::DegenerateSamples) => {
                log::warn!(
                    "instance `{}`: degenerate sample of {m} routes, retrying with {}",
                    inst.name(),
                    2 * m
                );
                last = FeatureError::DegenerateSamples;
                m *= 2;
            }
            other => return other,
        }
    }
    Err(last)
}
