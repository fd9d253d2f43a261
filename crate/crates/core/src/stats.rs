//! Paired significance tests, optimality gaps and normalized convergence curves.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Above this many nonzero differences the normal approximation is used.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no paired observations")]
    Empty,
    #[error("reference optimum must be positive, got {0}")]
    InvalidOptimum(f64),
    #[error("baseline for instance {index} has best objective {best}")]
    InvalidBaseline { index: usize, best: f64 },
    #[error("{traces} traces but {baselines} baselines")]
    CurveMismatch { traces: usize, baselines: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact up to [`EXACT_MAX_N`] nonzero differences, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    /// `a[k] - b[k]`.
    pub diffs: Vec<f64>,
    /// Sum of ranks of positive differences.
    pub w_statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
    /// Set when every difference is zero; `p_value` is then 1.
    pub degenerate: bool,
}

/// Two-sided Wilcoxon signed-rank test of `a` against `b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<PairedComparison, StatsError> {
    wilcoxon_with(a, b, Alternative::TwoSided, Method::Auto)
}

/// Average ranks of `|d|`, doubled so ties stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&x, &y| abs[x].total_cmp(&abs[y]));
    let mut ranks = vec![0u64; abs.len()];
    let mut k = 0;
    while k < order.len() {
        let mut e = k;
        while e + 1 < order.len() && abs[order[e + 1]] == abs[order[k]] {
            e += 1;
        }
        // ranks k+1 ..= e+1 averaged, times two
        let doubled = (k + 1 + e + 1) as u64;
        for &o in &order[k..=e] {
            ranks[o] = doubled;
        }
        k = e + 1;
    }
    ranks
}

pub fn wilcoxon_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: Method,
) -> Result<PairedComparison, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(PairedComparison {
            diffs,
            w_statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            exact: true,
            degenerate: true,
        });
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w2: u64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let exact = match method {
        Method::Auto => n <= EXACT_MAX_N,
        Method::Exact => true,
        Method::Normal => false,
    };
    let p_value = if exact {
        exact_p_value(&ranks, w2, alternative)
    } else {
        normal_p_value(&ranks, w2, alternative)
    };
    Ok(PairedComparison {
        diffs,
        w_statistic: w2 as f64 / 2.0,
        p_value,
        n_effective: n,
        exact,
        degenerate: false,
    })
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` sign
/// assignments reach sum `s`.
fn null_counts(ranks: &[u64]) -> Vec<f64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0.0; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p_value(ranks: &[u64], w2: u64, alternative: Alternative) -> f64 {
    let counts = null_counts(ranks);
    let all: f64 = counts.iter().sum();
    let w = w2 as usize;
    let lower = counts[..=w].iter().sum::<f64>() / all;
    let upper = counts[w..].iter().sum::<f64>() / all;
    let p = match alternative {
        Alternative::TwoSided => 2.0 * lower.min(upper),
        Alternative::Greater => upper,
        Alternative::Less => lower,
    };
    p.min(1.0)
}

fn normal_p_value(ranks: &[u64], w2: u64, alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        ties += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    let w = w2 as f64 / 2.0;
    let z_upper = (w - mean - 0.5) / sd;
    let z_lower = (w - mean + 0.5) / sd;
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let upper = 1.0 - std.cdf(z_upper);
    let lower = std.cdf(z_lower);
    let p = match alternative {
        Alternative::TwoSided => 2.0 * lower.min(upper),
        Alternative::Greater => upper,
        Alternative::Less => lower,
    };
    p.clamp(0.0, 1.0)
}

/// Percentage shortfall `100 (opt - found) / opt`; a `found` above `opt`
/// yields 0 and a warning.
pub fn optimality_gap(found: f64, opt: f64) -> Result<f64, StatsError> {
    if !(opt > 0.0) || !opt.is_finite() {
        return Err(StatsError::InvalidOptimum(opt));
    }
    let gap = 100.0 * (opt - found) / opt;
    if gap < 0.0 {
        log::warn!("found objective {found} exceeds the reference optimum {opt}");
        return Ok(0.0);
    }
    Ok(gap)
}

/// Mean of per-instance curves divided by the matching baseline's final best.
///
/// Curves are step functions of the construction count; the grid is the
/// union of checkpoints from the first count at which every curve has a value.
pub fn normalize_curves(
    traces: &[Vec<(usize, f64)>],
    baseline: &[Vec<(usize, f64)>],
) -> Result<Vec<(usize, f64)>, StatsError> {
    if traces.len() != baseline.len() {
        return Err(StatsError::CurveMismatch {
            traces: traces.len(),
            baselines: baseline.len(),
        });
    }
    if traces.is_empty() || traces.iter().any(|t| t.is_empty()) {
        return Err(StatsError::Empty);
    }
    let mut scales = Vec::with_capacity(baseline.len());
    for (index, b) in baseline.iter().enumerate() {
        let best = b.last().map_or(0.0, |c| c.1);
        if !(best > 0.0) {
            return Err(StatsError::InvalidBaseline { index, best });
        }
        scales.push(best);
    }
    let from = traces.iter().map(|t| t[0].0).max().expect("nonempty");
    let mut grid: Vec<usize> = traces
        .iter()
        .flat_map(|t| t.iter().map(|c| c.0))
        .filter(|&c| c >= from)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let mut cursors = vec![0usize; traces.len()];
    let mut out = Vec::with_capacity(grid.len());
    for &g in &grid {
        let mut sum = 0.0;
        for (k, t) in traces.iter().enumerate() {
            while cursors[k] + 1 < t.len() && t[cursors[k] + 1].0 <= g {
                cursors[k] += 1;
            }
            sum += t[cursors[k]].1 / scales[k];
        }
        out.push((g, sum / traces.len() as f64));
    }
    Ok(out)
}
