//! Class-weighted linear SVM and logistic regression over edge features.
//!
//! Both models minimize `0.5 w'w + r+ sum_pos loss + r- sum_neg loss` on the
//! raw (unaveraged) sum; the bias is not regularized. Scores are squashed with
//! the logistic function regardless of kind.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Dataset, EdgeFeatureMatrix, N_FEATURES};
use crate::rng;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data has a single class ({positives} positive, {negatives} negative)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("training data is unlabeled")]
    Unlabeled,
    #[error("training diverged (non-finite loss) with step size {step}")]
    Divergence { step: f64 },
    #[error("invalid training option: {0}")]
    InvalidOption(String),
    #[error("unsupported model kind `{0}`: only svm and logreg are available")]
    UnsupportedKind(String),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Logreg,
}

impl std::str::FromStr for ModelKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "logreg" | "lr" => Ok(ModelKind::Logreg),
            other => Err(ClassifierError::UnsupportedKind(other.to_string())),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Svm => "svm",
            ModelKind::Logreg => "logreg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub weights: [f64; N_FEATURES],
    pub bias: f64,
    pub reg_pos: f64,
    pub reg_neg: f64,
    pub training_meta: TrainingMeta,
}

impl LinearModel {
    /// Untrained model with the given parameters.
    pub fn new(kind: ModelKind, weights: [f64; N_FEATURES], bias: f64) -> Self {
        Self {
            kind,
            weights,
            bias,
            reg_pos: 1.0,
            reg_neg: 1.0,
            training_meta: TrainingMeta {
                epochs: 0,
                seed: 0,
                final_loss: f64::NAN,
            },
        }
    }

    #[inline]
    pub fn decision(&self, f: &[f64; N_FEATURES]) -> f64 {
        dot(&self.weights, f) + self.bias
    }

    #[inline]
    pub fn probability(&self, f: &[f64; N_FEATURES]) -> f64 {
        logistic(self.decision(f))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let model: LinearModel =
            serde_json::from_str(text).map_err(|e| ClassifierError::Io(e.to_string()))?;
        if !model.weights.iter().all(|w| w.is_finite()) || !model.bias.is_finite() {
            return Err(ClassifierError::Io("non-finite weights".into()));
        }
        if !(model.reg_pos > 0.0 && model.reg_neg > 0.0) {
            return Err(ClassifierError::Io("regularization must be positive".into()));
        }
        Ok(model)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), ClassifierError> {
        out.write_all(self.to_json().as_bytes())
            .map_err(|e| ClassifierError::Io(e.to_string()))
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self, ClassifierError> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| ClassifierError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64; N_FEATURES], b: &[f64; N_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log2(1 + e^x)` without overflow.
#[inline]
fn softplus2(x: f64) -> f64 {
    (x.max(0.0) + (-x.abs()).exp().ln_1p()) / std::f64::consts::LN_2
}

/// Step-size rule for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StepSchedule {
    /// `1 / (lambda t)` on mini-batches; `lambda` defaults to `1 / (r- n_t)`.
    Pegasos { lambda: Option<f64>, batch: usize },
    /// Full-batch steps of `step` for `hold` epochs, then `step * hold / epoch`.
    ConstantThenDecay { step: f64, hold: usize },
}

impl StepSchedule {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Svm => StepSchedule::Pegasos {
                lambda: None,
                batch: 64,
            },
            ModelKind::Logreg => StepSchedule::ConstantThenDecay {
                step: 0.5,
                hold: 100,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub kind: ModelKind,
    pub epochs: usize,
    pub seed: u64,
    pub schedule: StepSchedule,
    /// Overrides `r+ = n_neg / n_pos`.
    pub reg_pos: Option<f64>,
    pub reg_neg: f64,
}

impl TrainOptions {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            epochs: match kind {
                ModelKind::Svm => 50,
                ModelKind::Logreg => 500,
            },
            seed: 0,
            schedule: StepSchedule::default_for(kind),
            reg_pos: None,
            reg_neg: 1.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

/// Per-example loss term for label `y` at decision value `z`.
#[inline]
fn example_loss(kind: ModelKind, y: f64, z: f64) -> f64 {
    match kind {
        ModelKind::Svm => (1.0 - y * z).max(0.0),
        ModelKind::Logreg => softplus2(-y * z),
    }
}

/// Derivative of [`example_loss`] with respect to `z`.
#[inline]
fn example_slope(kind: ModelKind, y: f64, z: f64) -> f64 {
    match kind {
        ModelKind::Svm => {
            if y * z < 1.0 {
                -y
            } else {
                0.0
            }
        }
        ModelKind::Logreg => -y * logistic(-y * z) / std::f64::consts::LN_2,
    }
}

/// Full regularized training objective.
pub fn loss(
    kind: ModelKind,
    weights: &[f64; N_FEATURES],
    bias: f64,
    data: &Dataset,
    reg_pos: f64,
    reg_neg: f64,
) -> f64 {
    let data_term: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(f, &y)| {
            let r = if y > 0 { reg_pos } else { reg_neg };
            r * example_loss(kind, y as f64, dot(weights, f) + bias)
        })
        .sum();
    0.5 * dot(weights, weights) + data_term
}

/// (Sub)gradient of [`loss`]; at hinge kinks the zero branch is taken.
pub fn gradient(
    kind: ModelKind,
    weights: &[f64; N_FEATURES],
    bias: f64,
    data: &Dataset,
    reg_pos: f64,
    reg_neg: f64,
) -> ([f64; N_FEATURES], f64) {
    let mut gw = *weights;
    let mut gb = 0.0;
    for (f, &y) in data.x.iter().zip(&data.y) {
        let r = if y > 0 { reg_pos } else { reg_neg };
        let s = r * example_slope(kind, y as f64, dot(weights, f) + bias);
        if s != 0.0 {
            for (g, x) in gw.iter_mut().zip(f) {
                *g += s * x;
            }
            gb += s;
        }
    }
    (gw, gb)
}

/// Fits a linear model; returns the lowest-loss iterate seen, including the
/// zero initialization.
pub fn train(data: &Dataset, opts: &TrainOptions) -> Result<LinearModel, ClassifierError> {
    if !data.is_labeled() {
        return Err(ClassifierError::Unlabeled);
    }
    let (positives, negatives) = data.class_counts();
    if positives == 0 || negatives == 0 {
        return Err(ClassifierError::DegenerateLabels {
            positives,
            negatives,
        });
    }
    let reg_neg = opts.reg_neg;
    let reg_pos = opts
        .reg_pos
        .unwrap_or(negatives as f64 / positives as f64);
    if !(reg_pos > 0.0 && reg_neg > 0.0) || !reg_pos.is_finite() || !reg_neg.is_finite() {
        return Err(ClassifierError::InvalidOption(format!(
            "regularization must be positive, got r+={reg_pos}, r-={reg_neg}"
        )));
    }

    let kind = opts.kind;
    let n_t = data.len() as f64;
    let objective = |w: &[f64; N_FEATURES], b: f64| loss(kind, w, b, data, reg_pos, reg_neg);

    let mut w = [0.0; N_FEATURES];
    let mut b = 0.0;
    let mut best = (w, b, objective(&w, b));
    let mut consider = |w: &[f64; N_FEATURES], b: f64, step: f64| {
        let l = objective(w, b);
        if !l.is_finite() {
            return Err(ClassifierError::Divergence { step });
        }
        if l < best.2 {
            best = (*w, b, l);
        }
        Ok(())
    };

    match opts.schedule {
        StepSchedule::Pegasos { lambda, batch } => {
            if batch == 0 {
                return Err(ClassifierError::InvalidOption("batch size 0".into()));
            }
            // objective divided by r- n_t: lambda/2 |w|^2 + mean of (r/r-) hinge
            let lambda = lambda.unwrap_or(1.0 / (reg_neg * n_t));
            if !(lambda > 0.0) {
                return Err(ClassifierError::InvalidOption(format!("lambda {lambda}")));
            }
            let radius = 1.0 / lambda.sqrt();
            let mut order: Vec<usize> = (0..data.len()).collect();
            let mut rng = rng::stream(opts.seed, 0);
            let mut t = 0u64;
            let mut avg_w = [0.0; N_FEATURES];
            let mut avg_b = 0.0;
            for _ in 0..opts.epochs {
                order.shuffle(&mut rng);
                let mut step = 0.0;
                for chunk in order.chunks(batch) {
                    t += 1;
                    step = 1.0 / (lambda * t as f64);
                    let mut gw = [0.0; N_FEATURES];
                    let mut gb = 0.0;
                    for &k in chunk {
                        let y = data.y[k] as f64;
                        let f = &data.x[k];
                        if y * (dot(&w, f) + b) < 1.0 {
                            let r = if y > 0.0 { reg_pos } else { reg_neg } / reg_neg;
                            for (g, x) in gw.iter_mut().zip(f) {
                                *g -= r * y * x;
                            }
                            gb -= r * y;
                        }
                    }
                    let scale = 1.0 / chunk.len() as f64;
                    for (wi, gi) in w.iter_mut().zip(&gw) {
                        *wi -= step * (lambda * *wi + scale * gi);
                    }
                    b -= step * scale * gb;
                    let norm = dot(&w, &w).sqrt();
                    if norm > radius {
                        for wi in w.iter_mut() {
                            *wi *= radius / norm;
                        }
                    }
                    let k = t as f64;
                    for (a, wi) in avg_w.iter_mut().zip(&w) {
                        *a += (wi - *a) / k;
                    }
                    avg_b += (b - avg_b) / k;
                }
                consider(&w, b, step)?;
                consider(&avg_w, avg_b, step)?;
            }
        }
        StepSchedule::ConstantThenDecay { step, hold } => {
            if !(step > 0.0) {
                return Err(ClassifierError::InvalidOption(format!("step {step}")));
            }
            // gradient of the objective divided by r- n_t
            let scale = 1.0 / (reg_neg * n_t);
            for epoch in 1..=opts.epochs {
                let eta = if epoch <= hold.max(1) {
                    step
                } else {
                    step * hold.max(1) as f64 / epoch as f64
                };
                let (gw, gb) = gradient(kind, &w, b, data, reg_pos, reg_neg);
                for (wi, gi) in w.iter_mut().zip(&gw) {
                    *wi -= eta * scale * gi;
                }
                b -= eta * scale * gb;
                consider(&w, b, eta)?;
            }
        }
    }

    let (weights, bias, final_loss) = best;
    Ok(LinearModel {
        kind,
        weights,
        bias,
        reg_pos,
        reg_neg,
        training_meta: TrainingMeta {
            epochs: opts.epochs,
            seed: opts.seed,
            final_loss,
        },
    })
}

/// Dense edge probabilities of one instance; the diagonal is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    n: usize,
    p: Vec<f64>,
    pub model_id: String,
}

impl Prediction {
    /// Builds a prediction from a dense row-major `n x n` matrix.
    pub fn from_matrix(n: usize, p: Vec<f64>, model_id: impl Into<String>) -> Self {
        assert_eq!(p.len(), n * n, "prediction matrix must be n x n");
        Self {
            n,
            p,
            model_id: model_id.into(),
        }
    }

    /// Same probability on every edge.
    pub fn constant(n: usize, value: f64) -> Self {
        let mut p = vec![value; n * n];
        for i in 0..n {
            p[i * n + i] = 0.0;
        }
        Self::from_matrix(n, p, format!("constant:{value}"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.p
    }

    /// Off-diagonal values in edge order.
    pub fn edge_values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(move |(i, j)| self.get(i, j))
    }

    /// CSV `i,j,p` with 1-based vertices.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "p"])?;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    w.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        format!("{}", self.get(i, j)),
                    ])?;
                }
            }
        }
        w.flush()
    }
}

/// Probabilities for arbitrary feature rows.
pub fn predict_rows(model: &LinearModel, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
    rows.par_iter().map(|f| model.probability(f)).collect()
}

pub fn predict(model: &LinearModel, feats: &EdgeFeatureMatrix) -> Prediction {
    let n = feats.n();
    let probs = predict_rows(model, feats.rows());
    let mut p = vec![0.0; n * n];
    for ((i, j), v) in feats.edges().zip(probs) {
        p[i * n + j] = v;
    }
    let id = format!(
        "{}:{}",
        model.kind,
        model
            .weights
            .iter()
            .chain(std::iter::once(&model.bias))
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    Prediction::from_matrix(n, p, id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub positive_recall: f64,
}

/// Confusion-matrix metrics at threshold 0.5; absent classes are left out of
/// the balanced mean.
pub fn evaluate(model: &LinearModel, data: &Dataset) -> Metrics {
    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (f, &y) in data.x.iter().zip(&data.y) {
        let positive = model.probability(f) >= 0.5;
        match (y > 0, positive) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let total = tp + tn + fp + fneg;
    let ratio = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let tpr = ratio(tp, tp + fneg);
    let tnr = ratio(tn, tn + fp);
    let present: Vec<f64> = [tpr, tnr].into_iter().flatten().collect();
    Metrics {
        accuracy: ratio(tp + tn, total).unwrap_or(0.0),
        balanced_accuracy: if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        },
        positive_recall: tpr.unwrap_or(0.0),
    }
}
