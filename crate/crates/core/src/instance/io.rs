//! Instance file formats: OPLib/TSPLIB text, Chao text and canonical JSON.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CostRounding, Instance, InstanceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceFormat {
    Oplib,
    Chao,
    Json,
}

impl InstanceFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "oplib" | "tsp" | "op" => Some(Self::Oplib),
            "json" => Some(Self::Json),
            "txt" => Some(Self::Chao),
            _ => None,
        }
    }
}

impl FromStr for InstanceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oplib" | "tsplib" => Ok(Self::Oplib),
            "chao" => Ok(Self::Chao),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown instance format `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {detail}")]
    MalformedHeader { line: usize, detail: String },
    #[error("line {line}: field `{field}` is not numeric: `{token}`")]
    NonNumeric {
        line: usize,
        field: String,
        token: String,
    },
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("line {line}: unsupported {detail}")]
    Unsupported { line: usize, detail: String },
    #[error("no feasible route: cost(start, end) = {cost} exceeds budget {t_max}")]
    InfeasibleBudget { cost: f64, t_max: f64 },
    #[error("invalid JSON instance: {0}")]
    Json(String),
    #[error(transparent)]
    Instance(InstanceError),
}

impl From<InstanceError> for ParseError {
    fn from(err: InstanceError) -> Self {
        match err {
            InstanceError::InfeasibleBudget { cost, t_max } => {
                ParseError::InfeasibleBudget { cost, t_max }
            }
            other => ParseError::Instance(other),
        }
    }
}

/// Reads an instance file in the given format.
pub fn parse(path: &Path, format: InstanceFormat) -> Result<Instance, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance");
    parse_str(&text, format, stem)
}

/// Parses instance text; `default_name` is used when the text carries none.
pub fn parse_str(
    text: &str,
    format: InstanceFormat,
    default_name: &str,
) -> Result<Instance, ParseError> {
    match format {
        InstanceFormat::Oplib => parse_oplib(text, default_name),
        InstanceFormat::Chao => parse_chao(text, default_name),
        InstanceFormat::Json => parse_json(text),
    }
}

fn number(token: &str, line: usize, field: &str) -> Result<f64, ParseError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::NonNumeric {
            line,
            field: field.to_string(),
            token: token.to_string(),
        })
}

fn index(token: &str, line: usize, field: &str, n: usize) -> Result<usize, ParseError> {
    let v = number(token, line, field)?;
    if v.fract() != 0.0 || v < 1.0 || v > n as f64 {
        return Err(ParseError::MalformedHeader {
            line,
            detail: format!("{field} index {token} outside 1..={n}"),
        });
    }
    Ok(v as usize - 1)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Scores,
    Depots,
    Weights,
    Skip,
}

#[derive(Clone, Copy, PartialEq)]
enum WeightFormat {
    Full,
    UpperRow,
    LowerRow,
    UpperDiagRow,
    LowerDiagRow,
}

fn parse_oplib(text: &str, default_name: &str) -> Result<Instance, ParseError> {
    let mut name = default_name.to_string();
    let mut dimension: Option<usize> = None;
    let mut t_max: Option<f64> = None;
    let mut weight_type: Option<(String, usize)> = None;
    let mut weight_format = WeightFormat::Full;
    let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
    let mut scores: Vec<Option<f64>> = Vec::new();
    let mut depots: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut section = Section::Header;

    let need_dim = |dimension: Option<usize>, line: usize| {
        dimension.ok_or(ParseError::MalformedHeader {
            line,
            detail: "data section before DIMENSION".into(),
        })
    };

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "EOF" {
            break;
        }
        let (key, value) = match trimmed.split_once(':') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (trimmed, None),
        };
        let upper = key.to_ascii_uppercase();
        if upper.ends_with("_SECTION") && value.map_or(true, str::is_empty) {
            let n = need_dim(dimension, line)?;
            section = match upper.as_str() {
                "NODE_COORD_SECTION" => {
                    coords = vec![None; n];
                    Section::Coords
                }
                "NODE_SCORE_SECTION" => {
                    scores = vec![None; n];
                    Section::Scores
                }
                "DEPOT_SECTION" => Section::Depots,
                "EDGE_WEIGHT_SECTION" => Section::Weights,
                _ => Section::Skip,
            };
            continue;
        }
        let first_is_number = trimmed
            .split_whitespace()
            .next()
            .is_some_and(|t| t.parse::<f64>().is_ok());
        if value.is_some() && !first_is_number {
            section = Section::Header;
            let value = value.unwrap_or_default();
            match upper.as_str() {
                "NAME" => name = value.to_string(),
                "DIMENSION" => {
                    let d = number(value, line, "DIMENSION")?;
                    if d.fract() != 0.0 || d < 0.0 {
                        return Err(ParseError::MalformedHeader {
                            line,
                            detail: format!("DIMENSION `{value}` is not a count"),
                        });
                    }
                    dimension = Some(d as usize);
                }
                "COST_LIMIT" | "TMAX" => t_max = Some(number(value, line, &upper)?),
                "TYPE" => {
                    let ty = value.to_ascii_uppercase();
                    if !matches!(ty.as_str(), "OP" | "TSP" | "TSPTW") {
                        return Err(ParseError::Unsupported {
                            line,
                            detail: format!("problem TYPE `{value}`"),
                        });
                    }
                }
                "EDGE_WEIGHT_TYPE" => weight_type = Some((value.to_ascii_uppercase(), line)),
                "EDGE_WEIGHT_FORMAT" => {
                    weight_format = match value.to_ascii_uppercase().as_str() {
                        "FULL_MATRIX" => WeightFormat::Full,
                        "UPPER_ROW" => WeightFormat::UpperRow,
                        "LOWER_ROW" => WeightFormat::LowerRow,
                        "UPPER_DIAG_ROW" => WeightFormat::UpperDiagRow,
                        "LOWER_DIAG_ROW" => WeightFormat::LowerDiagRow,
                        "FUNCTION" => weight_format,
                        other => {
                            return Err(ParseError::Unsupported {
                                line,
                                detail: format!("EDGE_WEIGHT_FORMAT `{other}`"),
                            })
                        }
                    }
                }
                "COMMENT" | "NODE_COORD_TYPE" | "DISPLAY_DATA_TYPE" | "TSPSOL" | "CAPACITY" => {}
                other => log::warn!("line {line}: ignoring unknown keyword `{other}`"),
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match section {
            Section::Header => {
                return Err(ParseError::MalformedHeader {
                    line,
                    detail: format!("expected `KEY : VALUE`, found `{trimmed}`"),
                })
            }
            Section::Coords => {
                let n = need_dim(dimension, line)?;
                if tokens.len() < 3 {
                    return Err(ParseError::MalformedHeader {
                        line,
                        detail: "coordinate line needs `id x y`".into(),
                    });
                }
                let id = index(tokens[0], line, "node", n)?;
                coords[id] = Some([
                    number(tokens[1], line, "x")?,
                    number(tokens[2], line, "y")?,
                ]);
            }
            Section::Scores => {
                let n = need_dim(dimension, line)?;
                if tokens.len() < 2 {
                    return Err(ParseError::MalformedHeader {
                        line,
                        detail: "score line needs `id score`".into(),
                    });
                }
                let id = index(tokens[0], line, "node", n)?;
                scores[id] = Some(number(tokens[1], line, "score")?);
            }
            Section::Depots => {
                let n = need_dim(dimension, line)?;
                for t in tokens {
                    if number(t, line, "depot")? < 0.0 {
                        section = Section::Skip;
                        break;
                    }
                    depots.push(index(t, line, "depot", n)?);
                }
            }
            Section::Weights => {
                for t in tokens {
                    weights.push(number(t, line, "edge weight")?);
                }
            }
            Section::Skip => {}
        }
    }

    let n = dimension.ok_or_else(|| ParseError::MissingField("DIMENSION".into()))?;
    let t_max = t_max.ok_or_else(|| ParseError::MissingField("COST_LIMIT".into()))?;
    let (weight_type, wt_line) =
        weight_type.ok_or_else(|| ParseError::MissingField("EDGE_WEIGHT_TYPE".into()))?;
    let score: Vec<f64> = if scores.is_empty() {
        return Err(ParseError::MissingField("NODE_SCORE_SECTION".into()));
    } else {
        scores
            .iter()
            .enumerate()
            .map(|(v, s)| s.ok_or_else(|| ParseError::MissingField(format!("score of node {}", v + 1))))
            .collect::<Result<_, _>>()?
    };
    let (start, end) = match depots.first() {
        Some(&d) => (d, d),
        None => (0, n.saturating_sub(1)),
    };

    let rounding = match weight_type.as_str() {
        "EUC_2D" => Some(CostRounding::TsplibEuc2d),
        "CEIL_2D" => Some(CostRounding::TsplibCeil2d),
        "ATT" => Some(CostRounding::TsplibAtt),
        "GEO" => Some(CostRounding::TsplibGeo),
        "EXPLICIT" => None,
        other => {
            return Err(ParseError::Unsupported {
                line: wt_line,
                detail: format!("EDGE_WEIGHT_TYPE `{other}`"),
            })
        }
    };
    let inst = match rounding {
        Some(rounding) => {
            let coords: Vec<[f64; 2]> = coords
                .iter()
                .enumerate()
                .map(|(v, c)| {
                    c.ok_or_else(|| ParseError::MissingField(format!("coordinates of node {}", v + 1)))
                })
                .collect::<Result<_, _>>()?;
            Instance::from_coords(name, coords, score, t_max, start, end, rounding)?
        }
        None => {
            let cost = expand_weights(&weights, n, weight_format)?;
            let mut inst = Instance::from_costs(name, n, cost, score, t_max, start, end)?;
            if coords.iter().all(Option::is_some) && !coords.is_empty() {
                inst.coords = Some(coords.into_iter().flatten().collect());
            }
            inst
        }
    };
    Ok(inst)
}

fn expand_weights(weights: &[f64], n: usize, format: WeightFormat) -> Result<Vec<f64>, ParseError> {
    let expected = match format {
        WeightFormat::Full => n * n,
        WeightFormat::UpperRow | WeightFormat::LowerRow => n * (n - 1) / 2,
        WeightFormat::UpperDiagRow | WeightFormat::LowerDiagRow => n * (n + 1) / 2,
    };
    if weights.len() < expected {
        return Err(ParseError::MissingField(format!(
            "EDGE_WEIGHT_SECTION: {} of {expected} weights",
            weights.len()
        )));
    }
    let mut cost = vec![0.0; n * n];
    let mut it = weights.iter().copied();
    let mut set = |i: usize, j: usize, w: f64| {
        cost[i * n + j] = w;
        cost[j * n + i] = w;
    };
    match format {
        WeightFormat::Full => {
            drop(set);
            for (k, w) in weights.iter().take(n * n).enumerate() {
                cost[k] = *w;
            }
        }
        WeightFormat::UpperRow => {
            for i in 0..n {
                for j in i + 1..n {
                    set(i, j, it.next().unwrap_or_default());
                }
            }
        }
        WeightFormat::UpperDiagRow => {
            for i in 0..n {
                for j in i..n {
                    set(i, j, it.next().unwrap_or_default());
                }
            }
        }
        WeightFormat::LowerRow => {
            for i in 0..n {
                for j in 0..i {
                    set(i, j, it.next().unwrap_or_default());
                }
            }
        }
        WeightFormat::LowerDiagRow => {
            for i in 0..n {
                for j in 0..=i {
                    set(i, j, it.next().unwrap_or_default());
                }
            }
        }
    }
    Ok(cost)
}

/// Chao-style text: a two-number first line, then one `x y score` line per
/// vertex. Vertex 1 is the start and vertex 2 the end.
///
/// The first line is read as `n t_max` when its first number equals the
/// count of vertex lines that follow, and as `t_max paths` otherwise.
fn parse_chao(text: &str, default_name: &str) -> Result<Instance, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (head_line, head) = lines
        .next()
        .ok_or_else(|| ParseError::MissingField("header line".into()))?;
    let head: Vec<&str> = head.split_whitespace().collect();
    if head.len() != 2 {
        return Err(ParseError::MalformedHeader {
            line: head_line,
            detail: format!("expected two numbers, found {} fields", head.len()),
        });
    }
    let a = number(head[0], head_line, "header[1]")?;
    let b = number(head[1], head_line, "header[2]")?;

    let mut coords = Vec::new();
    let mut scores = Vec::new();
    for (line, l) in lines {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(ParseError::MalformedHeader {
                line,
                detail: "vertex line needs `x y score`".into(),
            });
        }
        coords.push([number(tokens[0], line, "x")?, number(tokens[1], line, "y")?]);
        scores.push(number(tokens[2], line, "score")?);
    }
    let t_max = if a.fract() == 0.0 && a as usize == coords.len() {
        b
    } else {
        a
    };
    if coords.len() < 2 {
        return Err(ParseError::Instance(InstanceError::InvalidDimension(coords.len())));
    }
    Ok(Instance::from_coords(
        default_name,
        coords,
        scores,
        t_max,
        0,
        1,
        CostRounding::ExactEuclidean,
    )?)
}

#[derive(Serialize, Deserialize)]
struct JsonInstance {
    name: String,
    n: usize,
    start: usize,
    end: usize,
    t_max: f64,
    scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    costs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    rounding: Option<CostRounding>,
}

fn parse_json(text: &str) -> Result<Instance, ParseError> {
    let raw: JsonInstance =
        serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
    let n = raw.n;
    let one_based = |v: usize, field: &str| {
        if v == 0 || v > n {
            Err(ParseError::Json(format!("{field} = {v} outside 1..={n}")))
        } else {
            Ok(v - 1)
        }
    };
    let start = one_based(raw.start, "start")?;
    let end = one_based(raw.end, "end")?;
    match (raw.coords, raw.costs) {
        (Some(coords), _) if raw.rounding != Some(CostRounding::Explicit) => {
            if coords.len() != n {
                return Err(ParseError::Json(format!(
                    "{} coordinates for n = {n}",
                    coords.len()
                )));
            }
            let rounding = raw.rounding.unwrap_or(CostRounding::ExactEuclidean);
            Ok(Instance::from_coords(
                raw.name, coords, raw.scores, raw.t_max, start, end, rounding,
            )?)
        }
        (coords, Some(costs)) => {
            if costs.len() != n || costs.iter().any(|r| r.len() != n) {
                return Err(ParseError::Json(format!("cost matrix is not {n}x{n}")));
            }
            let mut inst = Instance::from_costs(
                raw.name,
                n,
                costs.into_iter().flatten().collect(),
                raw.scores,
                raw.t_max,
                start,
                end,
            )?;
            if let Some(c) = coords.filter(|c| c.len() == n) {
                inst.coords = Some(c);
            }
            Ok(inst)
        }
        _ => Err(ParseError::Json("one of `coords` or `costs` is required".into())),
    }
}

/// Canonical JSON encoding of an instance.
pub fn write_json_string(inst: &Instance) -> String {
    let explicit = inst.rounding == CostRounding::Explicit;
    let raw = JsonInstance {
        name: inst.name.clone(),
        n: inst.n,
        start: inst.start + 1,
        end: inst.end + 1,
        t_max: inst.t_max,
        scores: inst.score.clone(),
        coords: inst.coords.clone(),
        costs: explicit.then(|| inst.cost.chunks(inst.n).map(<[f64]>::to_vec).collect()),
        rounding: Some(inst.rounding),
    };
    serde_json::to_string(&raw).expect("instance serializes")
}

/// Writes the canonical JSON encoding to `path`.
pub fn write_json(inst: &Instance, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, write_json_string(inst))
}

/// OPLib text for a coordinate-based instance with TSPLIB rounding.
///
/// Closed instances get a `DEPOT_SECTION`; open ones rely on the
/// first/last-vertex convention and must have start 1 and end n.
pub fn write_oplib_string(inst: &Instance, comment: &str) -> Option<String> {
    let weight_type = match inst.rounding {
        CostRounding::TsplibEuc2d => "EUC_2D",
        CostRounding::TsplibCeil2d => "CEIL_2D",
        CostRounding::TsplibAtt => "ATT",
        CostRounding::TsplibGeo => "GEO",
        _ => return None,
    };
    let coords = inst.coords.as_ref()?;
    if !inst.is_closed() && (inst.start != 0 || inst.end != inst.n - 1) {
        return None;
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME : {}", inst.name);
    let _ = writeln!(out, "COMMENT : {comment}");
    let _ = writeln!(out, "TYPE : OP");
    let _ = writeln!(out, "DIMENSION : {}", inst.n);
    let _ = writeln!(out, "COST_LIMIT : {}", inst.t_max);
    let _ = writeln!(out, "EDGE_WEIGHT_TYPE : {weight_type}");
    let _ = writeln!(out, "NODE_COORD_SECTION");
    for (v, c) in coords.iter().enumerate() {
        let _ = writeln!(out, "{} {} {}", v + 1, c[0], c[1]);
    }
    let _ = writeln!(out, "NODE_SCORE_SECTION");
    for (v, s) in inst.score.iter().enumerate() {
        let _ = writeln!(out, "{} {}", v + 1, s);
    }
    if inst.is_closed() {
        let _ = writeln!(out, "DEPOT_SECTION");
        let _ = writeln!(out, " {}", inst.start + 1);
        let _ = writeln!(out, " -1");
    }
    let _ = writeln!(out, "EOF");
    Some(out)
}

/// Score rule of the third OPLib generation: vertices far from the depot
/// score more, `1 + floor(99 * c(depot, i) / max_j c(depot, j))`; the depot
/// scores 0.
pub fn gen3_scores(inst: &Instance, depot: usize) -> Vec<f64> {
    let far = (0..inst.n)
        .filter(|&j| j != depot)
        .map(|j| inst.cost(depot, j))
        .fold(0.0_f64, f64::max);
    (0..inst.n)
        .map(|i| {
            if i == depot {
                0.0
            } else if far > 0.0 {
                1.0 + (99.0 * inst.cost(depot, i) / far).floor()
            } else {
                1.0
            }
        })
        .collect()
}

/// Turns a TSPLIB tour instance into a closed OP instance at vertex 1 with
/// third-generation scores and the given budget.
pub fn oplib_gen3_from_tsplib(tsp: &Instance, t_max: f64) -> Result<Instance, InstanceError> {
    let scores = gen3_scores(tsp, 0);
    let coords = tsp
        .coords
        .clone()
        .ok_or_else(|| InstanceError::InvalidRoute("TSPLIB instance has no coordinates".into()))?;
    Instance::from_coords(
        format!("{}-gen3", tsp.name),
        coords,
        scores,
        t_max,
        0,
        0,
        tsp.rounding,
    )
}

/// Parses a plain TSPLIB `TYPE: TSP` file (no scores or budget).
///
/// Scores default to 0 and the budget to the sum of all edge costs, so the
/// result is only useful as input to [`oplib_gen3_from_tsplib`].
pub fn parse_tsplib_tour_problem(text: &str, default_name: &str) -> Result<Instance, ParseError> {
    let dim = text
        .lines()
        .find_map(|l| {
            let (k, v) = l.split_once(':')?;
            (k.trim().eq_ignore_ascii_case("DIMENSION")).then(|| v.trim().parse::<usize>().ok())?
        })
        .ok_or_else(|| ParseError::MissingField("DIMENSION".into()))?;
    let mut patched = String::with_capacity(text.len() + 64 * dim);
    let mut inserted = false;
    for l in text.lines() {
        if l.trim() == "EOF" {
            continue;
        }
        if !inserted && l.trim_start().to_ascii_uppercase().starts_with("EDGE_WEIGHT_TYPE") {
            patched.push_str("COST_LIMIT : 1e300\n");
            inserted = true;
        }
        patched.push_str(l);
        patched.push('\n');
    }
    patched.push_str("NODE_SCORE_SECTION\n");
    for v in 1..=dim {
        let _ = writeln!(patched, "{v} 0");
    }
    patched.push_str("DEPOT_SECTION\n 1\n -1\nEOF\n");
    parse_oplib(&patched, default_name)
}
