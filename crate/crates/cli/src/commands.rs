use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use mlaco_core::aco::{run, AcoConfig, Integration, Variant};
use mlaco_core::classifier::{self, evaluate, LinearModel, ModelKind, TrainOptions};
use mlaco_core::exact::{solve_bnb, LabelRecord};
use mlaco_core::features::{extract, Dataset};
use mlaco_core::instance::{generate_random, write_json, GeneratorConfig, InstanceFormat};
use mlaco_core::stats::{wilcoxon_with, Alternative, Method};
use mlaco_core::{Instance, Route};

use crate::bench::{analyse, read_runs};
use crate::manifest::{expand, load_instance, Loaded, TrainManifest};
use crate::{
    CompareArgs, FeaturesArgs, GenerateArgs, LabelArgs, PipelineArgs, PredictArgs, SolveArgs, StatsArgs,
    TrainArgs, UsageError,
};

fn parse_format(f: Option<&str>) -> Result<Option<InstanceFormat>> {
    f.map(|s| s.parse::<InstanceFormat>().map_err(|e| UsageError(e).into()))
        .transpose()
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    s.parse::<ModelKind>().map_err(|e| {
        UsageError(format!("{e}; graph neural models are outside this toolkit")).into()
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_model(path: &Path) -> Result<LinearModel> {
    let file = fs::File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    Ok(LinearModel::read(file).with_context(|| format!("reading model {}", path.display()))?)
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    if a.n < 2 {
        bail!(UsageError(format!("--n must be at least 2, got {}", a.n)));
    }
    let (lo, hi) = a
        .budget
        .split_once(':')
        .and_then(|(l, h)| Some((l.trim().parse::<i64>().ok()?, h.trim().parse::<i64>().ok()?)))
        .filter(|(l, h)| 0 <= *l && l <= h)
        .ok_or_else(|| UsageError(format!("--budget expects `lo:hi` with 0 <= lo <= hi, got `{}`", a.budget)))?;
    create_dir(&a.out)?;
    let cfg = GeneratorConfig::new(a.n).with_budget(lo, hi);
    for k in 0..a.count as u64 {
        let inst = generate_random(&cfg, a.seed + k)?;
        let path = a.out.join(format!("{}.json", inst.name()));
        write_json(&inst, &path).with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!(
        "# {} instances in {}\n[instances]\nglob = \"{}/*.json\"\n\n[[configs]]\nname = \"MMAS\"\n\n[[configs]]\nname = \"SVM-MMAS\"\nintegration = \"eta_hat\"",
        a.count,
        a.out.display(),
        a.out.display()
    );
    Ok(())
}

fn load_inputs(inputs: &[String], format: Option<InstanceFormat>) -> Result<Vec<Loaded>> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for pattern in inputs {
        let found = expand(Path::new(""), pattern)?;
        if found.is_empty() {
            bail!(UsageError(format!("no instance file matches `{pattern}`")));
        }
        paths.extend(found);
    }
    paths
        .iter()
        .map(|p| {
            Ok(Loaded {
                label: p.display().to_string(),
                instance: load_instance(p, format)?,
            })
        })
        .collect()
}

/// Wall-clock seconds of each pipeline stage.
#[derive(Debug, Default, Serialize)]
pub struct StageTimes {
    pub solve: f64,
    pub assemble: f64,
    pub train: f64,
}

pub struct Labeled {
    pub records: Vec<LabelRecord>,
    pub data: Dataset,
}

/// Solves every instance, keeps the first `max` proved ones and labels
/// their features. Instance `k` samples with seed `seed + k`.
fn label_instances(
    instances: &[Loaded],
    time_limit: f64,
    sample_factor: usize,
    max: Option<usize>,
    seed: u64,
    times: &mut StageTimes,
) -> Result<Labeled> {
    let began = Instant::now();
    let solved = instances
        .par_iter()
        .map(|l| solve_bnb(&l.instance, time_limit).with_context(|| l.label.clone()))
        .collect::<Result<Vec<_>>>()?;
    times.solve = began.elapsed().as_secs_f64();

    let began = Instant::now();
    let mut keep = Vec::new();
    let mut records = Vec::new();
    for (k, (l, res)) in instances.iter().zip(&solved).enumerate() {
        records.push(LabelRecord {
            instance: l.label.clone(),
            optimal_route: res.route.vertices.iter().map(|v| v + 1).collect(),
            objective: res.objective,
            proved: res.proved_optimal,
            nodes_explored: res.nodes_explored,
            wall_time: res.wall_time,
        });
        if !res.proved_optimal {
            log::warn!("{} not proved optimal within {time_limit}s; not used for training", l.label);
        } else if max.map_or(true, |m| keep.len() < m) {
            keep.push((k, &l.instance, &res.route));
        }
    }
    if keep.is_empty() {
        bail!("no instance was proved optimal within {time_limit}s");
    }
    let parts = keep
        .par_iter()
        .map(|&(k, inst, route)| {
            let feats = extract(inst, sample_factor * inst.n(), seed.wrapping_add(k as u64))?;
            Ok(feats.with_labels(inst, route)?.into_dataset())
        })
        .collect::<Result<Vec<Dataset>>>()?;
    let mut data = Dataset::default();
    for p in parts {
        data.extend(p);
    }
    times.assemble = began.elapsed().as_secs_f64();
    Ok(Labeled { records, data })
}

fn write_labels(out: &Path, labeled: &Labeled) -> Result<()> {
    create_dir(out)?;
    for r in &labeled.records {
        let stem = Path::new(&r.instance)
            .file_stem()
            .map_or_else(|| r.instance.clone(), |s| s.to_string_lossy().into_owned());
        let path = out.join(format!("{stem}.label.json"));
        fs::write(&path, serde_json::to_string_pretty(r)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let path = out.join("labeled.csv");
    labeled
        .data
        .write_csv(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?)?;
    Ok(())
}

pub fn label(a: &LabelArgs) -> Result<()> {
    let instances = load_inputs(&a.inputs, parse_format(a.format.as_deref())?)?;
    let mut times = StageTimes::default();
    let labeled = label_instances(&instances, a.time_limit, a.sample_factor, a.max_instances, a.seed, &mut times)?;
    write_labels(&a.out, &labeled)?;
    let proved = labeled.records.iter().filter(|r| r.proved).count();
    let (pos, neg) = labeled.data.class_counts();
    println!(
        "{proved}/{} proved; {} rows ({pos} positive, {neg} negative) in {}",
        labeled.records.len(),
        labeled.data.len(),
        a.out.display()
    );
    Ok(())
}

pub fn features(a: &FeaturesArgs) -> Result<()> {
    let inst = load_instance(&a.instance, parse_format(a.format.as_deref())?)?;
    let m = a.samples.unwrap_or(100 * inst.n());
    let mut feats = extract(&inst, m, a.seed)?;
    if let Some(p) = &a.labels {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let record: LabelRecord = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if record.optimal_route.iter().any(|&v| v == 0 || v > inst.n()) {
            bail!("{}: route vertex out of range for n = {}", p.display(), inst.n());
        }
        let route = Route::new(&inst, record.optimal_route.iter().map(|v| v - 1).collect());
        feats = feats.with_labels(&inst, &route)?;
    }
    feats.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let kind = parse_kind(&a.kind)?;
    let mut data = Dataset::default();
    for p in &a.data {
        let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        data.extend(Dataset::read_csv(file).with_context(|| format!("reading {}", p.display()))?);
    }
    let mut opts = TrainOptions::new(kind).with_seed(a.seed);
    if let Some(e) = a.epochs {
        opts = opts.with_epochs(e);
    }
    let model = fit(&data, &opts, &a.out)?;
    let m = evaluate(&model, &data);
    println!(
        "{} rows; accuracy {:.4}, balanced {:.4}, positive recall {:.4}",
        data.len(),
        m.accuracy,
        m.balanced_accuracy,
        m.positive_recall
    );
    Ok(())
}

/// Trains and writes the model; a partial file never replaces `out`.
fn fit(data: &Dataset, opts: &TrainOptions, out: &Path) -> Result<LinearModel> {
    let model = classifier::train(data, opts)?;
    let tmp = out.with_extension("json.partial");
    model.write(fs::File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?)?;
    fs::rename(&tmp, out).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(model)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let inst = load_instance(&a.instance, parse_format(a.format.as_deref())?)?;
    let model = read_model(&a.model)?;
    let began = Instant::now();
    let feats = extract(&inst, a.samples.unwrap_or(100 * inst.n()), a.seed)?;
    let pred = classifier::predict(&model, &feats);
    log::info!("prediction took {:.3}s", began.elapsed().as_secs_f64());
    pred.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn print_route(inst: &Instance, route: &Route) {
    let vertices: Vec<String> = route.vertices.iter().map(|v| (v + 1).to_string()).collect();
    println!("objective {}", route.objective);
    println!("cost {} / {}", route.cost, inst.t_max());
    println!("route {}", vertices.join(" "));
}

pub fn solve(a: &SolveArgs) -> Result<()> {
    let inst = load_instance(&a.instance, parse_format(a.format.as_deref())?)?;
    if let Some(limit) = a.exact {
        let res = solve_bnb(&inst, limit)?;
        print_route(&inst, &res.route);
        println!(
            "proved {} after {} nodes in {:.3}s",
            res.proved_optimal, res.nodes_explored, res.wall_time
        );
        return Ok(());
    }
    let variant: Variant = serde_json::from_value(serde_json::Value::String(a.variant.to_ascii_lowercase()))
        .map_err(|_| UsageError(format!("unknown variant `{}` (as, mmas)", a.variant)))?;
    let mut cfg = match a.preset.as_deref() {
        None => AcoConfig::new(variant, inst.n()),
        Some("sota") => AcoConfig::sota(inst.n()),
        Some(other) => bail!(UsageError(format!("unknown preset `{other}` (available: sota)"))),
    };
    cfg.budget = a.budget_factor * inst.n();
    cfg.seed = a.seed;
    if let Some(i) = &a.integration {
        cfg.integration = serde_json::from_value(serde_json::Value::String(i.clone()))
            .map_err(|_| UsageError(format!("unknown integration `{i}` (none, eta, eta_hat, tau_seed)")))?;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let pred = if cfg.integration == Integration::None {
        None
    } else {
        let path = a
            .model
            .as_ref()
            .ok_or_else(|| UsageError::new("this integration needs --model"))?;
        let model = read_model(path)?;
        let feats = extract(&inst, a.samples.unwrap_or(100 * inst.n()), a.seed)?;
        Some(classifier::predict(&model, &feats))
    };
    let trace = run(&inst, &cfg, pred.as_ref())?;
    print_route(&inst, &trace.best);
    println!(
        "first iteration best {} after {} constructions in {:.3}s",
        trace.first_iteration_best(),
        trace.constructions(),
        trace.wall_time
    );
    if let Some(p) = &a.trace {
        trace.write_csv(fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?)?;
    }
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let records = read_runs(&a.runs)?;
    let report = analyse(&records, &a.baseline)?;
    print!("{}", report.table());
    Ok(())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, l)| {
            l.parse::<f64>()
                .with_context(|| format!("{}: value {} is not a number: `{l}`", path.display(), k + 1))
        })
        .collect()
}

pub fn stats(a: &StatsArgs) -> Result<()> {
    let alternative = match a.alternative.as_str() {
        "two-sided" => Alternative::TwoSided,
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        other => bail!(UsageError(format!("unknown alternative `{other}` (two-sided, greater, less)"))),
    };
    let method = match a.method.as_str() {
        "auto" => Method::Auto,
        "exact" => Method::Exact,
        "normal" => Method::Normal,
        other => bail!(UsageError(format!("unknown method `{other}` (auto, exact, normal)"))),
    };
    let (x, y) = (read_numbers(&a.a)?, read_numbers(&a.b)?);
    let r = wilcoxon_with(&x, &y, alternative, method)?;
    println!(
        "W+ = {}, n = {}, p = {:.6} ({})",
        r.w_statistic,
        r.n_effective,
        r.p_value,
        if r.exact { "exact" } else { "normal approximation" }
    );
    Ok(())
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let manifest = TrainManifest::read(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new(""));
    let mut opts = manifest.train_options()?;
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    manifest.instances.validate(base)?;
    let out = a
        .out
        .clone()
        .or_else(|| manifest.output.as_ref().map(|o| base.join(o)))
        .ok_or_else(|| UsageError::new("no output directory: pass --out or set `output`"))?;
    create_dir(&out)?;
    let instances = manifest.instances.load(base)?;
    let mut times = StageTimes::default();
    let labeled = label_instances(
        &instances,
        manifest.time_limit,
        manifest.sample_factor,
        manifest.max_instances,
        opts.seed,
        &mut times,
    )?;
    write_labels(&out.join("labels"), &labeled)?;
    let began = Instant::now();
    let model = fit(&labeled.data, &opts, &out.join("model.json"))?;
    times.train = began.elapsed().as_secs_f64();
    fs::write(out.join("timings.json"), serde_json::to_string_pretty(&times)?)?;
    let m = evaluate(&model, &labeled.data);
    println!(
        "{} rows; balanced accuracy {:.4}; solve {:.2}s, assemble {:.2}s, train {:.2}s",
        labeled.data.len(),
        m.balanced_accuracy,
        times.solve,
        times.assemble,
        times.train
    );
    Ok(())
}
