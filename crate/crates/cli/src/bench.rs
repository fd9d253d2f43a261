//! The `benchmark` command: every (config, instance, seed) cell, then
//! summaries, paired tests and normalized curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mlaco_core::aco::{run, AcoConfig, Integration, RunTrace};
use mlaco_core::classifier::{predict, LinearModel, Prediction};
use mlaco_core::features::extract;
use mlaco_core::stats::{normalize_curves, wilcoxon_signed_rank};

use crate::manifest::{BenchmarkManifest, Loaded, DESK_BUDGET_FACTOR, PAPER_BUDGET_FACTOR, PAPER_RUNS};
use crate::{PartialFailure, UsageError};

pub struct BenchOptions {
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub paper_scale: bool,
    pub seed: Option<u64>,
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: String,
    pub instance: String,
    pub seed: u64,
    pub config_hash: String,
    pub best_objective: Option<f64>,
    pub first_iteration: Option<f64>,
    pub constructions: Option<usize>,
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

pub fn config_hash(cfg: &AcoConfig) -> String {
    let mut c = cfg.clone();
    c.seed = 0;
    let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn sanitize(label: &str) -> String {
    let stem = Path::new(label)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| label.to_string());
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

struct Cell<'a> {
    config: usize,
    instance: usize,
    seed: u64,
    cfg: AcoConfig,
    pred: Option<&'a Prediction>,
}

pub fn benchmark(manifest_path: &Path, opts: &BenchOptions) -> Result<()> {
    let mut manifest = BenchmarkManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    if opts.paper_scale {
        manifest.budget_factor = Some(PAPER_BUDGET_FACTOR);
        manifest.runs = Some(PAPER_RUNS);
        if manifest.seeds.as_ref().is_some_and(|s| s.len() < PAPER_RUNS) {
            manifest.seeds = None;
        }
    }
    if let Some(s) = opts.seed {
        let runs = manifest.runs.unwrap_or(crate::manifest::DESK_RUNS) as u64;
        manifest.seeds = Some((s..s + runs).collect());
    }
    manifest.validate(&base)?;
    let out = opts
        .out
        .clone()
        .or_else(|| manifest.output.as_ref().map(|o| base.join(o)))
        .ok_or_else(|| UsageError::new("no output directory: pass --out or set `output`"))?;
    let budget_factor = manifest.budget_factor.unwrap_or(DESK_BUDGET_FACTOR);
    let seeds = manifest.seed_list();

    let instances = manifest.instances.load(&base)?;
    let model = match &manifest.model {
        Some(m) => {
            let p = base.join(m);
            let file = fs::File::open(&p).with_context(|| format!("opening model {}", p.display()))?;
            Some(LinearModel::read(file)?)
        }
        None => None,
    };

    // resolve every config on every instance before any work starts
    let mut resolved: Vec<Vec<AcoConfig>> = Vec::new();
    for spec in &manifest.configs {
        let mut per = Vec::new();
        for inst in &instances {
            let cfg = spec.resolve(inst.instance.n(), opts.preset.as_deref(), budget_factor)?;
            if cfg.integration != Integration::None && model.is_none() {
                bail!(UsageError(format!(
                    "config `{}` uses predictions but the manifest names no model",
                    spec.name
                )));
            }
            per.push(cfg);
        }
        resolved.push(per);
    }
    let needs_pred = resolved.iter().flatten().any(|c| c.integration != Integration::None);
    let predictions: Vec<Option<Prediction>> = instances
        .par_iter()
        .enumerate()
        .map(|(k, l)| {
            if !needs_pred {
                return Ok(None);
            }
            let feats = extract(&l.instance, manifest.sample_factor * l.instance.n(), k as u64)
                .with_context(|| format!("features for {}", l.label))?;
            Ok(Some(predict(model.as_ref().expect("checked above"), &feats)))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (c, per) in resolved.iter().enumerate() {
        for (i, cfg) in per.iter().enumerate() {
            for &seed in &seeds {
                let pred = (cfg.integration != Integration::None).then(|| predictions[i].as_ref()).flatten();
                cells.push(Cell {
                    config: c,
                    instance: i,
                    seed,
                    cfg: cfg.clone().with_seed(seed),
                    pred,
                });
            }
        }
    }
    log::info!("{} cells over {} instances", cells.len(), instances.len());
    let results: Vec<(RunRecord, Option<RunTrace>)> = cells
        .par_iter()
        .map(|cell| {
            let name = &manifest.configs[cell.config].name;
            let label = &instances[cell.instance].label;
            let mut record = RunRecord {
                config: name.clone(),
                instance: label.clone(),
                seed: cell.seed,
                config_hash: config_hash(&cell.cfg),
                best_objective: None,
                first_iteration: None,
                constructions: None,
                wall_time: None,
                error: None,
            };
            match run(&instances[cell.instance].instance, &cell.cfg, cell.pred) {
                Ok(trace) => {
                    record.best_objective = Some(trace.best_objective());
                    record.first_iteration = Some(trace.first_iteration_best());
                    record.constructions = Some(trace.constructions());
                    record.wall_time = Some(trace.wall_time);
                    (record, Some(trace))
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    (record, None)
                }
            }
        })
        .collect();

    write_report(&out, &manifest, &instances, &resolved, &results)?;
    let failed = results.iter().filter(|r| r.0.error.is_some()).count();
    println!("report written to {}", out.display());
    if failed > 0 {
        bail!(PartialFailure(failed));
    }
    Ok(())
}

fn write_report(
    out: &Path,
    manifest: &BenchmarkManifest,
    instances: &[Loaded],
    resolved: &[Vec<AcoConfig>],
    results: &[(RunRecord, Option<RunTrace>)],
) -> Result<()> {
    fs::create_dir_all(out.join("traces")).with_context(|| format!("creating {}", out.display()))?;

    // provenance: the effective config of every (config, instance)
    let effective: BTreeMap<&str, BTreeMap<&str, &AcoConfig>> = manifest
        .configs
        .iter()
        .zip(resolved)
        .map(|(spec, per)| {
            (
                spec.name.as_str(),
                instances.iter().map(|l| l.label.as_str()).zip(per).collect(),
            )
        })
        .collect();
    let provenance = serde_json::json!({ "manifest": manifest, "effective_configs": effective });
    fs::write(out.join("effective.json"), serde_json::to_string_pretty(&provenance)?)?;

    let mut w = csv::Writer::from_path(out.join("runs.csv"))?;
    for (r, _) in results {
        w.serialize(r)?;
    }
    w.flush()?;

    for (r, trace) in results {
        if let Some(t) = trace {
            let name = format!("{}__{}__s{}.csv", sanitize(&r.config), sanitize(&r.instance), r.seed);
            t.write_csv(fs::File::create(out.join("traces").join(name))?)?;
        }
    }

    let records: Vec<RunRecord> = results.iter().map(|r| r.0.clone()).collect();
    let report = analyse(&records, manifest.baseline())?;
    fs::write(out.join("summary.csv"), report.summary_csv())?;
    fs::write(out.join("comparisons.csv"), report.comparisons_csv())?;
    fs::write(out.join("report.txt"), report.table())?;
    print!("{}", report.table());

    // curves normalized by the baseline's final best on the same (instance, seed)
    let mut curves_csv = String::from("config,constructions,normalized_best\n");
    let by_key: BTreeMap<(&str, &str, u64), &RunTrace> = results
        .iter()
        .filter_map(|(r, t)| t.as_ref().map(|t| ((r.config.as_str(), r.instance.as_str(), r.seed), t)))
        .collect();
    for spec in &manifest.configs {
        let mut traces = Vec::new();
        let mut bases = Vec::new();
        for (&(c, i, s), t) in &by_key {
            if c == spec.name {
                if let Some(b) = by_key.get(&(manifest.baseline(), i, s)) {
                    traces.push(t.checkpoints.clone());
                    bases.push(b.checkpoints.clone());
                }
            }
        }
        match normalize_curves(&traces, &bases) {
            Ok(curve) => {
                for (c, v) in curve {
                    writeln!(curves_csv, "{},{c},{v}", spec.name)?;
                }
            }
            Err(e) => log::warn!("no normalized curve for `{}`: {e}", spec.name),
        }
    }
    fs::write(out.join("curves.csv"), curves_csv)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub config: String,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    /// Wilcoxon across seeds against the baseline on this instance.
    pub p_value: Option<f64>,
    pub better: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub config: String,
    pub baseline: String,
    pub instances: usize,
    pub mean: f64,
    pub baseline_mean: f64,
    pub p_value: f64,
    pub better: bool,
}

pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub comparisons: Vec<Comparison>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Per-instance summaries and pooled paired tests against `baseline`.
pub fn analyse(records: &[RunRecord], baseline: &str) -> Result<Report> {
    // (instance, config) -> seed -> objective
    let mut cells: BTreeMap<(&str, &str), BTreeMap<u64, f64>> = BTreeMap::new();
    let mut configs: Vec<&str> = Vec::new();
    let mut instances: Vec<&str> = Vec::new();
    for r in records {
        if !configs.contains(&r.config.as_str()) {
            configs.push(&r.config);
        }
        if !instances.contains(&r.instance.as_str()) {
            instances.push(&r.instance);
        }
        if let Some(y) = r.best_objective {
            cells.entry((&r.instance, &r.config)).or_default().insert(r.seed, y);
        }
    }
    if !configs.contains(&baseline) {
        bail!(UsageError(format!("baseline `{baseline}` has no runs")));
    }
    let mut rows = Vec::new();
    for &inst in &instances {
        let base = cells.get(&(inst, baseline));
        for &cfg in &configs {
            let Some(vals) = cells.get(&(inst, cfg)) else { continue };
            let ys: Vec<f64> = vals.values().copied().collect();
            let (mean, std) = mean_std(&ys);
            let mut p_value = None;
            let mut better = false;
            if cfg != baseline {
                if let Some(b) = base {
                    let common: Vec<(f64, f64)> = vals
                        .iter()
                        .filter_map(|(s, y)| b.get(s).map(|x| (*y, *x)))
                        .collect();
                    if !common.is_empty() {
                        let a: Vec<f64> = common.iter().map(|c| c.0).collect();
                        let bb: Vec<f64> = common.iter().map(|c| c.1).collect();
                        let cmp = wilcoxon_signed_rank(&a, &bb)?;
                        better = cmp.p_value < 0.05 && mean > mean_std(&bb).0;
                        p_value = Some(cmp.p_value);
                    }
                }
            }
            rows.push(SummaryRow {
                instance: inst.to_string(),
                config: cfg.to_string(),
                runs: ys.len(),
                mean,
                std,
                p_value,
                better,
            });
        }
    }
    let mut comparisons = Vec::new();
    for &cfg in configs.iter().filter(|&&c| c != baseline) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &inst in &instances {
            let mean_of = |c: &str| rows.iter().find(|r| r.instance == inst && r.config == c).map(|r| r.mean);
            if let (Some(x), Some(y)) = (mean_of(cfg), mean_of(baseline)) {
                a.push(x);
                b.push(y);
            }
        }
        if a.is_empty() {
            continue;
        }
        let cmp = wilcoxon_signed_rank(&a, &b)?;
        let (ma, mb) = (mean_std(&a).0, mean_std(&b).0);
        comparisons.push(Comparison {
            config: cfg.to_string(),
            baseline: baseline.to_string(),
            instances: a.len(),
            mean: ma,
            baseline_mean: mb,
            p_value: cmp.p_value,
            better: cmp.p_value < 0.05 && ma > mb,
        });
    }
    Ok(Report {
        rows,
        comparisons,
    })
}

impl Report {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("instance,config,runs,mean,std,p_value,better\n");
        for r in &self.rows {
            let p = r.p_value.map(|p| format!("{p:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{:.4},{:.4},{p},{}", r.instance, r.config, r.runs, r.mean, r.std, r.better);
        }
        s
    }

    pub fn comparisons_csv(&self) -> String {
        let mut s = String::from("config,baseline,instances,mean,baseline_mean,p_value,better\n");
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{},{},{},{:.4},{:.4},{:.6},{}",
                c.config, c.baseline, c.instances, c.mean, c.baseline_mean, c.p_value, c.better
            );
        }
        s
    }

    /// Instances as rows, `mean std` per config, `*` marking significant wins.
    pub fn table(&self) -> String {
        let mut configs: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !configs.contains(&r.config.as_str()) {
                configs.push(&r.config);
            }
        }
        let width = self.rows.iter().map(|r| r.instance.len()).max().unwrap_or(8).max(8);
        let mut s = format!("{:width$}", "instance");
        for c in &configs {
            let _ = write!(s, " | {c:>22}");
        }
        s.push('\n');
        let mut instances: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !instances.contains(&r.instance.as_str()) {
                instances.push(&r.instance);
            }
        }
        for inst in instances {
            let _ = write!(s, "{inst:width$}");
            for c in &configs {
                match self.rows.iter().find(|r| r.instance == inst && r.config == *c) {
                    Some(r) => {
                        let mark = if r.better { "*" } else { " " };
                        let _ = write!(s, " | {:>12.2} {:>7.2}{mark}", r.mean, r.std);
                    }
                    None => {
                        let _ = write!(s, " | {:>22}", "-");
                    }
                }
            }
            s.push('\n');
        }
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{} vs {} over {} instances: {:.2} vs {:.2}, p = {:.4}{}",
                c.config,
                c.baseline,
                c.instances,
                c.mean,
                c.baseline_mean,
                c.p_value,
                if c.better { " *" } else { "" }
            );
        }
        s
    }
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(config: &str, instance: &str, seed: u64, y: f64) -> RunRecord {
        RunRecord {
            config: config.into(),
            instance: instance.into(),
            seed,
            config_hash: String::new(),
            best_objective: Some(y),
            first_iteration: None,
            constructions: None,
            wall_time: None,
            error: None,
        }
    }

    #[test]
    fn single_cell_report_has_one_row() {
        let report = analyse(&[rec("MMAS", "a", 0, 10.0)], "MMAS").unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.comparisons.is_empty());
        assert_eq!(report.rows[0].std, 0.0);
    }

    #[test]
    fn pooled_comparison_uses_instance_means() {
        let mut records = Vec::new();
        for k in 0..8 {
            let inst = format!("i{k}");
            for s in 0..3 {
                records.push(rec("base", &inst, s, 100.0 + k as f64));
                records.push(rec("new", &inst, s, 110.0 + k as f64 + s as f64));
            }
        }
        let report = analyse(&records, "base").unwrap();
        let c = &report.comparisons[0];
        assert_eq!(c.instances, 8);
        assert!((c.mean - c.baseline_mean - 11.0).abs() < 1e-12);
        assert_eq!(c.p_value, 2.0 / 256.0);
        assert!(c.better);
        assert!(report.table().contains("new vs base over 8 instances"));
    }

    #[test]
    fn hash_ignores_seed() {
        let a = AcoConfig::new(mlaco_core::aco::Variant::Mmas, 10);
        assert_eq!(config_hash(&a), config_hash(&a.clone().with_seed(9)));
        assert_ne!(config_hash(&a), config_hash(&a.clone().with_budget(1)));
    }
}
