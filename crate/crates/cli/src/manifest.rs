//! Declarative experiment files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mlaco_core::aco::{AcoConfig, Deposit, Integration, Termination, UpdateRule, Variant};
use mlaco_core::classifier::{ModelKind, StepSchedule, TrainOptions};
use mlaco_core::instance::{generate_random, parse, GeneratorConfig, Instance, InstanceFormat};

use crate::UsageError;

/// Desk-scale construction budget per vertex.
pub const DESK_BUDGET_FACTOR: usize = 1000;
pub const DESK_RUNS: usize = 5;
pub const PAPER_BUDGET_FACTOR: usize = 10_000;
pub const PAPER_RUNS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub n: usize,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: [i64; 2],
}

fn default_budget() -> [i64; 2] {
    [100, 400]
}

/// Where instances come from: files matching a glob or the generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub glob: Option<String>,
    pub format: Option<String>,
    pub generate: Option<GenerateSpec>,
}

/// A loaded instance and the file it came from, if any.
pub struct Loaded {
    pub label: String,
    pub instance: Instance,
}

impl InstanceSpec {
    pub fn validate(&self, base: &Path) -> Result<()> {
        match (&self.glob, &self.generate) {
            (Some(_), Some(_)) => Err(UsageError::new("instances: give either `glob` or `generate`, not both")),
            (None, None) => Err(UsageError::new("instances: one of `glob` or `generate` is required")),
            (Some(g), None) => {
                if expand(base, g)?.is_empty() {
                    bail!(UsageError(format!("instances: no file matches `{g}`")));
                }
                Ok(())
            }
            (None, Some(g)) => {
                if g.n < 2 || g.count == 0 || g.budget[0] > g.budget[1] {
                    bail!(UsageError(format!("instances.generate: invalid parameters {g:?}")));
                }
                Ok(())
            }
        }
    }

    pub fn load(&self, base: &Path) -> Result<Vec<Loaded>> {
        if let Some(g) = &self.generate {
            let cfg = GeneratorConfig::new(g.n).with_budget(g.budget[0], g.budget[1]);
            return (0..g.count as u64)
                .map(|k| {
                    let instance = generate_random(&cfg, g.seed + k)?;
                    Ok(Loaded {
                        label: instance.name().to_string(),
                        instance,
                    })
                })
                .collect();
        }
        let pattern = self.glob.as_deref().unwrap_or_default();
        let format = self.format.as_deref().map(str::parse::<InstanceFormat>).transpose().map_err(UsageError)?;
        expand(base, pattern)?
            .into_iter()
            .map(|p| load_instance(&p, format).map(|instance| Loaded {
                label: p.display().to_string(),
                instance,
            }))
            .collect()
    }
}

/// Sorted paths matching `pattern`, relative to `base` unless absolute.
pub fn expand(base: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = if Path::new(pattern).is_absolute() {
        pattern.to_string()
    } else {
        base.join(pattern).display().to_string()
    };
    let mut out: Vec<PathBuf> = glob::glob(&full)
        .map_err(|e| UsageError(format!("bad glob `{pattern}`: {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_instance(path: &Path, format: Option<InstanceFormat>) -> Result<Instance> {
    let format = match format {
        Some(f) => f,
        None => InstanceFormat::from_path(path).with_context(|| {
            format!("cannot infer the format of {}; pass --format", path.display())
        })?,
    };
    Ok(parse(path, format)?)
}

/// One named algorithm; unset fields take the variant defaults for the
/// instance size.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub name: String,
    pub preset: Option<String>,
    pub variant: Option<Variant>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub t_pts: Option<usize>,
    pub c_scale: Option<f64>,
    pub ants: Option<usize>,
    /// Constructions per vertex.
    pub budget_factor: Option<usize>,
    /// Absolute construction budget; wins over `budget_factor`.
    pub budget: Option<usize>,
    pub update_rule: Option<UpdateRule>,
    pub integration: Option<Integration>,
    pub termination: Option<Termination>,
    pub local_search: Option<bool>,
    pub deposit: Option<Deposit>,
}

impl ConfigSpec {
    /// Effective configuration for an `n`-vertex instance. A preset (from
    /// the spec or `preset_override`) sets the base, explicit fields win.
    pub fn resolve(&self, n: usize, preset_override: Option<&str>, budget_factor: usize) -> Result<AcoConfig> {
        let preset = preset_override.or(self.preset.as_deref());
        let variant = self.variant.unwrap_or(Variant::Mmas);
        let mut cfg = match preset {
            None => AcoConfig::new(variant, n),
            Some("sota") => {
                let mut c = AcoConfig::sota(n);
                if self.variant.is_some() {
                    c.variant = variant;
                }
                c
            }
            Some(other) => bail!(UsageError(format!("unknown preset `{other}` (available: sota)"))),
        };
        cfg.budget = budget_factor * n;
        macro_rules! overlay {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        overlay!(alpha, beta, rho, delta, t_pts, c_scale, ants, update_rule, integration, termination, local_search, deposit);
        if let Some(f) = self.budget_factor {
            cfg.budget = f * n;
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        cfg.validate().map_err(|e| UsageError(format!("config `{}`: {e}", self.name)))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkManifest {
    #[serde(default)]
    pub name: String,
    pub instances: InstanceSpec,
    pub model: Option<PathBuf>,
    pub configs: Vec<ConfigSpec>,
    /// Config the others are tested against; defaults to the first.
    pub baseline: Option<String>,
    pub runs: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub budget_factor: Option<usize>,
    /// Route samples per vertex for prediction features.
    #[serde(default = "default_sample_factor")]
    pub sample_factor: usize,
    pub output: Option<PathBuf>,
}

fn default_sample_factor() -> usize {
    100
}

impl BenchmarkManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("manifest {}: {e}", path.display())).into())
    }

    pub fn baseline(&self) -> &str {
        self.baseline
            .as_deref()
            .unwrap_or_else(|| self.configs.first().map_or("", |c| c.name.as_str()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        let runs = self.runs.unwrap_or(DESK_RUNS);
        match &self.seeds {
            Some(s) => s.iter().copied().take(runs).collect(),
            None => (0..runs as u64).collect(),
        }
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        self.instances.validate(base)?;
        if self.configs.is_empty() {
            bail!(UsageError::new("manifest lists no configs"));
        }
        let mut names: Vec<&str> = self.configs.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty()) {
            bail!(UsageError::new("config names must be unique and nonempty"));
        }
        if !self.configs.iter().any(|c| c.name == self.baseline()) {
            bail!(UsageError(format!("baseline `{}` is not a listed config", self.baseline())));
        }
        let runs = self.runs.unwrap_or(DESK_RUNS);
        if runs == 0 {
            bail!(UsageError::new("runs must be positive"));
        }
        if let Some(s) = &self.seeds {
            if s.len() < runs {
                bail!(UsageError(format!("{} seeds listed for {runs} runs", s.len())));
            }
        }
        let needs_model = self.configs.iter().any(|c| {
            c.integration.map_or(c.preset.is_some(), |i| i != Integration::None)
        });
        match &self.model {
            Some(m) => {
                let p = base.join(m);
                if !p.is_file() {
                    bail!(UsageError(format!("model file {} not found", p.display())));
                }
            }
            None if needs_model => {
                bail!(UsageError::new("a config uses predictions but the manifest names no model"))
            }
            None => {}
        }
        Ok(())
    }
}

/// Inputs of `pipeline`: label instances, assemble features, train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainManifest {
    pub instances: InstanceSpec,
    #[serde(default = "default_kind")]
    pub kind: String,
    pub epochs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default = "default_sample_factor")]
    pub sample_factor: usize,
    /// Keep only the first this many proved instances.
    pub max_instances: Option<usize>,
    pub schedule: Option<StepSchedule>,
    pub output: Option<PathBuf>,
}

fn default_kind() -> String {
    "svm".into()
}

fn default_time_limit() -> f64 {
    60.0
}

impl TrainManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("manifest {}: {e}", path.display())).into())
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let kind: ModelKind = self
            .kind
            .parse()
            .map_err(|e| UsageError(format!("{e}; graph neural models are outside this toolkit")))?;
        let mut opts = TrainOptions::new(kind).with_seed(self.seed);
        if let Some(e) = self.epochs {
            opts.epochs = e;
        }
        if let Some(s) = self.schedule {
            opts.schedule = s;
        }
        Ok(opts)
    }
}
