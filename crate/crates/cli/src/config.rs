//! The TOML run configuration and its command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use funcgnn::experiment::RunConfig;
use funcgnn::gnn::{EncoderSpec, LayerKind};
use funcgnn::graph::{EdgeMask, FeatureMask, NodeMask};
use funcgnn::hiernet::{ModelSpec, TierSpec, Wiring};
use serde::{Deserialize, Serialize};

/// Method names accepted in `experiment.methods` and `model.kind`.
pub const METHODS: [&str; 6] = ["sage", "gcn", "gat", "gin", "linear", "mlp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// CSV export or `graphs.json`; the only setting without a default.
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub n_runs: usize,
    /// 0 means one worker per core.
    pub workers: usize,
    pub top_k: usize,
    pub train: TrainSection,
    pub mask: MaskSection,
    pub model: ModelSection,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            dataset: None,
            output_dir: PathBuf::from("runs"),
            seed: 0,
            n_runs: 20,
            workers: 0,
            top_k: 3,
            train: TrainSection::default(),
            mask: MaskSection::default(),
            model: ModelSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr_max: f64,
    pub lr_min: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Train, validation and test shares.
    pub fractions: [f64; 3],
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = RunConfig::default();
        Self {
            lr_max: d.lr_max,
            lr_min: d.lr_min,
            max_epochs: d.max_epochs,
            patience: d.patience,
            batch_size: d.batch_size,
            fractions: [d.fractions.0, d.fractions.1, d.fractions.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSection {
    pub node: String,
    pub edge: String,
}

impl Default for MaskSection {
    fn default() -> Self {
        Self {
            node: "all".into(),
            edge: "all".into(),
        }
    }
}

/// Architecture of `train` runs. Unset fields take the tuned value of the
/// layer kind; set fields apply to every graph method of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub wiring: Wiring,
    pub kind: String,
    pub num_layers: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub heads: Option<usize>,
    pub epsilon_learnable: Option<bool>,
    pub head_hidden: Option<Vec<usize>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            wiring: Wiring::Hierarchical,
            kind: "sage".into(),
            num_layers: None,
            hidden_dim: None,
            heads: None,
            epsilon_learnable: None,
            head_hidden: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub methods: Vec<String>,
    /// Also run `model.kind` with hierarchical and independent tiers.
    pub compare_wiring: bool,
    pub ablation: bool,
    /// Runs per ablation mask; defaults to `n_runs`.
    pub ablation_runs: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            compare_wiring: true,
            ablation: false,
            ablation_runs: None,
        }
    }
}

/// Values given on the command line; each beats the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub n_runs: Option<usize>,
    pub max_epochs: Option<usize>,
}

/// `path:line` of a byte offset, 1-based.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(text, s.start));
            anyhow!("{}:{line}: {}", path.display(), e.message())
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read config", path.display()))?;
        Self::parse(&text, path)
    }

    /// Defaults, then the optional file, then the flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.dataset {
            self.dataset = Some(d.clone());
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(n) = o.n_runs {
            self.n_runs = n;
        }
        if let Some(e) = o.max_epochs {
            self.train.max_epochs = e;
        }
    }

    pub fn feature_mask(&self) -> Result<FeatureMask, Vec<String>> {
        let detail = |field: &str, e: funcgnn::Error| match e {
            funcgnn::Error::Config(m) => format!("mask.{field}: {m}"),
            other => format!("mask.{field}: {other}"),
        };
        let node = self.mask.node.parse::<NodeMask>().map_err(|e| detail("node", e));
        let edge = self.mask.edge.parse::<EdgeMask>().map_err(|e| detail("edge", e));
        match (node, edge) {
            (Ok(node), Ok(edge)) => Ok(FeatureMask { node, edge }),
            (n, e) => Err(n.err().into_iter().chain(e.err()).collect()),
        }
    }

    /// Architecture for one method name, with `[model]` overrides applied.
    pub fn model_spec(&self, method: &str) -> Result<ModelSpec, String> {
        let m = &self.model;
        let spec = match method {
            "linear" => ModelSpec::linear_baseline(),
            "mlp" => ModelSpec::mlp_baseline(),
            other => {
                let kind: LayerKind = other.parse().map_err(|_| format!("unknown method `{other}`"))?;
                let mut enc = EncoderSpec::tuned(kind);
                enc.num_layers = m.num_layers.unwrap_or(enc.num_layers);
                enc.hidden_dim = m.hidden_dim.unwrap_or(enc.hidden_dim);
                enc.heads = m.heads.unwrap_or(enc.heads);
                enc.epsilon_learnable = m.epsilon_learnable.unwrap_or(enc.epsilon_learnable);
                let mut tier = TierSpec::gnn(enc);
                if let Some(h) = &m.head_hidden {
                    tier.head_hidden = h.clone();
                }
                ModelSpec {
                    wiring: m.wiring,
                    tiers: std::array::from_fn(|_| tier.clone()),
                }
            }
        };
        Ok(spec.with_wiring(m.wiring))
    }

    /// Run settings for `method`; assumes [`Config::problems`] is empty.
    pub fn run_config(&self, method: &str) -> anyhow::Result<RunConfig> {
        let t = &self.train;
        Ok(RunConfig {
            seed: self.seed,
            model: self.model_spec(method).map_err(|e| anyhow!(e))?,
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            max_epochs: t.max_epochs,
            patience: t.patience,
            batch_size: t.batch_size,
            fractions: (t.fractions[0], t.fractions[1], t.fractions[2]),
            mask: self.feature_mask().map_err(|p| anyhow!(p.join("; ")))?,
            top_k: self.top_k,
        })
    }

    /// Every violated constraint. `needs_dataset` is false for commands that
    /// take their data elsewhere.
    pub fn problems(&self, needs_dataset: bool) -> Vec<String> {
        let mut p = Vec::new();
        if needs_dataset && self.dataset.is_none() {
            p.push("dataset: no path given (set `dataset` or pass --dataset)".to_string());
        }
        if self.n_runs == 0 {
            p.push("n_runs must be at least 1".to_string());
        }
        if self.top_k == 0 {
            p.push("top_k must be at least 1".to_string());
        }
        if self.experiment.ablation_runs == Some(0) {
            p.push("experiment.ablation_runs must be at least 1".to_string());
        }
        if self.experiment.methods.is_empty() {
            p.push("experiment.methods is empty".to_string());
        }
        let mask_ok = match self.feature_mask() {
            Ok(_) => true,
            Err(e) => {
                p.extend(e);
                false
            }
        };
        for m in &self.experiment.methods {
            if !METHODS.contains(&m.as_str()) {
                p.push(format!("experiment.methods: unknown method `{m}`"));
            }
        }
        let kind_ok = METHODS.contains(&self.model.kind.as_str());
        if !kind_ok {
            p.push(format!("model.kind: unknown method `{}`", self.model.kind));
        }
        if mask_ok && kind_ok {
            if let Ok(rc) = self.run_config(&self.model.kind) {
                p.extend(rc.problems());
            }
        }
        p
    }

    pub fn validate(&self, needs_dataset: bool) -> anyhow::Result<()> {
        let p = self.problems(needs_dataset);
        if p.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  {}", p.join("\n  "))
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn dataset_path(&self) -> anyhow::Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| anyhow!("dataset: no path given"))
    }
}
