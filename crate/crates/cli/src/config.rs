//! Run configuration: a TOML file overlaid with command-line flags.
//!
//! Relative paths inside a configuration file are resolved against the
//! file's own directory; paths given as flags are used as-is.
//!
//! ```toml
//! corpus = "corpus"
//! out = "runs/hcrf"
//! seed = 0
//! folds = 10
//! models = ["hcrf", "logreg"]
//!
//! [features]
//! threshold_ms = 300
//! blocks = ["embedding", "lexicon"]
//!
//! [hcrf]
//! hidden_states = [3]
//! context_windows = [0, 1]
//! l2 = [0.1]
//!
//! [logreg]
//! c = [0.1, 1.0, 10.0]
//!
//! [resources]
//! embeddings = "embeddings.txt"
//! lexicons = ["socal.tsv"]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hcrf_opinion::corpus::synthetic::SyntheticSpec;
use hcrf_opinion::evaluation::ModelSpec;
use hcrf_opinion::features::embedding::{CasePolicy, EmbeddingTable};
use hcrf_opinion::features::lexicon::Lexicon;
use hcrf_opinion::features::{FeatureBlock, FeatureConfig, FeatureResources};
use hcrf_opinion::logreg::C_GRID;
use hcrf_opinion::training::TrainingConfig;
use serde::{Deserialize, Serialize};

/// Name of the resolved configuration written into every run directory.
pub const RESOLVED_CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "run.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hcrf,
    Logreg,
    Majority,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hcrf => "hcrf",
            ModelKind::Logreg => "logreg",
            ModelKind::Majority => "majority",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcrfGrid {
    pub hidden_states: Vec<usize>,
    pub context_windows: Vec<usize>,
    pub l2: Vec<f64>,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
}

impl Default for HcrfGrid {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            hidden_states: vec![t.num_hidden_states],
            context_windows: vec![t.context_window],
            l2: vec![t.l2],
            max_iterations: t.max_iterations,
            grad_tolerance: t.grad_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregGrid {
    pub c: Vec<f64>,
}

impl Default for LogregGrid {
    fn default() -> Self {
        Self { c: C_GRID.to_vec() }
    }
}

/// External resource files. Everything else the pipeline needs ships with
/// the library.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    pub embeddings: Option<PathBuf>,
    pub lexicons: Vec<PathBuf>,
    pub case_policy: CasePolicy,
}

impl ResourcePaths {
    fn resolve_against(&mut self, base: &Path) {
        if let Some(p) = &mut self.embeddings {
            *p = base.join(&*p);
        }
        for p in &mut self.lexicons {
            *p = base.join(&*p);
        }
    }

    /// Loads whatever the enabled blocks need and nothing more.
    pub fn load(&self, blocks: &[FeatureBlock]) -> Result<FeatureResources> {
        let mut res = FeatureResources::default();
        if blocks.contains(&FeatureBlock::Embedding) {
            let path = self
                .embeddings
                .as_ref()
                .context("the embedding block is enabled but no embeddings file is configured")?;
            res.embeddings = Some(EmbeddingTable::load(path, self.case_policy)?);
        }
        if blocks.contains(&FeatureBlock::Lexicon) {
            if self.lexicons.is_empty() {
                bail!("the lexicon block is enabled but no lexicon files are configured");
            }
            res.lexicons = self.lexicons.iter().map(|p| Lexicon::load(p)).collect::<Result<_, _>>()?;
        }
        Ok(res)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub folds: usize,
    pub models: Vec<ModelKind>,
    pub features: FeatureConfig,
    pub hcrf: HcrfGrid,
    pub logreg: LogregGrid,
    pub resources: ResourcePaths,
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out: None,
            seed: 0,
            folds: 10,
            models: vec![ModelKind::Hcrf],
            features: FeatureConfig::default(),
            hcrf: HcrfGrid::default(),
            logreg: LogregGrid::default(),
            resources: ResourcePaths::default(),
            synthetic: SyntheticSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a configuration file and anchors its relative paths at the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.out].into_iter().flatten() {
            *p = base.join(&*p);
        }
        cfg.resources.resolve_against(base);
        Ok(cfg)
    }

    pub fn training_config(&self) -> TrainingConfig {
        let d = TrainingConfig::default();
        TrainingConfig {
            num_hidden_states: self.hcrf.hidden_states.first().copied().unwrap_or(d.num_hidden_states),
            context_window: self.hcrf.context_windows.first().copied().unwrap_or(d.context_window),
            l2: self.hcrf.l2.first().copied().unwrap_or(d.l2),
            max_iterations: self.hcrf.max_iterations,
            grad_tolerance: self.hcrf.grad_tolerance,
            seed: self.seed,
        }
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Hcrf => ModelSpec::Hcrf {
                training: self.training_config(),
                hidden_states: self.hcrf.hidden_states.clone(),
                context_windows: self.hcrf.context_windows.clone(),
                l2: self.hcrf.l2.clone(),
            },
            ModelKind::Logreg => ModelSpec::Logreg {
                c: self.logreg.c.clone(),
                seed: self.seed,
            },
            ModelKind::Majority => ModelSpec::Majority,
        }
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.corpus.as_deref().context("no corpus given (use --corpus or `corpus` in the config file)")
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("no output directory given (use --out or `out` in the config file)")
    }

    pub fn load_resources(&self) -> Result<FeatureResources> {
        self.resources.load(&self.features.blocks)
    }

    /// Creates the run directory and records this configuration in it.
    pub fn start_run(&self) -> Result<PathBuf> {
        let out = self.out_dir()?.to_owned();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        write_file(&out.join(RESOLVED_CONFIG_FILE), &self.to_toml()?)?;
        crate::logging::attach(&out.join(LOG_FILE));
        Ok(out)
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
