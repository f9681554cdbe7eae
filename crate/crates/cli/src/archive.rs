//! Self-contained JSON model archives.
//!
//! Floats are written in their shortest round-trip form and parsed back
//! exactly, so save → load → save is byte-identical and a reloaded model
//! reproduces its original predictions bit for bit.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hcrf_opinion::corpus::Transcript;
use hcrf_opinion::evaluation::{ModelChoice, TrainedModel};
use hcrf_opinion::features::embedding::EmbeddingTable;
use hcrf_opinion::features::{FeatureResources, FittedPipeline};
use hcrf_opinion::LabelSet;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, ResourcePaths};

pub const ARCHIVE_FORMAT: &str = "hcrf-opinion-model";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub labels: LabelSet,
    /// The configuration that was trained, after any grid selection.
    pub choice: ModelChoice,
    pub model: TrainedModel,
    /// Feature configuration, schema and every fitted statistic.
    pub pipeline: FittedPipeline,
    /// External files the pipeline reads at prediction time.
    pub resources: ResourcePaths,
    /// Training-corpus word types found in the embedding table, used for
    /// introspection.
    pub vocabulary: Vec<String>,
}

impl ModelArchive {
    pub fn new(
        labels: LabelSet,
        choice: ModelChoice,
        model: TrainedModel,
        pipeline: FittedPipeline,
        resources: ResourcePaths,
        vocabulary: Vec<String>,
    ) -> Self {
        let kind = match model {
            TrainedModel::Hcrf(_) => ModelKind::Hcrf,
            TrainedModel::Logreg(_) => ModelKind::Logreg,
            TrainedModel::Majority { .. } => ModelKind::Majority,
        };
        Self {
            format: ARCHIVE_FORMAT.to_owned(),
            version: ARCHIVE_VERSION,
            kind,
            labels,
            choice,
            model,
            pipeline,
            resources,
            vocabulary,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        if a.format != ARCHIVE_FORMAT {
            bail!("not a model archive (format {:?})", a.format);
        }
        if a.version != ARCHIVE_VERSION {
            bail!("unsupported archive version {} (expected {ARCHIVE_VERSION})", a.version);
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading archive {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("loading archive {}", path.display()))
    }

    /// Loads the resources the archived pipeline was fitted with.
    pub fn load_resources(&self) -> Result<FeatureResources> {
        self.resources.load(&self.pipeline.config.blocks)
    }
}

/// Sorted word types of `corpus` that have an embedding.
pub fn embedded_vocabulary(corpus: &[&Transcript], res: &FeatureResources) -> Vec<String> {
    let Some(table) = res.embeddings.as_ref() else {
        return Vec::new();
    };
    vocabulary_of(corpus, res, table)
}

fn vocabulary_of(corpus: &[&Transcript], res: &FeatureResources, table: &EmbeddingTable) -> Vec<String> {
    let mut words = BTreeSet::new();
    for t in corpus {
        for tok in &t.tokens {
            for w in res.tokenizer.tokenize(&tok.text) {
                let w = res.normalizer.normalize(&w);
                if !w.is_empty() && table.get(&w).is_some() {
                    words.insert(w);
                }
            }
        }
    }
    words.into_iter().collect()
}
