//! Assembles the feature blocks into observation sequences.
//!
//! Blocks are always concatenated in the order
//! `bong | embedding | lexicon | pattern | paralinguistic`, whatever order
//! the configuration lists them in. Every fitted quantity (n-gram vocabulary,
//! IDF, standardizer) comes from the training documents passed to
//! [`FittedPipeline::fit`] and nothing else.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Transcript;
use crate::error::{invalid, Error, Result};
use crate::features::bong::{BongConfig, NGramVocabulary};
use crate::features::embedding::{embed_ipu, EmbeddingTable};
use crate::features::lexicon::{lexicon_features, Lexicon, LEXICON_FEATURES};
use crate::features::patterns::{default_tagset, paralinguistic_features, pattern_features, PATTERN_FEATURES};
use crate::features::resources::{LinguisticResources, MarkerCategory};
use crate::features::segment::{segment_into_ipus, Ipu};
use crate::features::standardize::Standardizer;
use crate::features::text::{IdentityNormalizer, Normalizer, PosTagger, RuleTagger, Tokenizer};
use crate::model::ObservationSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    Bong,
    Embedding,
    Lexicon,
    Pattern,
    Paralinguistic,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 5] = [
        FeatureBlock::Bong,
        FeatureBlock::Embedding,
        FeatureBlock::Lexicon,
        FeatureBlock::Pattern,
        FeatureBlock::Paralinguistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::Bong => "bong",
            FeatureBlock::Embedding => "embedding",
            FeatureBlock::Lexicon => "lexicon",
            FeatureBlock::Pattern => "pattern",
            FeatureBlock::Paralinguistic => "paralinguistic",
        }
    }

    /// Parses a comma-separated block list. `all` selects every block.
    pub fn parse_list(s: &str) -> Result<Vec<FeatureBlock>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Self::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no feature blocks selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for FeatureBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s || (s == "embeddings" && *b == FeatureBlock::Embedding))
            .ok_or_else(|| Error::Config(format!("unknown feature block {s:?} (expected one of bong, embedding, lexicon, pattern, paralinguistic)")))
    }
}

/// Whether the pipeline emits one vector per IPU or one per document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLevel {
    Ipu,
    /// BoNG over the whole document; the other blocks averaged over IPUs.
    Document,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub threshold_ms: u64,
    pub blocks: Vec<FeatureBlock>,
    pub bong: BongConfig,
    /// Z-score every non-BoNG dimension with training statistics.
    pub standardize: bool,
    /// Tags counted individually by the pattern block.
    pub tagset: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            threshold_ms: 300,
            blocks: FeatureBlock::ALL.to_vec(),
            bong: BongConfig::default(),
            standardize: true,
            tagset: default_tagset(),
        }
    }
}

impl FeatureConfig {
    fn sorted_blocks(&self) -> Result<Vec<FeatureBlock>> {
        let mut b = self.blocks.clone();
        b.sort();
        b.dedup();
        if b.is_empty() {
            return Err(Error::Config("no feature blocks selected".into()));
        }
        if self.threshold_ms == 0 {
            return Err(Error::Config("pause threshold must be positive".into()));
        }
        Ok(b)
    }
}

/// Loaded resources the extractors read from. Immutable and shareable.
#[derive(Clone)]
pub struct FeatureResources {
    pub embeddings: Option<EmbeddingTable>,
    pub lexicons: Vec<Lexicon>,
    pub linguistic: LinguisticResources,
    pub tokenizer: Tokenizer,
    pub normalizer: Arc<dyn Normalizer>,
    pub tagger: Arc<dyn PosTagger>,
}

impl Default for FeatureResources {
    fn default() -> Self {
        Self {
            embeddings: None,
            lexicons: Vec::new(),
            linguistic: LinguisticResources::default(),
            tokenizer: Tokenizer::default(),
            normalizer: Arc::new(IdentityNormalizer),
            tagger: Arc::new(RuleTagger::default()),
        }
    }
}

impl fmt::Debug for FeatureResources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureResources")
            .field("embedding_dim", &self.embeddings.as_ref().map(EmbeddingTable::dim))
            .field("lexicons", &self.lexicons.iter().map(|l| l.name.as_str()).collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchema {
    pub block: FeatureBlock,
    pub offset: usize,
    pub width: usize,
    pub features: Vec<String>,
    /// Neighbor position relative to the centre IPU when a context window is
    /// applied; 0 otherwise.
    pub position: i64,
}

/// Names and offsets of every feature dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub blocks: Vec<BlockSchema>,
    pub dim: usize,
}

impl FeatureSchema {
    fn from_widths(parts: Vec<(FeatureBlock, Vec<String>)>) -> Self {
        let mut offset = 0;
        let blocks = parts
            .into_iter()
            .map(|(block, features)| {
                let width = features.len();
                let b = BlockSchema {
                    block,
                    offset,
                    width,
                    features,
                    position: 0,
                };
                offset += width;
                b
            })
            .collect();
        Self { blocks, dim: offset }
    }

    /// Schema of vectors produced by concatenating `2w + 1` neighbors.
    pub fn with_context_window(&self, w: usize) -> Self {
        let mut blocks = Vec::new();
        for (slot, position) in (-(w as i64)..=w as i64).enumerate() {
            for b in &self.blocks {
                blocks.push(BlockSchema {
                    offset: b.offset + slot * self.dim,
                    position,
                    ..b.clone()
                });
            }
        }
        Self {
            blocks,
            dim: self.dim * (2 * w + 1),
        }
    }

    /// The block (centre position) of the given kind.
    pub fn block(&self, block: FeatureBlock) -> Option<&BlockSchema> {
        self.blocks.iter().find(|b| b.block == block && b.position == 0)
    }

    /// Human-readable name of dimension `i`, e.g. `embedding:e3` or
    /// `lexicon:swnPos@-1`.
    pub fn feature_name(&self, i: usize) -> Option<String> {
        let b = self.blocks.iter().find(|b| (b.offset..b.offset + b.width).contains(&i))?;
        let mut name = format!("{}:{}", b.block, b.features[i - b.offset]);
        if b.position != 0 {
            name.push_str(&format!("@{:+}", b.position));
        }
        Some(name)
    }

    /// Splits a vector into `(block, slice)` pairs.
    pub fn slice<'a>(&self, v: &'a [f64]) -> Result<Vec<(&BlockSchema, &'a [f64])>> {
        if v.len() != self.dim {
            return Err(invalid!("vector has dimension {}, schema expects {}", v.len(), self.dim));
        }
        Ok(self.blocks.iter().map(|b| (b, &v[b.offset..b.offset + b.width])).collect())
    }
}

/// An IPU after tokenization, normalization and tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedIpu {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub events: Vec<String>,
}

/// Pre-tagged IPUs keep their tokens as transcribed; others are tokenized,
/// normalized and tagged with the configured tagger.
pub fn prepare_ipu(ipu: &Ipu, res: &FeatureResources) -> PreparedIpu {
    let (tokens, tags) = match &ipu.pos_tags {
        Some(tags) => (ipu.tokens.clone(), tags.clone()),
        None => {
            let tokens: Vec<String> = ipu
                .tokens
                .iter()
                .flat_map(|t| res.tokenizer.tokenize(t))
                .map(|t| res.normalizer.normalize(&t))
                .filter(|t| !t.is_empty())
                .collect();
            let tags = res.tagger.tag(&tokens);
            (tokens, tags)
        }
    };
    PreparedIpu {
        tokens,
        tags,
        events: ipu.para_events.clone(),
    }
}

/// Extractor output of one block for one IPU (unstandardized).
pub fn block_features(
    block: FeatureBlock,
    ipu: &PreparedIpu,
    res: &FeatureResources,
    config: &FeatureConfig,
    vocabulary: Option<&NGramVocabulary>,
) -> Result<Vec<f64>> {
    match block {
        FeatureBlock::Bong => {
            let v = vocabulary.ok_or_else(|| Error::Config("BoNG block enabled without a fitted vocabulary".into()))?;
            Ok(v.vectorize(&ipu.tokens))
        }
        FeatureBlock::Embedding => {
            let t = res
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("embedding block enabled but no embedding table loaded".into()))?;
            Ok(embed_ipu(&ipu.tokens, t, &res.linguistic.stopwords))
        }
        FeatureBlock::Lexicon => {
            if res.lexicons.is_empty() {
                return Err(Error::Config("lexicon block enabled but no lexicon loaded".into()));
            }
            Ok(lexicon_features(&ipu.tokens, &res.lexicons, &res.linguistic))
        }
        FeatureBlock::Pattern => pattern_features(&ipu.tokens, &ipu.tags, &config.tagset, &res.linguistic),
        FeatureBlock::Paralinguistic => Ok(paralinguistic_features(&ipu.events, &res.linguistic)),
    }
}

fn block_feature_names(
    block: FeatureBlock,
    res: &FeatureResources,
    config: &FeatureConfig,
    vocabulary: Option<&NGramVocabulary>,
) -> Result<Vec<String>> {
    Ok(match block {
        FeatureBlock::Bong => vocabulary
            .ok_or_else(|| Error::Config("BoNG block enabled without a fitted vocabulary".into()))?
            .terms()
            .to_vec(),
        FeatureBlock::Embedding => {
            let t = res
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("embedding block enabled but no embedding table loaded".into()))?;
            (0..t.dim()).map(|i| format!("e{i}")).chain(["covered".to_owned()]).collect()
        }
        FeatureBlock::Lexicon => LEXICON_FEATURES.iter().map(|s| s.to_string()).collect(),
        FeatureBlock::Pattern => PATTERN_FEATURES
            .iter()
            .map(|s| s.to_string())
            .chain(config.tagset.iter().map(|t| format!("pos:{t}")))
            .collect(),
        FeatureBlock::Paralinguistic => MarkerCategory::ALL.iter().map(|c| c.name().to_owned()).collect(),
    })
}

/// Unstandardized per-IPU sequence plus the schema that describes it.
pub fn build_sequence(
    doc_id: &str,
    ipus: &[Ipu],
    res: &FeatureResources,
    config: &FeatureConfig,
    vocabulary: Option<&NGramVocabulary>,
) -> Result<(ObservationSequence, FeatureSchema)> {
    let blocks = config.sorted_blocks()?;
    let schema = FeatureSchema::from_widths(
        blocks
            .iter()
            .map(|&b| Ok((b, block_feature_names(b, res, config, vocabulary)?)))
            .collect::<Result<_>>()?,
    );
    let mut items = Vec::with_capacity(ipus.len());
    for ipu in ipus {
        let p = prepare_ipu(ipu, res);
        let mut row = Vec::with_capacity(schema.dim);
        for (b, bs) in blocks.iter().zip(&schema.blocks) {
            let f = block_features(*b, &p, res, config, vocabulary)?;
            if f.len() != bs.width {
                return Err(Error::Config(format!("{b} block produced {} values, schema says {}", f.len(), bs.width)));
            }
            row.extend(f);
        }
        items.push(row);
    }
    if items.is_empty() {
        return Err(invalid!("document {doc_id:?} has no IPUs"));
    }
    Ok((ObservationSequence::new(doc_id, items)?, schema))
}

fn document_tokens(t: &Transcript, res: &FeatureResources, threshold_ms: u64) -> Result<Vec<String>> {
    Ok(segment_into_ipus(t, threshold_ms)?
        .iter()
        .flat_map(|ipu| prepare_ipu(ipu, res).tokens)
        .collect())
}

/// Feature extraction with every training-dependent quantity frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub config: FeatureConfig,
    pub level: FeatureLevel,
    pub vocabulary: Option<NGramVocabulary>,
    pub standardizer: Option<Standardizer>,
    pub schema: FeatureSchema,
}

impl FittedPipeline {
    /// Fits the vocabulary (if BoNG is enabled) on the training documents,
    /// then the standardizer on their unstandardized vectors.
    pub fn fit(train: &[&Transcript], res: &FeatureResources, config: &FeatureConfig, level: FeatureLevel) -> Result<Self> {
        if train.is_empty() {
            return Err(invalid!("cannot fit a feature pipeline on zero documents"));
        }
        let blocks = config.sorted_blocks()?;
        let config = FeatureConfig {
            blocks,
            ..config.clone()
        };
        let vocabulary = if config.blocks.contains(&FeatureBlock::Bong) {
            let docs = train
                .par_iter()
                .map(|t| document_tokens(t, res, config.threshold_ms))
                .collect::<Result<Vec<_>>>()?;
            Some(NGramVocabulary::fit(&docs, &config.bong)?)
        } else {
            None
        };
        let mut fitted = Self {
            schema: FeatureSchema { blocks: vec![], dim: 0 },
            config,
            level,
            vocabulary,
            standardizer: None,
        };
        let raw = train
            .par_iter()
            .map(|t| fitted.raw_rows(t, res))
            .collect::<Result<Vec<_>>>()?;
        fitted.schema = raw[0].1.clone();
        if fitted.config.standardize {
            let rows: Vec<Vec<f64>> = raw.into_iter().flat_map(|(rows, _)| rows).collect();
            let mut s = Standardizer::fit(&rows)?;
            // BoNG weights are already scaled by IDF and length
            if let Some(b) = fitted.schema.block(FeatureBlock::Bong) {
                for d in b.offset..b.offset + b.width {
                    s.mean[d] = 0.0;
                    s.std[d] = 0.0;
                }
            }
            fitted.standardizer = Some(s);
        }
        Ok(fitted)
    }

    fn raw_rows(&self, t: &Transcript, res: &FeatureResources) -> Result<(Vec<Vec<f64>>, FeatureSchema)> {
        let ipus = segment_into_ipus(t, self.config.threshold_ms)?;
        match self.level {
            FeatureLevel::Ipu => {
                let (seq, schema) = build_sequence(&t.doc_id, &ipus, res, &self.config, self.vocabulary.as_ref())?;
                Ok((seq.into_items(), schema))
            }
            FeatureLevel::Document => {
                let others = FeatureConfig {
                    blocks: self.config.blocks.iter().copied().filter(|b| *b != FeatureBlock::Bong).collect(),
                    ..self.config.clone()
                };
                let mut parts = Vec::new();
                let mut row = Vec::new();
                if let Some(v) = &self.vocabulary {
                    let tokens: Vec<String> = ipus.iter().flat_map(|i| prepare_ipu(i, res).tokens).collect();
                    row.extend(v.vectorize(&tokens));
                    parts.push((FeatureBlock::Bong, v.terms().to_vec()));
                }
                if !others.blocks.is_empty() {
                    let (seq, schema) = build_sequence(&t.doc_id, &ipus, res, &others, None)?;
                    row.extend(crate::logreg::aggregate_document_vector(&seq));
                    parts.extend(schema.blocks.into_iter().map(|b| (b.block, b.features)));
                }
                Ok((vec![row], FeatureSchema::from_widths(parts)))
            }
        }
    }

    /// Standardized vectors for one document: one row per IPU, or a single
    /// row at document level.
    pub fn transform(&self, t: &Transcript, res: &FeatureResources) -> Result<ObservationSequence> {
        let (mut rows, schema) = self.raw_rows(t, res)?;
        if schema != self.schema {
            return Err(Error::Config(format!(
                "feature schema changed since fitting ({} vs {} dimensions); were the resources swapped?",
                schema.dim, self.schema.dim
            )));
        }
        if let Some(s) = &self.standardizer {
            for r in &mut rows {
                s.apply_row(r);
            }
        }
        ObservationSequence::new(t.doc_id.clone(), rows)
    }

    pub fn transform_all(&self, docs: &[&Transcript], res: &FeatureResources) -> Result<Vec<ObservationSequence>> {
        docs.par_iter().map(|t| self.transform(t, res)).collect()
    }
}
