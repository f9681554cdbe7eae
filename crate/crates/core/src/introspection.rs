//! Read-only analyses of a trained HCRF: label/state compatibility,
//! transition structure, top-weighted features and activation words.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::embedding::EmbeddingTable;
use crate::features::standardize::Standardizer;
use crate::features::{FeatureBlock, FeatureSchema};
use crate::model::{HcrfParameters, Label, LabelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    pub weight: f64,
}

/// Per hidden state, the features with positive weight sorted by descending
/// weight (lower index first on ties), at most `k` of them.
pub fn top_features_per_state(theta: &HcrfParameters, schema: &FeatureSchema, k: usize) -> Result<Vec<Vec<RankedFeature>>> {
    if schema.dim != theta.feature_dim() {
        return Err(Error::Config(format!(
            "schema describes {} features, model has {}",
            schema.dim,
            theta.feature_dim()
        )));
    }
    (0..theta.num_hidden_states())
        .map(|h| {
            let mut idx: Vec<usize> = (0..schema.dim).filter(|&i| theta.observation(h)[i] > 0.0).collect();
            let row = theta.observation(h);
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx.truncate(k);
            idx.into_iter()
                .map(|i| {
                    Ok(RankedFeature {
                        index: i,
                        name: schema.feature_name(i).ok_or_else(|| invalid!("feature {i} outside schema"))?,
                        weight: row[i],
                    })
                })
                .collect()
        })
        .collect()
}

/// Maps a word vector into the model's embedding coordinates and scores it
/// against each hidden state.
///
/// When the pipeline standardized its features, the same affine map is
/// applied to the word vector, so scores are what a one-word IPU made of
/// that word would contribute. The coverage flag is left out: it is the same
/// for every word.
#[derive(Debug, Clone)]
pub struct EmbeddingProbe<'a> {
    theta: &'a HcrfParameters,
    /// Start of the centre embedding block in model coordinates.
    model_offset: usize,
    /// Start of the embedding block in (unwindowed) pipeline coordinates.
    base_offset: usize,
    dim: usize,
    standardizer: Option<&'a Standardizer>,
}

impl<'a> EmbeddingProbe<'a> {
    /// `schema` describes the model's input (already windowed if a context
    /// window was used); `base_schema` describes the pipeline output that
    /// `standardizer` was fitted on.
    pub fn new(
        theta: &'a HcrfParameters,
        schema: &FeatureSchema,
        base_schema: &FeatureSchema,
        standardizer: Option<&'a Standardizer>,
    ) -> Result<Self> {
        if schema.dim != theta.feature_dim() {
            return Err(Error::Config(format!(
                "schema describes {} features, model has {}",
                schema.dim,
                theta.feature_dim()
            )));
        }
        let missing = || Error::Config("the model has no embedding block".into());
        let centre = schema.block(FeatureBlock::Embedding).ok_or_else(missing)?;
        let base = base_schema.block(FeatureBlock::Embedding).ok_or_else(missing)?;
        if let Some(s) = standardizer {
            if s.dim() != base_schema.dim {
                return Err(Error::Config("standardizer does not match the feature schema".into()));
            }
        }
        Ok(Self {
            theta,
            model_offset: centre.offset,
            base_offset: base.offset,
            // last column is the coverage flag
            dim: centre.width - 1,
            standardizer,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim
    }

    /// Score of `vector` under every hidden state.
    pub fn scores(&self, vector: &[f64]) -> Result<Vec<f64>> {
        if vector.len() != self.dim {
            return Err(invalid!("word vector has dimension {}, model expects {}", vector.len(), self.dim));
        }
        let z: Vec<f64> = vector
            .iter()
            .enumerate()
            .map(|(e, v)| match self.standardizer {
                Some(s) => {
                    let d = self.base_offset + e;
                    let c = v - s.mean[d];
                    if s.std[d] > 0.0 {
                        c / s.std[d]
                    } else {
                        c
                    }
                }
                None => *v,
            })
            .collect();
        Ok((0..self.theta.num_hidden_states())
            .map(|h| {
                let w = &self.theta.observation(h)[self.model_offset..self.model_offset + self.dim];
                w.iter().zip(&z).map(|(a, b)| a * b).sum()
            })
            .collect())
    }
}

/// The `k` vocabulary words with the highest activation of `state`,
/// descending, ties in lexicographic order. Words without a vector are
/// skipped.
pub fn activation_words(
    probe: &EmbeddingProbe<'_>,
    state: usize,
    table: &EmbeddingTable,
    vocabulary: &[String],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if state >= probe.theta.num_hidden_states() {
        return Err(invalid!("state {state} out of range"));
    }
    let mut scored = Vec::new();
    for w in vocabulary {
        if let Some(v) = table.get(w) {
            scored.push((w.clone(), probe.scores(v)?[state]));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.dedup_by(|a, b| a.0 == b.0);
    scored.truncate(k);
    Ok(scored)
}

/// Per-state activation of one word, or `None` when the word has no vector.
pub fn word_state_profile(probe: &EmbeddingProbe<'_>, word: &str, table: &EmbeddingTable) -> Result<Option<Vec<f64>>> {
    table.get(word).map(|v| probe.scores(v)).transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateAlignment {
    pub state: usize,
    /// Label the state favours by more than the margin, if any.
    pub aligned: Option<Label>,
    /// `θ_s(positive, h) − θ_s(negative, h)`.
    pub difference: f64,
    pub compatibility: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCharacter {
    pub tau: f64,
    pub states: Vec<StateAlignment>,
    /// `transitions[y][from][to]`.
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl StateCharacter {
    pub fn aligned_to(&self, label: Label) -> Vec<usize> {
        self.states.iter().filter(|s| s.aligned == Some(label)).map(|s| s.state).collect()
    }
}

/// Population standard deviation of all `θ_s` entries.
pub fn default_margin(theta: &HcrfParameters) -> f64 {
    let v: Vec<f64> = (0..theta.num_labels())
        .flat_map(|y| (0..theta.num_hidden_states()).map(move |h| (y, h)))
        .map(|(y, h)| theta.state(y, h))
        .collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Labels each state as aligned with label `y` when
/// `θ_s(y, h) − θ_s(y', h) > tau`, neutral otherwise. `tau` defaults to
/// [`default_margin`].
pub fn state_character(theta: &HcrfParameters, tau: Option<f64>) -> Result<StateCharacter> {
    if theta.num_labels() != 2 {
        return Err(invalid!("state character needs exactly 2 labels, model has {}", theta.num_labels()));
    }
    let tau = tau.unwrap_or_else(|| default_margin(theta));
    let hs = theta.num_hidden_states();
    let states = (0..hs)
        .map(|h| {
            let d = theta.state(1, h) - theta.state(0, h);
            let aligned = if d > tau {
                Some(Label::POSITIVE)
            } else if -d > tau {
                Some(Label::NEGATIVE)
            } else {
                None
            };
            StateAlignment {
                state: h,
                aligned,
                difference: d,
                compatibility: vec![theta.state(0, h), theta.state(1, h)],
            }
        })
        .collect();
    let transitions = (0..2)
        .map(|y| (0..hs).map(|a| (0..hs).map(|b| theta.transition(y, a, b)).collect()).collect())
        .collect();
    Ok(StateCharacter { tau, states, transitions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub state: usize,
    pub character: String,
    pub compatibility: Vec<f64>,
    pub top_features: Vec<RankedFeature>,
    pub activation_words: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub labels: Vec<String>,
    pub tau: f64,
    pub states: Vec<StateSummary>,
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Rows for selected words: per-state activation.
    pub word_profiles: Vec<(String, Option<Vec<f64>>)>,
}

/// Everything needed to explain a model in embedding terms.
pub struct EmbeddingContext<'a> {
    pub table: &'a EmbeddingTable,
    pub vocabulary: &'a [String],
    pub base_schema: &'a FeatureSchema,
    pub standardizer: Option<&'a Standardizer>,
    pub profile_words: &'a [String],
}

pub fn state_report(
    theta: &HcrfParameters,
    schema: &FeatureSchema,
    labels: &LabelSet,
    k: usize,
    tau: Option<f64>,
    embedding: Option<EmbeddingContext<'_>>,
) -> Result<StateReport> {
    let character = state_character(theta, tau)?;
    let top = top_features_per_state(theta, schema, k)?;
    let probe = match &embedding {
        Some(ctx) if schema.block(FeatureBlock::Embedding).is_some() => {
            Some(EmbeddingProbe::new(theta, schema, ctx.base_schema, ctx.standardizer)?)
        }
        _ => None,
    };
    let mut states = Vec::new();
    for (h, feats) in top.into_iter().enumerate() {
        let a = &character.states[h];
        let words = match (&probe, &embedding) {
            (Some(p), Some(ctx)) => activation_words(p, h, ctx.table, ctx.vocabulary, k)?,
            _ => Vec::new(),
        };
        states.push(StateSummary {
            state: h,
            character: a
                .aligned
                .map_or("neutral".to_owned(), |l| labels.name(l).unwrap_or("?").to_owned()),
            compatibility: a.compatibility.clone(),
            top_features: feats,
            activation_words: words,
        });
    }
    let word_profiles = match (&probe, &embedding) {
        (Some(p), Some(ctx)) => ctx
            .profile_words
            .iter()
            .map(|w| Ok((w.clone(), word_state_profile(p, w, ctx.table)?)))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    Ok(StateReport {
        labels: labels.names().to_vec(),
        tau: character.tau,
        states,
        transitions: character.transitions,
        word_profiles,
    })
}

impl StateReport {
    /// Plain-text rendering laid out like the per-state tables of the
    /// original analysis.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("alignment margin tau = {:.4}\n\n", self.tau));
        out.push_str("state\tcharacter");
        for l in &self.labels {
            out.push_str(&format!("\ttheta_s({l})"));
        }
        out.push('\n');
        for s in &self.states {
            out.push_str(&format!("{}\t{}", s.state, s.character));
            for c in &s.compatibility {
                out.push_str(&format!("\t{c:.4}"));
            }
            out.push('\n');
        }
        for (y, m) in self.transitions.iter().enumerate() {
            out.push_str(&format!("\ntransitions given {}\n", self.labels.get(y).map_or("?", String::as_str)));
            for row in m {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
                out.push_str(&cells.join("\t"));
                out.push('\n');
            }
        }
        for s in &self.states {
            out.push_str(&format!("\nstate {} ({}) top features\n", s.state, s.character));
            for f in &s.top_features {
                out.push_str(&format!("  {}\t{:.4}\n", f.name, f.weight));
            }
            if !s.activation_words.is_empty() {
                let words: Vec<&str> = s.activation_words.iter().map(|(w, _)| w.as_str()).collect();
                out.push_str(&format!("  activation words: {}\n", words.join(", ")));
            }
        }
        if !self.word_profiles.is_empty() {
            out.push_str("\nword");
            for s in &self.states {
                out.push_str(&format!("\tstate {}", s.state));
            }
            out.push('\n');
            for (w, p) in &self.word_profiles {
                match p {
                    Some(p) => {
                        let cells: Vec<String> = p.iter().map(|v| format!("{v:.2}")).collect();
                        out.push_str(&format!("{w}\t{}\n", cells.join("\t")));
                    }
                    None => out.push_str(&format!("{w}\tnot in embedding table\n")),
                }
            }
        }
        out
    }
}
