//! Synthetic opinion-dynamics corpora with known ground truth.
//!
//! A document is a run of segments separated by long pauses. Each segment
//! carries one polarity: its tokens are drawn from that polarity's word list
//! or from the neutral list. The document label is the polarity of the LAST
//! segment. In a "mixed" document the first `k` segments (uniform in
//! `1..n`) carry the opposite polarity, so the multiset of words says how
//! many segments of each polarity there are but not which came last.
//!
//! Because segments are drawn independently given their polarity, the pair
//! `(n, #positive segments)` is a sufficient statistic for any
//! order-insensitive classifier; [`order_insensitive_bayes_accuracy`]
//! enumerates the generator's outcome space over that statistic.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ParaMarker, TimedToken, Transcript};
use crate::error::{Error, Result};
use crate::features::embedding::{CasePolicy, EmbeddingTable};
use crate::model::Label;

pub const POSITIVE_WORDS: [&str; 16] = [
    "great",
    "excellent",
    "wonderful",
    "brilliant",
    "fantastic",
    "superb",
    "lovely",
    "amazing",
    "enjoyable",
    "charming",
    "delightful",
    "beautiful",
    "hilarious",
    "gripping",
    "moving",
    "fun",
];

pub const NEGATIVE_WORDS: [&str; 16] = [
    "awful",
    "terrible",
    "boring",
    "dreadful",
    "horrible",
    "dull",
    "stupid",
    "painful",
    "annoying",
    "lame",
    "poor",
    "weak",
    "mediocre",
    "disappointing",
    "tedious",
    "bad",
];

pub const NEUTRAL_WORDS: [&str; 24] = [
    "movie",
    "film",
    "plot",
    "actor",
    "actress",
    "scene",
    "story",
    "director",
    "ending",
    "character",
    "camera",
    "music",
    "dialogue",
    "script",
    "sequel",
    "theater",
    "popcorn",
    "ticket",
    "trailer",
    "screen",
    "saw",
    "watched",
    "think",
    "guess",
];

const MARKERS: [&str; 4] = ["*chuckling*", "*falling intonation*", "*word elongation*", "*loud*"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    /// Probability that a document's label is positive.
    pub positive_fraction: f64,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Probability that a document opens with opposite-polarity segments.
    pub mixed_fraction: f64,
    pub min_tokens_per_segment: usize,
    pub max_tokens_per_segment: usize,
    /// Probability that a token after the first in a segment is polar; the
    /// first token of every segment is always polar.
    pub polar_rate: f64,
    /// Number of words taken from each polarity list (at most 16).
    pub polar_vocabulary: usize,
    /// Number of neutral words used (at most 24).
    pub neutral_vocabulary: usize,
    pub embedding_dim: usize,
    /// Half-width of the uniform noise added to each embedding coordinate.
    pub embedding_noise: f64,
    /// Probability that a segment carries one paralinguistic marker, chosen
    /// independently of polarity.
    pub marker_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_docs: 500,
            positive_fraction: 0.5,
            min_segments: 3,
            max_segments: 6,
            mixed_fraction: 0.8,
            min_tokens_per_segment: 4,
            max_tokens_per_segment: 8,
            polar_rate: 0.5,
            polar_vocabulary: 16,
            neutral_vocabulary: 24,
            embedding_dim: 8,
            embedding_noise: 0.3,
            marker_rate: 0.2,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.polar_vocabulary == 0 {
            return bad("no polarity-bearing tokens");
        }
        if self.polar_vocabulary > POSITIVE_WORDS.len() || self.neutral_vocabulary > NEUTRAL_WORDS.len() {
            return bad("vocabulary larger than the built-in word lists");
        }
        if self.num_docs == 0 {
            return bad("num_docs must be positive");
        }
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return bad("segment range must satisfy 1 <= min <= max");
        }
        if self.mixed_fraction > 0.0 && self.min_segments < 2 {
            return bad("mixed documents need at least two segments");
        }
        if self.min_tokens_per_segment == 0 || self.min_tokens_per_segment > self.max_tokens_per_segment {
            return bad("token range must satisfy 1 <= min <= max");
        }
        for (name, p) in [
            ("positive_fraction", self.positive_fraction),
            ("mixed_fraction", self.mixed_fraction),
            ("polar_rate", self.polar_rate),
            ("marker_rate", self.marker_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.polar_rate < 1.0 && self.neutral_vocabulary == 0 {
            return bad("neutral tokens requested but the neutral vocabulary is empty");
        }
        if self.embedding_dim < 2 || !(self.embedding_noise >= 0.0 && self.embedding_noise.is_finite()) {
            return bad("embedding_dim must be >= 2 and embedding_noise finite and >= 0");
        }
        Ok(())
    }

    pub fn positive_words(&self) -> Vec<String> {
        POSITIVE_WORDS[..self.polar_vocabulary].iter().map(|s| s.to_string()).collect()
    }

    pub fn negative_words(&self) -> Vec<String> {
        NEGATIVE_WORDS[..self.polar_vocabulary].iter().map(|s| s.to_string()).collect()
    }

    pub fn neutral_words(&self) -> Vec<String> {
        NEUTRAL_WORDS[..self.neutral_vocabulary].iter().map(|s| s.to_string()).collect()
    }
}

/// Generated documents plus the resources and ground truth that go with them.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub transcripts: Vec<Transcript>,
    pub embeddings: EmbeddingTable,
    /// Lexicon file contents (`word`, `socalValue`, SWN triple).
    pub lexicon_text: String,
    pub bayes_accuracy: f64,
}

/// Exact accuracy of the best order-insensitive classifier for `spec`,
/// obtained by enumerating every `(label, n, mixed, k)` outcome and summing,
/// per observable `(n, #positive segments)`, the larger label mass.
pub fn order_insensitive_bayes_accuracy(spec: &SyntheticSpec) -> Result<f64> {
    spec.validate()?;
    let n_choices = (spec.max_segments - spec.min_segments + 1) as f64;
    let mut mass: BTreeMap<(usize, usize), [f64; 2]> = BTreeMap::new();
    for (y, py) in [(0usize, 1.0 - spec.positive_fraction), (1, spec.positive_fraction)] {
        for n in spec.min_segments..=spec.max_segments {
            let pn = py / n_choices;
            let positives = |segments_of_label: usize| if y == 1 { segments_of_label } else { n - segments_of_label };
            mass.entry((n, positives(n))).or_insert([0.0; 2])[y] += pn * (1.0 - spec.mixed_fraction);
            if n >= 2 {
                for k in 1..n {
                    let p = pn * spec.mixed_fraction / (n - 1) as f64;
                    mass.entry((n, positives(n - k))).or_insert([0.0; 2])[y] += p;
                }
            }
        }
    }
    Ok(mass.values().map(|m| m[0].max(m[1])).sum())
}

fn uniform_between(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

fn synthetic_embeddings(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<EmbeddingTable> {
    let mut entries = Vec::new();
    let noise = spec.embedding_noise;
    let vector = |rng: &mut ChaCha8Rng, axis: Option<usize>| -> Vec<f64> {
        (0..spec.embedding_dim)
            .map(|d| {
                let base = if Some(d) == axis { 1.0 } else { 0.0 };
                let e = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
                base + e
            })
            .collect()
    };
    for w in spec.positive_words() {
        let v = vector(rng, Some(0));
        entries.push((w, v));
    }
    for w in spec.negative_words() {
        let v = vector(rng, Some(1));
        entries.push((w, v));
    }
    for w in spec.neutral_words() {
        let v = vector(rng, None);
        entries.push((w, v));
    }
    EmbeddingTable::from_entries(entries, CasePolicy::ExactThenLowercase)
}

fn synthetic_lexicon(spec: &SyntheticSpec) -> String {
    let mut out = String::from("word\tsocalValue\tswnPos\tswnNeg\tswnNeu\n");
    for w in spec.positive_words() {
        out.push_str(&format!("{w}\t3\t0.75\t0\t0.25\n"));
    }
    for w in spec.negative_words() {
        out.push_str(&format!("{w}\t-3\t0\t0.75\t0.25\n"));
    }
    out
}

/// Deterministic corpus for `(spec, seed)`. Documents are `syn0000`,
/// `syn0001`, ...; valences are 4 or 5 for positive and 1 or 2 for negative
/// documents.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    let bayes_accuracy = order_insensitive_bayes_accuracy(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embeddings = synthetic_embeddings(spec, &mut rng)?;
    let pos = spec.positive_words();
    let neg = spec.negative_words();
    let neutral = spec.neutral_words();
    let width = spec.num_docs.saturating_sub(1).to_string().len().max(4);

    let mut transcripts = Vec::with_capacity(spec.num_docs);
    for d in 0..spec.num_docs {
        let label = if rng.gen_bool(spec.positive_fraction) { Label::POSITIVE } else { Label::NEGATIVE };
        let n = uniform_between(&mut rng, spec.min_segments, spec.max_segments);
        let opposite_prefix = if n >= 2 && rng.gen_bool(spec.mixed_fraction) { rng.gen_range(1..n) } else { 0 };

        let mut t = Transcript {
            doc_id: format!("syn{d:0width$}"),
            tokens: Vec::new(),
            markers: Vec::new(),
            valences: vec![if label == Label::POSITIVE {
                rng.gen_range(4..=5) as f64
            } else {
                rng.gen_range(1..=2) as f64
            }],
        };
        let mut clock: u64 = rng.gen_range(0..200);
        for s in 0..n {
            let positive = (label == Label::POSITIVE) != (s < opposite_prefix);
            let polar = if positive { &pos } else { &neg };
            if s > 0 {
                clock += rng.gen_range(600..=1200);
            }
            let len = uniform_between(&mut rng, spec.min_tokens_per_segment, spec.max_tokens_per_segment);
            let marker_at = rng.gen_bool(spec.marker_rate).then(|| rng.gen_range(0..len));
            for i in 0..len {
                if i > 0 {
                    clock += if rng.gen_bool(0.85) { rng.gen_range(20..=140) } else { rng.gen_range(200..=450) };
                }
                let word = if i == 0 || rng.gen_bool(spec.polar_rate) {
                    &polar[rng.gen_range(0..polar.len())]
                } else {
                    &neutral[rng.gen_range(0..neutral.len())]
                };
                let dur = rng.gen_range(120..=380);
                t.tokens.push(TimedToken {
                    text: word.clone(),
                    start_ms: clock,
                    end_ms: clock + dur,
                    pos: None,
                });
                if marker_at == Some(i) {
                    t.markers.push(ParaMarker {
                        text: MARKERS[rng.gen_range(0..MARKERS.len())].to_owned(),
                        timestamp_ms: clock + dur / 2,
                    });
                }
                clock += dur;
            }
        }
        transcripts.push(t);
    }
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        seed,
        transcripts,
        embeddings,
        lexicon_text: synthetic_lexicon(spec),
        bayes_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::transcript_to_string;

    #[test]
    fn closed_form_matches_enumeration() {
        let spec = SyntheticSpec::default();
        let rho = 1.0 - spec.mixed_fraction;
        let expected = rho + (1.0 - rho) * spec.positive_fraction.max(1.0 - spec.positive_fraction);
        assert!((order_insensitive_bayes_accuracy(&spec).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn noise_free_spec_is_fully_separable() {
        let spec = SyntheticSpec {
            mixed_fraction: 0.0,
            ..SyntheticSpec::default()
        };
        assert!((order_insensitive_bayes_accuracy(&spec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fully_mixed_spec_is_a_coin_flip_for_bags() {
        let spec = SyntheticSpec {
            mixed_fraction: 1.0,
            ..SyntheticSpec::default()
        };
        assert!((order_insensitive_bayes_accuracy(&spec).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let no_polar = SyntheticSpec {
            polar_vocabulary: 0,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&no_polar, 0).is_err());
        let one_segment = SyntheticSpec {
            min_segments: 1,
            max_segments: 1,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&one_segment, 0).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec {
            num_docs: 20,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        let text = |c: &SyntheticCorpus| c.transcripts.iter().map(transcript_to_string).collect::<String>();
        assert_eq!(text(&a), text(&b));
        assert_eq!(a.embeddings.to_text(), b.embeddings.to_text());
        assert_ne!(text(&a), text(&generate_synthetic(&spec, 8).unwrap()));
    }

    #[test]
    fn last_segment_sets_the_label() {
        let spec = SyntheticSpec {
            num_docs: 50,
            ..SyntheticSpec::default()
        };
        let c = generate_synthetic(&spec, 3).unwrap();
        for t in &c.transcripts {
            assert!(t.problems().is_empty());
            let last = &t.tokens.last().unwrap().text;
            // the last segment's first token is polar; find the last polar token
            let last_polar = t
                .tokens
                .iter()
                .rev()
                .find(|tok| POSITIVE_WORDS.contains(&tok.text.as_str()) || NEGATIVE_WORDS.contains(&tok.text.as_str()))
                .unwrap();
            let positive = POSITIVE_WORDS.contains(&last_polar.text.as_str());
            assert_eq!(t.polarity() == Some(Label::POSITIVE), positive, "{} ends with {last}", t.doc_id);
        }
    }
}
