//! Linguistic-pattern and paralinguistic counts per IPU.

use crate::error::{invalid, Result};
use crate::features::resources::{LinguisticResources, MarkerCategory};

/// Pattern counts that precede the per-tag counts, in output order.
pub const PATTERN_FEATURES: [&str; 6] = [
    "adjNoun",
    "negation",
    "amplifier",
    "downtoner",
    "disfluency",
    "capitalized",
];

/// Default tags counted individually: six content/function classes plus
/// interjections and pronouns.
pub fn default_tagset() -> Vec<String> {
    ["NOUN", "VERB", "ADJ", "ADV", "CONJ", "ADP", "INTJ", "PRON"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Counts, in order: adjective-noun bigrams, negators, amplifiers,
/// downtoners, disfluencies, capitalized tokens, then one count per tag of
/// `tagset`.
///
/// A disfluency is a filled-pause token from the resource list or an
/// immediate repetition of the previous token (case-insensitive).
pub fn pattern_features(tokens: &[String], tags: &[String], tagset: &[String], res: &LinguisticResources) -> Result<Vec<f64>> {
    if tokens.len() != tags.len() {
        return Err(invalid!(
            "{} POS tags for {} tokens",
            tags.len(),
            tokens.len()
        ));
    }
    let mut out = vec![0.0; PATTERN_FEATURES.len() + tagset.len()];
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    for (i, w) in lower.iter().enumerate() {
        if i + 1 < tags.len() && tags[i] == "ADJ" && tags[i + 1] == "NOUN" {
            out[0] += 1.0;
        }
        if res.negators.contains(w) {
            out[1] += 1.0;
        }
        if res.is_amplifier(w) {
            out[2] += 1.0;
        }
        if res.is_downtoner(w) {
            out[3] += 1.0;
        }
        if res.disfluencies.contains(w) || (i > 0 && lower[i - 1] == *w) {
            out[4] += 1.0;
        }
        if tokens[i].chars().next().is_some_and(char::is_uppercase) {
            out[5] += 1.0;
        }
        if let Some(k) = tagset.iter().position(|t| *t == tags[i]) {
            out[PATTERN_FEATURES.len() + k] += 1.0;
        }
    }
    Ok(out)
}

/// Marker counts per [`MarkerCategory`], in `MarkerCategory::ALL` order.
/// Unknown markers land in the `other` bucket and are logged.
pub fn paralinguistic_features(events: &[String], res: &LinguisticResources) -> Vec<f64> {
    let mut out = vec![0.0; MarkerCategory::ALL.len()];
    for e in events {
        let cat = res.marker_category(e);
        if cat == MarkerCategory::Other {
            log::info!("unknown paralinguistic marker {e:?} counted as other");
        }
        let k = MarkerCategory::ALL.iter().position(|c| *c == cat).unwrap_or(MarkerCategory::ALL.len() - 1);
        out[k] += 1.0;
    }
    out
}
