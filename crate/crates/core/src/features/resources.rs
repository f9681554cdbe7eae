//! Versioned word lists shipped with the crate.
//!
//! Each resource file starts with a `#version N` line; other `#` lines are
//! comments. Tabular resources carry a header row after the comments.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STOPWORDS: &str = include_str!("../../resources/stopwords.txt");
pub const PARALINGUISTIC_MARKERS: &str = include_str!("../../resources/paralinguistic_markers.tsv");
pub const INTENSIFIERS: &str = include_str!("../../resources/intensifiers.tsv");
pub const NEGATORS: &str = include_str!("../../resources/negators.txt");
pub const DISFLUENCIES: &str = include_str!("../../resources/disfluencies.txt");
pub const POS_LEXICON: &str = include_str!("../../resources/pos_lexicon.tsv");

/// Shift applied to a negated semantic-orientation value, towards the
/// opposite polarity.
pub const NEGATION_SHIFT: f64 = 4.0;

/// Paralinguistic marker categories, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerCategory {
    Intonation,
    Pronunciation,
    Laughter,
    Volume,
    Other,
}

impl MarkerCategory {
    pub const ALL: [MarkerCategory; 5] = [
        MarkerCategory::Intonation,
        MarkerCategory::Pronunciation,
        MarkerCategory::Laughter,
        MarkerCategory::Volume,
        MarkerCategory::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarkerCategory::Intonation => "intonation",
            MarkerCategory::Pronunciation => "pronunciation",
            MarkerCategory::Laughter => "laughter",
            MarkerCategory::Volume => "volume",
            MarkerCategory::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Word lists and constants used by the rule-based extractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticResources {
    pub stopwords: BTreeSet<String>,
    pub negators: BTreeSet<String>,
    /// word → multiplier; amplifiers are > 1, downtoners < 1.
    pub intensifiers: BTreeMap<String, f64>,
    pub disfluencies: BTreeSet<String>,
    pub marker_categories: BTreeMap<String, MarkerCategory>,
    pub negation_shift: f64,
}

impl Default for LinguisticResources {
    fn default() -> Self {
        Self::shipped().expect("shipped resources are well-formed")
    }
}

impl LinguisticResources {
    pub fn shipped() -> Result<Self> {
        let intensifiers = parse_table(INTENSIFIERS, "intensifiers", 2)?
            .into_iter()
            .map(|(line, cols)| {
                let m: f64 = cols[1]
                    .parse()
                    .map_err(|_| Error::Config(format!("intensifiers line {line}: bad multiplier {:?}", cols[1])))?;
                Ok((cols[0].to_lowercase(), m))
            })
            .collect::<Result<_>>()?;
        let marker_categories = parse_table(PARALINGUISTIC_MARKERS, "paralinguistic markers", 2)?
            .into_iter()
            .map(|(line, cols)| {
                let cat = MarkerCategory::parse(&cols[1])
                    .ok_or_else(|| Error::Config(format!("markers line {line}: unknown category {:?}", cols[1])))?;
                Ok((cols[0].to_lowercase(), cat))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            stopwords: parse_list(STOPWORDS),
            negators: parse_list(NEGATORS),
            intensifiers,
            disfluencies: parse_list(DISFLUENCIES),
            marker_categories,
            negation_shift: NEGATION_SHIFT,
        })
    }

    pub fn is_amplifier(&self, word: &str) -> bool {
        self.intensifiers.get(word).is_some_and(|m| *m > 1.0)
    }

    pub fn is_downtoner(&self, word: &str) -> bool {
        self.intensifiers.get(word).is_some_and(|m| *m < 1.0)
    }

    /// Category of a marker given with or without its surrounding asterisks.
    pub fn marker_category(&self, marker: &str) -> MarkerCategory {
        let key = marker.trim().trim_matches('*').trim().to_lowercase();
        self.marker_categories.get(&key).copied().unwrap_or(MarkerCategory::Other)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_list(text: &str) -> BTreeSet<String> {
    content_lines(text).map(|(_, l)| l.trim().to_lowercase()).collect()
}

/// Rows of a tab-separated table after its header, as `(line, columns)`.
pub(crate) fn parse_table(text: &str, what: &str, min_cols: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = content_lines(text);
    if lines.next().is_none() {
        return Err(Error::Config(format!("{what}: missing header row")));
    }
    lines
        .map(|(n, l)| {
            let cols: Vec<String> = l.split('\t').map(|c| c.trim().to_owned()).collect();
            if cols.len() < min_cols {
                return Err(Error::Config(format!("{what} line {n}: expected {min_cols} columns")));
            }
            Ok((n, cols))
        })
        .collect()
}
