//! Tokenization, normalization and part-of-speech tagging.
//!
//! Tokenizer rules, applied to each whitespace-separated chunk:
//! 1. Runs of letters/digits, with internal apostrophes and hyphens, form words.
//! 2. Clitics split off PTB-style: `don't` → `do n't`, `it's` → `it 's`,
//!    `we're` → `we 're` (also `'ll`, `'ve`, `'d`, `'m`).
//! 3. Every other character is a punctuation token, dropped unless
//!    `keep_punctuation` is set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::resources::{parse_table, POS_LEXICON};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub keep_punctuation: bool,
}

const CLITICS: [&str; 6] = ["'s", "'re", "'ll", "'ve", "'d", "'m"];

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            let chars: Vec<char> = chunk.chars().collect();
            let mut i = 0;
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_alphanumeric()
                            || (matches!(chars[i], '\'' | '-' | '’')
                                && i + 1 < chars.len()
                                && chars[i + 1].is_alphanumeric()))
                    {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect::<String>().replace('’', "'");
                    split_clitics(&word, &mut out);
                } else {
                    if self.keep_punctuation {
                        out.push(chars[i].to_string());
                    }
                    i += 1;
                }
            }
        }
        out
    }
}

fn split_clitics(word: &str, out: &mut Vec<String>) {
    let lower = word.to_lowercase();
    if !word.is_ascii() {
        out.push(word.to_owned());
        return;
    }
    if lower.len() > 3 && lower.ends_with("n't") {
        let cut = word.len() - 3;
        out.push(word[..cut].to_owned());
        out.push(word[cut..].to_owned());
        return;
    }
    for clitic in CLITICS {
        if lower.len() > clitic.len() && lower.ends_with(clitic) {
            let cut = word.len() - clitic.len();
            out.push(word[..cut].to_owned());
            out.push(word[cut..].to_owned());
            return;
        }
    }
    out.push(word.to_owned());
}

/// Token clean-up hook (e.g. spelling correction). Runs after tokenization.
pub trait Normalizer: Send + Sync {
    fn normalize(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityNormalizer;

impl Normalizer for IdentityNormalizer {
    fn normalize(&self, token: &str) -> String {
        token.to_owned()
    }
}

/// Assigns one tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<String>;
}

/// Closed-class lexicon lookup followed by suffix rules; unknown words are
/// nouns. Tags follow a coarse universal set (`NOUN VERB ADJ ADV PRON DET ADP
/// CONJ INTJ NUM`).
#[derive(Debug, Clone)]
pub struct RuleTagger {
    lexicon: BTreeMap<String, String>,
}

impl Default for RuleTagger {
    fn default() -> Self {
        let mut lexicon = BTreeMap::new();
        for (_, cols) in parse_table(POS_LEXICON, "pos lexicon", 2).expect("shipped lexicon is well-formed") {
            // first entry wins
            lexicon.entry(cols[0].to_lowercase()).or_insert_with(|| cols[1].clone());
        }
        Self { lexicon }
    }
}

const SUFFIX_RULES: [(&str, &str); 16] = [
    ("ly", "ADV"),
    ("ing", "VERB"),
    ("ed", "VERB"),
    ("ous", "ADJ"),
    ("ful", "ADJ"),
    ("ive", "ADJ"),
    ("able", "ADJ"),
    ("ible", "ADJ"),
    ("less", "ADJ"),
    ("ish", "ADJ"),
    ("ic", "ADJ"),
    ("est", "ADJ"),
    ("tion", "NOUN"),
    ("ment", "NOUN"),
    ("ness", "NOUN"),
    ("ity", "NOUN"),
];

impl RuleTagger {
    fn tag_word(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        if let Some(t) = self.lexicon.get(&lower) {
            return t.clone();
        }
        if lower.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') && lower.chars().any(|c| c.is_ascii_digit()) {
            return "NUM".to_owned();
        }
        for (suffix, tag) in SUFFIX_RULES {
            if lower.len() > suffix.len() + 2 && lower.ends_with(suffix) {
                return tag.to_owned();
            }
        }
        "NOUN".to_owned()
    }
}

impl PosTagger for RuleTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.tag_word(t)).collect()
    }
}
