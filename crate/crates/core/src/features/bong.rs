//! Bag-of-n-grams over Porter stems with TF-IDF weighting.
//!
//! Tokens are lowercased and stemmed; unigrams, bigrams and trigrams are
//! joined with `_`. Weight of a term in a unit = `count · idf / token_count`
//! with `idf = ln(N / df)` over the training documents, so a term present in
//! every training document gets weight 0. Terms unseen at fit time are
//! ignored.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BongConfig {
    /// Longest n-gram, 1 to 3.
    pub max_order: usize,
    /// Keep only the most frequent terms (by document frequency, ties broken
    /// lexicographically). `None` keeps everything.
    pub max_vocabulary: Option<usize>,
    pub min_document_frequency: usize,
}

impl Default for BongConfig {
    fn default() -> Self {
        Self {
            max_order: 3,
            max_vocabulary: None,
            min_document_frequency: 1,
        }
    }
}

pub fn stem(token: &str) -> String {
    porter_stemmer::stem(&token.to_lowercase())
}

/// All n-grams of order `1..=max_order`, in order of occurrence.
pub fn ngrams(tokens: &[String], max_order: usize) -> Vec<String> {
    let stems: Vec<String> = tokens.iter().map(|t| stem(t)).collect();
    let mut out = Vec::new();
    for n in 1..=max_order.max(1) {
        for w in stems.windows(n) {
            out.push(w.join("_"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawVocabulary", into = "RawVocabulary")]
pub struct NGramVocabulary {
    config: BongConfig,
    num_documents: usize,
    terms: Vec<String>,
    document_frequency: Vec<usize>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawVocabulary {
    config: BongConfig,
    num_documents: usize,
    terms: Vec<String>,
    document_frequency: Vec<usize>,
    idf: Vec<f64>,
}

impl From<RawVocabulary> for NGramVocabulary {
    fn from(r: RawVocabulary) -> Self {
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            config: r.config,
            num_documents: r.num_documents,
            terms: r.terms,
            document_frequency: r.document_frequency,
            idf: r.idf,
            index,
        }
    }
}

impl From<NGramVocabulary> for RawVocabulary {
    fn from(v: NGramVocabulary) -> Self {
        Self {
            config: v.config,
            num_documents: v.num_documents,
            terms: v.terms,
            document_frequency: v.document_frequency,
            idf: v.idf,
        }
    }
}

impl NGramVocabulary {
    /// Fits document frequencies and IDF on training documents only.
    pub fn fit<S: AsRef<[String]>>(train_docs: &[S], config: &BongConfig) -> Result<Self> {
        if !(1..=3).contains(&config.max_order) {
            return Err(Error::Config(format!("n-gram order must be 1..=3, got {}", config.max_order)));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in train_docs {
            let mut grams = ngrams(doc.as_ref(), config.max_order);
            grams.sort_unstable();
            grams.dedup();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = df
            .into_iter()
            .filter(|(_, c)| *c >= config.min_document_frequency)
            .collect();
        if let Some(cap) = config.max_vocabulary {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(cap);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
        if kept.is_empty() {
            return Err(Error::Config("n-gram vocabulary is empty after fitting".into()));
        }
        let n = train_docs.len();
        let (terms, document_frequency): (Vec<String>, Vec<usize>) = kept.into_iter().unzip();
        let idf = document_frequency.iter().map(|&d| (n as f64 / d as f64).ln()).collect();
        Ok(RawVocabulary {
            config: config.clone(),
            num_documents: n,
            terms,
            document_frequency,
            idf,
        }
        .into())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Length-normalized TF-IDF vector of one unit (IPU or whole document).
    pub fn vectorize(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.terms.len()];
        if tokens.is_empty() {
            return v;
        }
        for g in ngrams(tokens, self.config.max_order) {
            if let Some(i) = self.index_of(&g) {
                v[i] += 1.0;
            }
        }
        let len = tokens.len() as f64;
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf / len;
        }
        v
    }
}
