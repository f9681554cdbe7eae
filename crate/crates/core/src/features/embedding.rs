//! Word-vector tables in the common text format and IPU averaging.
//!
//! File format: one record per line, a word followed by `E` space-separated
//! decimal floats. An optional first line `count dim` is accepted and checked.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordIssue, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePolicy {
    /// Look words up verbatim.
    Exact,
    /// Lowercase both table entries and queries.
    Lowercase,
    /// Try the verbatim form, then the lowercase form.
    #[default]
    ExactThenLowercase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    /// Row-major, `words.len() × dim`.
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    case_policy: CasePolicy,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; the first occurrence of a
    /// word wins.
    pub fn from_entries(entries: Vec<(String, Vec<f64>)>, case_policy: CasePolicy) -> Result<Self> {
        let Some(dim) = entries.first().map(|(_, v)| v.len()) else {
            return Err(Error::Config("embedding table has no entries".into()));
        };
        if dim == 0 {
            return Err(Error::Config("embedding vectors must be non-empty".into()));
        }
        let mut table = Self {
            dim,
            words: Vec::with_capacity(entries.len()),
            vectors: Vec::with_capacity(entries.len() * dim),
            index: HashMap::with_capacity(entries.len()),
            case_policy,
        };
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::Config(format!("embedding for {word:?} has dimension {}, expected {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("embedding for {word:?} is not finite")));
            }
            let key = match case_policy {
                CasePolicy::Lowercase => word.to_lowercase(),
                _ => word,
            };
            if table.index.contains_key(&key) {
                log::warn!("duplicate embedding entry {key:?} ignored");
                continue;
            }
            table.index.insert(key.clone(), table.words.len());
            table.words.push(key);
            table.vectors.extend_from_slice(&v);
        }
        Ok(table)
    }

    pub fn parse(text: &str, case_policy: CasePolicy, path: &Path) -> Result<Self> {
        let mut issues = Vec::new();
        let mut entries = Vec::new();
        let mut declared: Option<(usize, usize)> = None;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if n == 1 && fields.len() == 2 {
                if let (Ok(c), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    declared = Some((c, d));
                    continue;
                }
            }
            let values: std::result::Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
            match values {
                Ok(v) if v.iter().all(|x| x.is_finite()) && !v.is_empty() => entries.push((n, fields[0].to_owned(), v)),
                _ => issues.push(RecordIssue {
                    path: path.to_owned(),
                    line: n,
                    message: "expected a word followed by finite decimal values".into(),
                }),
            }
        }
        let dim = declared.map(|(_, d)| d).or(entries.first().map(|(_, _, v)| v.len()));
        if let Some(dim) = dim {
            for (n, _, v) in &entries {
                if v.len() != dim {
                    issues.push(RecordIssue {
                        path: path.to_owned(),
                        line: *n,
                        message: format!("vector has {} values, expected {dim}", v.len()),
                    });
                }
            }
        }
        if let Some((count, _)) = declared {
            if count != entries.len() {
                log::warn!("{}: header declares {count} vectors, found {}", path.display(), entries.len());
            }
        }
        if !issues.is_empty() {
            issues.sort_by_key(|i| i.line);
            return Err(Error::Malformed(issues));
        }
        Self::from_entries(entries.into_iter().map(|(_, w, v)| (w, v)).collect(), case_policy)
    }

    pub fn load(path: &Path, case_policy: CasePolicy) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, case_policy, path)
    }

    /// Writes the table with a `count dim` header; floats use the shortest
    /// representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for x in self.row(i) {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn case_policy(&self) -> CasePolicy {
        self.case_policy
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let idx = match self.case_policy {
            CasePolicy::Exact => self.index.get(word),
            CasePolicy::Lowercase => self.index.get(&word.to_lowercase()),
            CasePolicy::ExactThenLowercase => self.index.get(word).or_else(|| self.index.get(&word.to_lowercase())),
        };
        idx.map(|&i| self.row(i))
    }
}

/// Mean of the vectors of in-vocabulary, non-stopword tokens, followed by a
/// coverage flag (1 when at least one token was covered, else 0 with a zero
/// vector). Output width is `E + 1`.
pub fn embed_ipu(tokens: &[String], table: &EmbeddingTable, stopwords: &BTreeSet<String>) -> Vec<f64> {
    let dim = table.dim();
    let mut sum = vec![0.0; dim + 1];
    let mut covered = 0usize;
    for t in tokens {
        if stopwords.contains(&t.to_lowercase()) {
            continue;
        }
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            covered += 1;
        }
    }
    if covered > 0 {
        for s in &mut sum[..dim] {
            *s /= covered as f64;
        }
        sum[dim] = 1.0;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            vec![
                ("good".into(), vec![1.0, 0.0]),
                ("Movie".into(), vec![0.0, 1.0]),
                ("the".into(), vec![9.0, 9.0]),
            ],
            CasePolicy::ExactThenLowercase,
        )
        .unwrap()
    }

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn averages_covered_tokens() {
        let stop: BTreeSet<String> = ["the".to_string()].into();
        let v = embed_ipu(&words(&["good", "Movie", "the"]), &table(), &stop);
        assert_eq!(v, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn uncovered_ipu_is_zero_with_flag_off() {
        let v = embed_ipu(&words(&["zzz", "qqq"]), &table(), &BTreeSet::new());
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn case_policies() {
        let t = table();
        assert!(t.get("GOOD").is_some());
        assert!(t.get("movie").is_none());
        let exact = EmbeddingTable::from_entries(vec![("good".into(), vec![1.0])], CasePolicy::Exact).unwrap();
        assert!(exact.get("Good").is_none());
        let lower = EmbeddingTable::from_entries(vec![("Good".into(), vec![1.0])], CasePolicy::Lowercase).unwrap();
        assert!(lower.get("GOOD").is_some());
    }

    #[test]
    fn parses_text_format_with_and_without_header() {
        let p = Path::new("mem");
        let a = EmbeddingTable::parse("2 2\ngood 1 0\nbad 0 1.5\n", CasePolicy::Exact, p).unwrap();
        let b = EmbeddingTable::parse("good 1 0\nbad 0 1.5\n", CasePolicy::Exact, p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get("bad"), Some(&[0.0, 1.5][..]));
        let round = EmbeddingTable::parse(&a.to_text(), CasePolicy::Exact, p).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn rejects_ragged_or_garbage_lines() {
        let p = Path::new("mem");
        match EmbeddingTable::parse("good 1 0\nbad 0\nugly x y\n", CasePolicy::Exact, p) {
            Err(Error::Malformed(issues)) => {
                let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
                assert_eq!(lines, vec![2, 3]);
            }
            other => panic!("{other:?}"),
        }
    }
}
