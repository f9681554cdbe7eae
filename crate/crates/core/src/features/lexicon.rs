//! Subjectivity lexicons and per-IPU lexicon scores.
//!
//! Lexicon files are delimiter-separated with a mandatory header whose first
//! column is `word`; the remaining columns are named scores. The delimiter is
//! a tab when the header contains one, a comma otherwise. Empty cells and `-`
//! mean "no score". Recognised score columns:
//!
//! | column | channel |
//! |---|---|
//! | `swnPos`, `swnNeg`, `swnNeu` | SentiWordNet-style triple (must sum to 1) |
//! | `anewValence`, `anewArousal`, `anewDominance` | affective norms |
//! | `socalValue` | semantic-orientation prior polarity |

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordIssue, Result};
use crate::features::resources::LinguisticResources;

pub const SWN_COLUMNS: [&str; 3] = ["swnPos", "swnNeg", "swnNeu"];
pub const ANEW_COLUMNS: [&str; 3] = ["anewValence", "anewArousal", "anewDominance"];
pub const SOCAL_COLUMN: &str = "socalValue";

/// Feature names of [`lexicon_features`], in output order.
pub const LEXICON_FEATURES: [&str; 9] = [
    "swnPos",
    "swnNeg",
    "swnNeu",
    "anewValence",
    "anewArousal",
    "anewDominance",
    "socalPos",
    "socalNeg",
    "socalNeu",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub columns: Vec<String>,
    /// Lowercased word → one optional score per column.
    pub entries: BTreeMap<String, Vec<Option<f64>>>,
    /// Observed `(min, max)` per column; `None` when the column is empty.
    pub ranges: Vec<Option<(f64, f64)>>,
}

impl Lexicon {
    pub fn parse(name: &str, text: &str, path: &Path) -> Result<Self> {
        let mut issues = Vec::new();
        let issue = |line, message: String| RecordIssue {
            path: path.to_owned(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let Some((hn, header)) = lines.next() else {
            return Err(Error::Malformed(vec![issue(0, "missing header row".into())]));
        };
        let delim = if header.contains('\t') { '\t' } else { ',' };
        let cols: Vec<String> = header.split(delim).map(|c| c.trim().to_owned()).collect();
        if cols.len() < 2 || cols[0] != "word" {
            return Err(Error::Malformed(vec![issue(hn, "header must start with `word` and name at least one score".into())]));
        }
        let columns = cols[1..].to_vec();
        let swn_idx: Option<Vec<usize>> = SWN_COLUMNS
            .iter()
            .map(|c| columns.iter().position(|x| x == c))
            .collect();

        let mut entries = BTreeMap::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
            if fields.len() != cols.len() {
                issues.push(issue(n, format!("expected {} fields, found {}", cols.len(), fields.len())));
                continue;
            }
            let mut scores = Vec::with_capacity(columns.len());
            let mut bad = false;
            for (c, f) in columns.iter().zip(&fields[1..]) {
                if f.is_empty() || *f == "-" {
                    scores.push(None);
                    continue;
                }
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => scores.push(Some(v)),
                    _ => {
                        issues.push(issue(n, format!("column {c}: {f:?} is not a finite number")));
                        bad = true;
                    }
                }
            }
            if bad {
                continue;
            }
            if let Some(idx) = &swn_idx {
                let triple: Option<Vec<f64>> = idx.iter().map(|&i| scores[i]).collect();
                if let Some(t) = triple {
                    let s: f64 = t.iter().sum();
                    if (s - 1.0).abs() > 1e-6 {
                        issues.push(issue(n, format!("SentiWordNet scores sum to {s}, expected 1")));
                        continue;
                    }
                }
            }
            let word = fields[0].to_lowercase();
            if word.is_empty() {
                issues.push(issue(n, "empty word".into()));
                continue;
            }
            entries.entry(word).or_insert(scores);
        }
        if !issues.is_empty() {
            return Err(Error::Malformed(issues));
        }
        let ranges = (0..columns.len())
            .map(|c| {
                entries.values().filter_map(|s: &Vec<Option<f64>>| s[c]).fold(None, |acc, v| match acc {
                    None => Some((v, v)),
                    Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
                })
            })
            .collect();
        Ok(Self {
            name: name.to_owned(),
            columns,
            entries,
            ranges,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&name, &text, path)
    }

    pub fn score(&self, word: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.entries.get(word)?[c]
    }
}

/// First score for `word` under `column` across the lexicons, in order.
fn lookup(lexicons: &[Lexicon], word: &str, column: &str) -> Option<f64> {
    lexicons.iter().find_map(|l| l.score(word, column))
}

/// Semantic orientation of an IPU.
///
/// Each scored word's prior value is multiplied by every intensifier seen
/// earlier in the IPU; if a negator occurred earlier in the IPU, the result
/// is then shifted by `negation_shift` towards the opposite polarity. The IPU
/// score is the sum over scored words.
pub fn semantic_orientation(tokens: &[String], lexicons: &[Lexicon], res: &LinguisticResources) -> (f64, usize) {
    let mut multiplier = 1.0;
    let mut negated = false;
    let mut total = 0.0;
    let mut hits = 0;
    for t in tokens {
        let w = t.to_lowercase();
        if res.negators.contains(&w) {
            negated = true;
            continue;
        }
        if let Some(m) = res.intensifiers.get(&w) {
            multiplier *= m;
            continue;
        }
        if let Some(v) = lookup(lexicons, &w, SOCAL_COLUMN) {
            let mut value = v * multiplier;
            if negated {
                if value > 0.0 {
                    value -= res.negation_shift;
                } else if value < 0.0 {
                    value += res.negation_shift;
                }
            }
            total += value;
            hits += 1;
        }
    }
    (total, hits)
}

/// Nine lexicon channels per IPU, named by [`LEXICON_FEATURES`].
///
/// SentiWordNet and affective-norm channels are sums over the IPU's words.
/// The semantic-orientation total `S` is split into `max(S, 0)`,
/// `max(-S, 0)` and a neutral indicator that is 1 when the IPU contains
/// scored words whose contributions cancel exactly.
pub fn lexicon_features(tokens: &[String], lexicons: &[Lexicon], res: &LinguisticResources) -> Vec<f64> {
    let mut out = vec![0.0; LEXICON_FEATURES.len()];
    for t in tokens {
        let w = t.to_lowercase();
        for (k, col) in SWN_COLUMNS.iter().chain(ANEW_COLUMNS.iter()).enumerate() {
            if let Some(v) = lookup(lexicons, &w, col) {
                out[k] += v;
            }
        }
    }
    let (so, hits) = semantic_orientation(tokens, lexicons, res);
    out[6] = so.max(0.0);
    out[7] = (-so).max(0.0);
    out[8] = if hits > 0 && so == 0.0 { 1.0 } else { 0.0 };
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(text: &str) -> Lexicon {
        Lexicon::parse("t", text, Path::new("t.tsv")).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn no_hits_is_all_zero() {
        let l = lex("word\tswnPos\tswnNeg\tswnNeu\ngood\t0.5\t0\t0.5\n");
        let f = lexicon_features(&toks("the plot"), &[l], &LinguisticResources::default());
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_swn_word() {
        let l = lex("word\tswnPos\tswnNeg\tswnNeu\ngood\t0.5\t0\t0.5\n");
        let f = lexicon_features(&toks("good"), &[l], &LinguisticResources::default());
        assert_eq!(&f[..3], &[0.5, 0.0, 0.5]);
        assert!(f[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negation_shifts_toward_opposite_polarity() {
        let l = lex("word,socalValue\ngood,3\nbad,-3\n");
        let res = LinguisticResources::default();
        let f = lexicon_features(&toks("not good"), std::slice::from_ref(&l), &res);
        assert_eq!(&f[6..], &[0.0, 1.0, 0.0]);
        let f = lexicon_features(&toks("not bad"), std::slice::from_ref(&l), &res);
        assert_eq!(&f[6..], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn intensifiers_multiply_before_negation() {
        let l = lex("word\tsocalValue\ngood\t2\n");
        let res = LinguisticResources::default();
        // very = 1.25
        let (so, _) = semantic_orientation(&toks("very good"), std::slice::from_ref(&l), &res);
        assert!((so - 2.5).abs() < 1e-12);
        let (so, _) = semantic_orientation(&toks("not very good"), std::slice::from_ref(&l), &res);
        assert!((so - (2.5 - 4.0)).abs() < 1e-12);
        // slightly = 0.5
        let (so, _) = semantic_orientation(&toks("slightly good"), &[l], &res);
        assert!((so - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cancelling_scores_set_the_neutral_channel() {
        let l = lex("word\tsocalValue\ngood\t2\nbad\t-2\n");
        let f = lexicon_features(&toks("good bad"), &[l], &LinguisticResources::default());
        assert_eq!(&f[6..], &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn malformed_lexicons_fail_at_load() {
        let p = Path::new("x.tsv");
        assert!(Lexicon::parse("x", "", p).is_err());
        assert!(Lexicon::parse("x", "term\tswnPos\n", p).is_err());
        match Lexicon::parse("x", "word\tswnPos\tswnNeg\tswnNeu\ngood\t0.5\t0.5\t0.5\nbad\tz\t0\t1\n", p) {
            Err(Error::Malformed(issues)) => assert_eq!(issues.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ranges_and_missing_cells() {
        let l = lex("word\tanewValence\tanewArousal\nhappy\t8.2\t-\nsad\t2.1\t4\n");
        assert_eq!(l.ranges[0], Some((2.1, 8.2)));
        assert_eq!(l.ranges[1], Some((4.0, 4.0)));
        assert_eq!(l.score("happy", "anewArousal"), None);
    }
}
