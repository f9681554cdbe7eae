//! Transcript corpora: in-memory types, the on-disk format, class filtering
//! and corpus statistics.
//!
//! # On-disk format
//!
//! A corpus is a directory holding `manifest.tsv` and one transcript file per
//! document. Both are tab-separated, start with a format-version line and
//! carry a mandatory header row.
//!
//! ```text
//! #format opinion-corpus-manifest 1
//! doc_id  valence  file
//! rev001  4;5      rev001.tsv
//! rev002  -        rev002.tsv
//! ```
//!
//! `valence` lists one score per annotator (`;`-separated, each in `[1, 5]`)
//! or `-` when the document is unlabeled.
//!
//! ```text
//! #format opinion-transcript 1
//! doc_id  text          start_ms  end_ms  pos
//! rev001  I             0         110     PRON
//! rev001  *chuckling*   130       130     -
//! ```
//!
//! Rows whose text is wrapped in asterisks are paralinguistic markers placed
//! at `start_ms`; all other rows are tokens. `pos` is optional (`-`).

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordIssue, Result};
use crate::features::segment::segment_into_ipus;
use crate::model::Label;

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_VERSION_LINE: &str = "#format opinion-corpus-manifest 1";
pub const TRANSCRIPT_VERSION_LINE: &str = "#format opinion-transcript 1";
const MANIFEST_HEADER: &str = "doc_id\tvalence\tfile";
const TRANSCRIPT_HEADER: &str = "doc_id\ttext\tstart_ms\tend_ms\tpos";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedToken {
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub pos: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaMarker {
    /// Marker text including its asterisks, e.g. `*chuckling*`.
    pub text: String,
    pub timestamp_ms: u64,
}

/// Polarity class after reconciling annotator valences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValenceClass {
    Negative,
    Neutral,
    Positive,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub doc_id: String,
    pub tokens: Vec<TimedToken>,
    pub markers: Vec<ParaMarker>,
    /// One valence per annotator, each in `[1, 5]`; empty when unlabeled.
    pub valences: Vec<f64>,
}

impl Transcript {
    pub fn mean_valence(&self) -> Option<f64> {
        if self.valences.is_empty() {
            None
        } else {
            Some(self.valences.iter().sum::<f64>() / self.valences.len() as f64)
        }
    }

    pub fn valence_class(&self) -> ValenceClass {
        match self.mean_valence() {
            None => ValenceClass::Unlabeled,
            Some(v) if v < 3.0 => ValenceClass::Negative,
            Some(v) if v > 3.0 => ValenceClass::Positive,
            Some(_) => ValenceClass::Neutral,
        }
    }

    /// Negative below 3, positive above 3; neutral and unlabeled documents
    /// have no polarity.
    pub fn polarity(&self) -> Option<Label> {
        match self.valence_class() {
            ValenceClass::Negative => Some(Label::NEGATIVE),
            ValenceClass::Positive => Some(Label::POSITIVE),
            _ => None,
        }
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    /// Violations of the transcript invariants, as human-readable messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = check_doc_id(&self.doc_id) {
            out.push(e);
        }
        if self.tokens.is_empty() && self.markers.is_empty() {
            out.push("document has no tokens or markers".to_owned());
        }
        for v in &self.valences {
            if !(1.0..=5.0).contains(v) {
                out.push(format!("valence {v} outside [1, 5]"));
            }
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.end_ms < t.start_ms {
                out.push(format!("token {i} ({:?}) ends before it starts", t.text));
            }
            if i > 0 && t.start_ms < self.tokens[i - 1].start_ms {
                out.push(format!("token {i} ({:?}) starts before the previous token", t.text));
            }
            if t.text.is_empty() || t.text.contains(['\t', '\n']) {
                out.push(format!("token {i} has empty text or contains a tab/newline"));
            }
        }
        out
    }
}

fn check_doc_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() || id.contains(['\t', '\n', '\r', '/', '\\']) || id.starts_with('.') {
        Err(format!("invalid document id {id:?}"))
    } else {
        Ok(())
    }
}

fn is_marker(text: &str) -> bool {
    text.len() >= 2 && text.starts_with('*') && text.ends_with('*')
}

/// Strips the version line and header, checking both.
fn body_lines<'a>(
    text: &'a str,
    path: &Path,
    version: &str,
    header: &str,
    issues: &mut Vec<RecordIssue>,
) -> Vec<(usize, &'a str)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let issue = |line, message: String| RecordIssue {
        path: path.to_owned(),
        line,
        message,
    };
    match lines.next() {
        Some((_, l)) if l.trim() == version => {}
        Some((n, l)) => {
            issues.push(issue(n, format!("expected format line {version:?}, found {l:?}")));
            return Vec::new();
        }
        None => {
            issues.push(issue(0, "file is empty".into()));
            return Vec::new();
        }
    }
    let mut rest = lines.filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match rest.next() {
        Some((_, l)) if l.split('\t').map(str::trim).eq(header.split('\t')) => {}
        Some((n, l)) => {
            // the transcript header allows omitting the trailing pos column
            let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
            let expected: Vec<&str> = header.split('\t').collect();
            if !(cols.len() + 1 == expected.len() && cols[..] == expected[..cols.len()] && header == TRANSCRIPT_HEADER) {
                issues.push(issue(n, format!("expected header {header:?}, found {l:?}")));
                return Vec::new();
            }
        }
        None => {
            issues.push(issue(0, "missing header row".into()));
            return Vec::new();
        }
    }
    rest.collect()
}

fn parse_valences(field: &str) -> std::result::Result<Vec<f64>, String> {
    let field = field.trim();
    if field == "-" || field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|v| {
            let x: f64 = v.trim().parse().map_err(|_| format!("unparseable valence {v:?}"))?;
            if !(1.0..=5.0).contains(&x) {
                return Err(format!("valence {x} outside [1, 5]"));
            }
            Ok(x)
        })
        .collect()
}

fn parse_transcript(path: &Path, doc_id: &str, valences: Vec<f64>, issues: &mut Vec<RecordIssue>) -> Option<Transcript> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            issues.push(RecordIssue {
                path: path.to_owned(),
                line: 0,
                message: format!("cannot read transcript: {e}"),
            });
            return None;
        }
    };
    let before = issues.len();
    let mut t = Transcript {
        doc_id: doc_id.to_owned(),
        tokens: Vec::new(),
        markers: Vec::new(),
        valences,
    };
    let mut last_start: Option<u64> = None;
    for (n, line) in body_lines(&text, path, TRANSCRIPT_VERSION_LINE, TRANSCRIPT_HEADER, issues) {
        let mut push = |message: String| {
            issues.push(RecordIssue {
                path: path.to_owned(),
                line: n,
                message,
            })
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&cols.len()) {
            push(format!("expected 4 or 5 columns, found {}", cols.len()));
            continue;
        }
        if cols[0].trim() != doc_id {
            push(format!("doc_id {:?} does not match manifest entry {doc_id:?}", cols[0]));
            continue;
        }
        let text = cols[1].trim();
        let (Ok(start), Ok(end)) = (cols[2].trim().parse::<u64>(), cols[3].trim().parse::<u64>()) else {
            push(format!("bad timestamps {:?} {:?}", cols[2], cols[3]));
            continue;
        };
        if end < start {
            push(format!("end_ms {end} before start_ms {start}"));
            continue;
        }
        if text.is_empty() {
            push("empty text".into());
            continue;
        }
        if is_marker(text) {
            t.markers.push(ParaMarker {
                text: text.to_owned(),
                timestamp_ms: start,
            });
            continue;
        }
        if let Some(prev) = last_start {
            if start < prev {
                push(format!("token start {start} ms precedes previous token start {prev} ms"));
                continue;
            }
        }
        last_start = Some(start);
        let pos = cols.get(4).map(|p| p.trim()).filter(|p| !p.is_empty() && *p != "-");
        t.tokens.push(TimedToken {
            text: text.to_owned(),
            start_ms: start,
            end_ms: end,
            pos: pos.map(str::to_owned),
        });
    }
    if issues.len() == before && t.tokens.is_empty() && t.markers.is_empty() {
        issues.push(RecordIssue {
            path: path.to_owned(),
            line: 0,
            message: "document has no tokens or markers".into(),
        });
    }
    (issues.len() == before).then_some(t)
}

/// Loads a corpus directory (or its manifest file). Every malformed record
/// across all files is reported in one [`Error::Malformed`].
pub fn load_corpus(path: &Path) -> Result<Vec<Transcript>> {
    let (dir, manifest) = if path.is_dir() {
        (path.to_owned(), path.join(MANIFEST_FILE))
    } else {
        (path.parent().map(Path::to_owned).unwrap_or_default(), path.to_owned())
    };
    if !manifest.exists() {
        if !path.exists() {
            return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")));
        }
        let empty = path.is_dir() && fs::read_dir(path).map_err(|e| Error::io(path, e))?.next().is_none();
        if empty {
            log::warn!("corpus directory {} is empty", path.display());
            return Ok(Vec::new());
        }
        return Err(Error::Config(format!("{} has no {MANIFEST_FILE}", path.display())));
    }
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    let mut corpus = Vec::new();
    for (n, line) in body_lines(&text, &manifest, MANIFEST_VERSION_LINE, MANIFEST_HEADER, &mut issues) {
        let mut push = |message: String| {
            issues.push(RecordIssue {
                path: manifest.clone(),
                line: n,
                message,
            })
        };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            push(format!("expected 3 columns, found {}", cols.len()));
            continue;
        }
        if let Err(e) = check_doc_id(cols[0]) {
            push(e);
            continue;
        }
        if !seen.insert(cols[0].to_owned()) {
            push(format!("duplicate doc_id {:?}", cols[0]));
            continue;
        }
        let valences = match parse_valences(cols[1]) {
            Ok(v) => v,
            Err(e) => {
                push(e);
                continue;
            }
        };
        if let Some(t) = parse_transcript(&dir.join(cols[2]), cols[0], valences, &mut issues) {
            corpus.push(t);
        }
    }
    if !issues.is_empty() {
        return Err(Error::Malformed(issues));
    }
    if corpus.is_empty() {
        log::warn!("corpus {} lists no documents", manifest.display());
    }
    Ok(corpus)
}

fn format_valences(v: &[f64]) -> String {
    if v.is_empty() {
        "-".to_owned()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
    }
}

/// Serializes one transcript in the documented file format.
pub fn transcript_to_string(t: &Transcript) -> String {
    // tokens and markers interleaved by time; tokens first on ties
    let mut rows: Vec<(u64, u8, usize)> = Vec::with_capacity(t.tokens.len() + t.markers.len());
    rows.extend(t.tokens.iter().enumerate().map(|(i, tok)| (tok.start_ms, 0, i)));
    rows.extend(t.markers.iter().enumerate().map(|(i, m)| (m.timestamp_ms, 1, i)));
    rows.sort();
    let mut out = format!("{TRANSCRIPT_VERSION_LINE}\n{TRANSCRIPT_HEADER}\n");
    for (_, kind, i) in rows {
        if kind == 0 {
            let tok = &t.tokens[i];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                t.doc_id,
                tok.text,
                tok.start_ms,
                tok.end_ms,
                tok.pos.as_deref().unwrap_or("-")
            ));
        } else {
            let m = &t.markers[i];
            out.push_str(&format!("{}\t{}\t{}\t{}\t-\n", t.doc_id, m.text, m.timestamp_ms, m.timestamp_ms));
        }
    }
    out
}

/// Writes `manifest.tsv` plus `<doc_id>.tsv` per document into `dir`.
pub fn save_corpus(dir: &Path, corpus: &[Transcript]) -> Result<()> {
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for t in corpus {
        for p in t.problems() {
            issues.push(RecordIssue {
                path: PathBuf::from(&t.doc_id),
                line: 0,
                message: p,
            });
        }
        if !seen.insert(t.doc_id.as_str()) {
            issues.push(RecordIssue {
                path: PathBuf::from(&t.doc_id),
                line: 0,
                message: "duplicate doc_id".into(),
            });
        }
    }
    if !issues.is_empty() {
        return Err(Error::Malformed(issues));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!("{MANIFEST_VERSION_LINE}\n{MANIFEST_HEADER}\n");
    for t in corpus {
        let file = format!("{}.tsv", t.doc_id);
        manifest.push_str(&format!("{}\t{}\t{}\n", t.doc_id, format_valences(&t.valences), file));
        let path = dir.join(&file);
        fs::write(&path, transcript_to_string(t)).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Drops documents whose mean valence is exactly 3. Unlabeled documents are
/// kept.
pub fn filter_neutral(corpus: Vec<Transcript>) -> Vec<Transcript> {
    let had_docs = !corpus.is_empty();
    let out: Vec<Transcript> = corpus
        .into_iter()
        .filter(|t| t.valence_class() != ValenceClass::Neutral)
        .collect();
    if had_docs && out.is_empty() {
        log::warn!("every document was neutral; the filtered corpus is empty");
    }
    out
}

/// Documents with a polarity, paired with it.
pub fn labeled(corpus: &[Transcript]) -> Vec<(&Transcript, Label)> {
    corpus.iter().filter_map(|t| t.polarity().map(|l| (t, l))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub per_class: BTreeMap<ValenceClass, usize>,
    pub threshold_ms: u64,
    pub ipus: usize,
    pub words: usize,
}

pub fn corpus_stats(corpus: &[Transcript], threshold_ms: u64) -> Result<CorpusStats> {
    let mut per_class = BTreeMap::new();
    let mut ipus = 0;
    for t in corpus {
        *per_class.entry(t.valence_class()).or_insert(0) += 1;
        ipus += segment_into_ipus(t, threshold_ms)?.len();
    }
    Ok(CorpusStats {
        documents: corpus.len(),
        per_class,
        threshold_ms,
        ipus,
        words: corpus.iter().map(Transcript::word_count).sum(),
    })
}
