//! The subcommands, callable without going through argument parsing.
//!
//! Every command writes into its own run directory and records the resolved
//! configuration there. Outputs are pure functions of the inputs and seeds;
//! no report carries a timestamp.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use hcrf_opinion::corpus::synthetic::{generate_synthetic, SyntheticCorpus};
use hcrf_opinion::corpus::{corpus_stats, labeled, load_corpus, save_corpus, CorpusStats, Transcript};
use hcrf_opinion::evaluation::{
    compute_metrics, cross_validate, fit_model, fold_significance, CvReport, MetricsReport, ModelChoice, PredictionRecord,
    Significance, TrainedModel,
};
use hcrf_opinion::features::embedding::EmbeddingTable;
use hcrf_opinion::features::segment::STANDARD_THRESHOLDS_MS;
use hcrf_opinion::features::{segment_into_ipus, FeatureBlock};
use hcrf_opinion::introspection::{state_report, EmbeddingContext, StateReport};
use hcrf_opinion::{Label, LabelSet};
use serde::Serialize;

use crate::archive::{embedded_vocabulary, ModelArchive};
use crate::config::{write_file, ModelKind, RunConfig, LOG_FILE, RESOLVED_CONFIG_FILE};

pub const IPU_FILE: &str = "ipus.tsv";
pub const IPU_VERSION_LINE: &str = "#format opinion-ipus 1";
pub const PREDICTIONS_VERSION_LINE: &str = "#format opinion-predictions 1";
pub const CV_PREDICTIONS_VERSION_LINE: &str = "#format opinion-cv-predictions 1";
pub const ARCHIVE_FILE: &str = "model.json";

fn load(path: &Path) -> Result<Vec<Transcript>> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn warn_nonstandard_threshold(ms: u64) {
    if !STANDARD_THRESHOLDS_MS.contains(&ms) {
        log::warn!("pause threshold {ms} ms is not one of the standard {STANDARD_THRESHOLDS_MS:?}");
    }
}

// ---------------------------------------------------------------- segment

/// Copies the corpus to `cfg.out` and writes its IPU table next to it.
/// Running it again on its own output reproduces the same files.
pub fn segment(cfg: &RunConfig) -> Result<CorpusStats> {
    let input = cfg.corpus_path()?;
    let threshold = cfg.features.threshold_ms;
    warn_nonstandard_threshold(threshold);
    let corpus = load(input)?;
    let out = cfg.start_run()?;
    save_corpus(&out, &corpus)?;
    let mut table = format!("{IPU_VERSION_LINE}\nthreshold_ms\t{threshold}\n");
    table.push_str("doc_id\tipu\tstart_ms\tend_ms\tfollowing_pause_ms\ttokens\tpos\tmarkers\n");
    for t in &corpus {
        for (i, ipu) in segment_into_ipus(t, threshold)?.iter().enumerate() {
            let pause = ipu.following_pause_ms.map(|p| p.to_string()).unwrap_or_default();
            let pos = ipu.pos_tags.as_ref().map(|p| p.join(" ")).unwrap_or_default();
            writeln!(
                table,
                "{}\t{i}\t{}\t{}\t{pause}\t{}\t{pos}\t{}",
                t.doc_id,
                ipu.start_ms,
                ipu.end_ms,
                ipu.tokens.join(" "),
                ipu.para_events.join("|")
            )?;
        }
    }
    write_file(&out.join(IPU_FILE), &table)?;
    let stats = corpus_stats(&corpus, threshold)?;
    log::info!("{} documents, {} IPUs at {threshold} ms", stats.documents, stats.ipus);
    Ok(stats)
}

// ---------------------------------------------------------------- train / predict

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub label: Label,
    pub probs: Vec<f64>,
}

pub fn predictions_tsv(labels: &LabelSet, rows: &[Prediction]) -> String {
    let mut out = format!("{PREDICTIONS_VERSION_LINE}\ndoc_id\tlabel");
    for n in labels.names() {
        out.push_str(&format!("\tp_{n}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}", r.doc_id, labels.name(r.label).unwrap_or("?")));
        for p in &r.probs {
            out.push_str(&format!("\t{p}"));
        }
        out.push('\n');
    }
    out
}

fn predict_all(archive: &ModelArchive, corpus: &[Transcript]) -> Result<Vec<Prediction>> {
    let res = archive.load_resources()?;
    let refs: Vec<&Transcript> = corpus.iter().collect();
    let seqs = archive.pipeline.transform_all(&refs, &res)?;
    seqs.iter()
        .map(|s| {
            let (label, probs) = archive.model.predict(s)?;
            Ok(Prediction {
                doc_id: s.doc_id().to_owned(),
                label,
                probs,
            })
        })
        .collect()
}

fn metrics_if_labeled(corpus: &[Transcript], preds: &[Prediction], labels: &LabelSet) -> Result<Option<MetricsReport>> {
    let pairs: Vec<(Label, Label)> = corpus
        .iter()
        .zip(preds)
        .filter_map(|(t, p)| t.polarity().map(|g| (p.label, g)))
        .collect();
    if pairs.is_empty() {
        return Ok(None);
    }
    let (p, g): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
    Ok(Some(compute_metrics(&p, &g, labels, None)?))
}

fn write_metrics(out: &Path, stem: &str, m: &MetricsReport) -> Result<()> {
    write_file(&out.join(format!("{stem}.txt")), &m.to_text())?;
    write_file(&out.join(format!("{stem}.json")), &to_json(m)?)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn single_model(cfg: &RunConfig) -> Result<ModelKind> {
    match cfg.models.as_slice() {
        [m] => Ok(*m),
        [] => bail!("no model selected"),
        _ => bail!("train takes exactly one model, got {}", cfg.models.len()),
    }
}

pub struct TrainOutcome {
    pub archive: ModelArchive,
    pub archive_path: PathBuf,
    pub predictions: Vec<Prediction>,
}

/// Fits one model on every labeled document and archives it. Predictions on
/// the training documents are written with the same format as `predict`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let kind = single_model(cfg)?;
    warn_nonstandard_threshold(cfg.features.threshold_ms);
    let corpus = load(cfg.corpus_path()?)?;
    let res = cfg.load_resources()?;
    let out = cfg.start_run()?;
    let docs = labeled(&corpus);
    ensure!(!docs.is_empty(), "corpus has no labeled documents");
    let (pipeline, model, choice) = fit_model(&docs, &res, &cfg.features, &cfg.model_spec(kind), cfg.seed)?;
    log::info!("trained {}", choice.describe());
    let train_docs: Vec<&Transcript> = docs.iter().map(|(t, _)| *t).collect();
    let archive = ModelArchive::new(
        LabelSet::polarity(),
        choice,
        model,
        pipeline,
        cfg.resources.clone(),
        embedded_vocabulary(&train_docs, &res),
    );
    let archive_path = out.join(ARCHIVE_FILE);
    archive.save(&archive_path)?;

    let train_set: Vec<Transcript> = train_docs.into_iter().cloned().collect();
    let predictions = predict_all(&archive, &train_set)?;
    write_file(&out.join("train_predictions.tsv"), &predictions_tsv(&archive.labels, &predictions))?;
    if let Some(m) = metrics_if_labeled(&train_set, &predictions, &archive.labels)? {
        write_metrics(&out, "train_metrics", &m)?;
    }
    Ok(TrainOutcome {
        archive,
        archive_path,
        predictions,
    })
}

/// Applies an archived model to every document of a corpus.
pub fn predict(archive_path: &Path, corpus_path: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let archive = ModelArchive::load(archive_path)?;
    let corpus = load(corpus_path)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let provenance = format!(
        "archive = {}\ncorpus = {}\nout = {}\n",
        toml_str(archive_path),
        toml_str(corpus_path),
        toml_str(out)
    );
    write_file(&out.join(RESOLVED_CONFIG_FILE), &provenance)?;
    crate::logging::attach(&out.join(LOG_FILE));
    let predictions = predict_all(&archive, &corpus)?;
    write_file(&out.join("predictions.tsv"), &predictions_tsv(&archive.labels, &predictions))?;
    if let Some(m) = metrics_if_labeled(&corpus, &predictions, &archive.labels)? {
        write_metrics(out, "metrics", &m)?;
    }
    Ok(predictions)
}

fn toml_str(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEvaluation {
    pub model: ModelKind,
    pub pooled: MetricsReport,
    pub per_fold: Vec<MetricsReport>,
    pub selected: Vec<ModelChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: ModelKind,
    pub b: ModelKind,
    /// Paired over per-fold accuracy, `a − b`.
    pub accuracy: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub folds: usize,
    pub seed: u64,
    pub models: Vec<ModelEvaluation>,
    pub comparisons: Vec<Comparison>,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("cross-validation: {} folds, seed {}\n", self.folds, self.seed);
        for m in &self.models {
            out.push_str(&format!("\n== {} ==\n", m.model.name()));
            out.push_str(&m.pooled.to_text());
            let acc: Vec<String> = m.per_fold.iter().map(|f| format!("{:.4}", f.accuracy)).collect();
            out.push_str(&format!("per-fold accuracy\t{}\n", acc.join("\t")));
            for (f, c) in m.selected.iter().enumerate() {
                out.push_str(&format!("fold {f} model\t{}\n", c.describe()));
            }
        }
        if !self.comparisons.is_empty() {
            out.push_str("\n== paired t-test on per-fold accuracy ==\n");
            for c in &self.comparisons {
                let s = &c.accuracy;
                out.push_str(&format!(
                    "{} vs {}\tt = {:.4}\tdf = {}\tp = {:.6}{}\n",
                    c.a.name(),
                    c.b.name(),
                    s.t,
                    s.df,
                    s.p_value,
                    if s.degenerate { "\t(constant differences)" } else { "" }
                ));
            }
        }
        out
    }
}

fn cv_predictions_tsv(labels: &LabelSet, rows: &[PredictionRecord]) -> String {
    let mut out = format!("{CV_PREDICTIONS_VERSION_LINE}\ndoc_id\tfold\tgold\tlabel");
    for n in labels.names() {
        out.push_str(&format!("\tp_{n}"));
    }
    out.push('\n');
    for r in rows {
        let name = |l: Label| labels.name(l).unwrap_or("?").to_owned();
        out.push_str(&format!("{}\t{}\t{}\t{}", r.doc_id, r.fold, name(r.gold), name(r.predicted)));
        for p in &r.probs {
            out.push_str(&format!("\t{p}"));
        }
        out.push('\n');
    }
    out
}

/// Stratified k-fold CV of every configured model on the same folds, with
/// pairwise significance tests when more than one model is given.
pub fn evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    ensure!(!cfg.models.is_empty(), "no model selected");
    warn_nonstandard_threshold(cfg.features.threshold_ms);
    let corpus = load(cfg.corpus_path()?)?;
    let res = cfg.load_resources()?;
    let out = cfg.start_run()?;
    let labels = LabelSet::polarity();
    let mut models = Vec::new();
    let mut fold_accuracy = Vec::new();
    for &kind in &cfg.models {
        log::info!("cross-validating {}", kind.name());
        let r: CvReport = cross_validate(&corpus, &res, &cfg.features, &cfg.model_spec(kind), cfg.folds, cfg.seed)?;
        write_file(
            &out.join(format!("predictions_{}.tsv", kind.name())),
            &cv_predictions_tsv(&labels, &r.predictions),
        )?;
        fold_accuracy.push(r.per_fold.iter().map(|m| m.accuracy).collect::<Vec<_>>());
        models.push(ModelEvaluation {
            model: kind,
            pooled: r.pooled,
            per_fold: r.per_fold,
            selected: r.selected,
        });
    }
    let mut comparisons = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            comparisons.push(Comparison {
                a: models[i].model,
                b: models[j].model,
                accuracy: fold_significance(&fold_accuracy[i], &fold_accuracy[j])?,
            });
        }
    }
    let report = EvaluationReport {
        folds: cfg.folds,
        seed: cfg.seed,
        models,
        comparisons,
    };
    write_file(&out.join("metrics.txt"), &report.to_text())?;
    write_file(&out.join("metrics.json"), &to_json(&report)?)?;
    Ok(report)
}

// ---------------------------------------------------------------- inspect

#[derive(Debug, Clone, PartialEq)]
pub struct InspectOptions {
    pub top_k: usize,
    pub tau: Option<f64>,
    /// Words whose per-state profile is reported.
    pub words: Vec<String>,
}

impl Default for InspectOptions {
    fn default() -> Self {
        Self {
            top_k: 10,
            tau: None,
            words: Vec::new(),
        }
    }
}

/// Per-state report of an archived HCRF.
pub fn inspect(archive_path: &Path, out: &Path, opts: &InspectOptions) -> Result<StateReport> {
    let archive = ModelArchive::load(archive_path)?;
    let TrainedModel::Hcrf(clf) = &archive.model else {
        bail!("inspect needs an hcrf archive, {} is {}", archive_path.display(), archive.kind.name());
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut provenance = format!(
        "archive = {}\nout = {}\ntop_k = {}\n",
        toml_str(archive_path),
        toml_str(out),
        opts.top_k
    );
    if let Some(t) = opts.tau {
        provenance.push_str(&format!("tau = {t:?}\n"));
    }
    write_file(&out.join(RESOLVED_CONFIG_FILE), &provenance)?;
    crate::logging::attach(&out.join(LOG_FILE));

    let base = &archive.pipeline.schema;
    let schema = base.with_context_window(clf.context_window);
    let table: Option<EmbeddingTable> = match (&archive.resources.embeddings, base.block(FeatureBlock::Embedding)) {
        (Some(p), Some(_)) => Some(EmbeddingTable::load(p, archive.resources.case_policy)?),
        _ => None,
    };
    let ctx = table.as_ref().map(|table| EmbeddingContext {
        table,
        vocabulary: &archive.vocabulary,
        base_schema: base,
        standardizer: archive.pipeline.standardizer.as_ref(),
        profile_words: &opts.words,
    });
    let report = state_report(&clf.params, &schema, &archive.labels, opts.top_k, opts.tau, ctx)?;
    write_file(&out.join("state_report.txt"), &report.to_text())?;
    write_file(&out.join("state_report.json"), &to_json(&report)?)?;
    Ok(report)
}

// ---------------------------------------------------------------- generate

pub const EXPERIMENT_CONFIG_FILE: &str = "experiment.toml";

#[derive(Serialize)]
struct GeneratorRecord<'a> {
    spec: &'a hcrf_opinion::corpus::synthetic::SyntheticSpec,
    seed: u64,
    order_insensitive_bayes_accuracy: f64,
}

/// Writes a synthetic corpus with its embedding table and lexicon, plus an
/// `experiment.toml` that evaluates on it as-is.
pub fn generate(cfg: &RunConfig) -> Result<SyntheticCorpus> {
    let syn = generate_synthetic(&cfg.synthetic, cfg.seed)?;
    let out = cfg.start_run()?;
    save_corpus(&out.join("corpus"), &syn.transcripts)?;
    write_file(&out.join("embeddings.txt"), &syn.embeddings.to_text())?;
    write_file(&out.join("lexicon.tsv"), &syn.lexicon_text)?;
    write_file(
        &out.join("generator.json"),
        &to_json(&GeneratorRecord {
            spec: &syn.spec,
            seed: syn.seed,
            order_insensitive_bayes_accuracy: syn.bayes_accuracy,
        })?,
    )?;
    let mut exp = RunConfig {
        corpus: Some("corpus".into()),
        out: Some("runs".into()),
        seed: cfg.seed,
        folds: 5,
        models: vec![ModelKind::Hcrf, ModelKind::Logreg],
        synthetic: syn.spec.clone(),
        ..RunConfig::default()
    };
    exp.features.blocks = vec![FeatureBlock::Embedding];
    exp.resources.embeddings = Some("embeddings.txt".into());
    exp.resources.lexicons = vec!["lexicon.tsv".into()];
    write_file(&out.join(EXPERIMENT_CONFIG_FILE), &exp.to_toml()?)?;
    log::info!(
        "{} documents; order-insensitive Bayes accuracy {:.4}",
        syn.transcripts.len(),
        syn.bayes_accuracy
    );
    Ok(syn)
}
