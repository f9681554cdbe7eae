//! Stratified cross-validation, classification metrics and a paired
//! significance test over fold scores.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Transcript;
use crate::error::{invalid, Error, Result};
use crate::features::{FeatureConfig, FeatureLevel, FeatureResources, FittedPipeline};
use crate::logreg::{self, LogRegModel};
use crate::model::{Label, LabelSet, ObservationSequence};
use crate::training::{self, HcrfClassifier, TrainingConfig};

/// Folds used for hyperparameter selection inside each training fold.
pub const INNER_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    /// Test indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Every index not in fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class with one seeded generator (classes in label order)
/// and deals its members round-robin, continuing where the previous class
/// stopped so fold sizes stay within one of each other.
pub fn stratified_k_fold(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(invalid!("need at least 2 folds, got {k}"));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    if let Some((l, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(invalid!("class {} has {} members, fewer than {k} folds", l.0, members.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { seed, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: usize,
    pub predicted: usize,
    pub prior: f64,
    /// Percentages in `[0, 100]`; 0 when undefined (no predictions or no
    /// support).
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: usize,
    pub per_class: Vec<ClassMetrics>,
    /// `Σ_c prior_c · F1_c`, in percent.
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// Rows are gold labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == name)
    }

    /// Plain-text table; percentages rounded to integers with the full
    /// values in parentheses.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("documents: {}\n", self.total));
        out.push_str("class\tsupport\tprecision\trecall\tF1\n");
        for c in &self.per_class {
            out.push_str(&format!(
                "{}\t{}\t{} ({:.4})\t{} ({:.4})\t{} ({:.4})\n",
                c.label,
                c.support,
                rounded(c.precision),
                c.precision,
                rounded(c.recall),
                c.recall,
                rounded(c.f1),
                c.f1
            ));
        }
        out.push_str(&format!("weighted F1\t{} ({:.4})\n", rounded(self.weighted_f1), self.weighted_f1));
        out.push_str(&format!("accuracy\t{} ({:.4})\n", rounded(self.accuracy), self.accuracy));
        out.push_str("confusion (rows gold, columns predicted)\n");
        let names: Vec<&str> = self.per_class.iter().map(|c| c.label.as_str()).collect();
        out.push_str(&format!("\t{}\n", names.join("\t")));
        for (name, row) in names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{name}\t{}\n", cells.join("\t")));
        }
        out
    }
}

/// Rounds a percentage half away from zero, the convention used for every
/// integer figure in reports.
pub fn rounded(x: f64) -> i64 {
    x.round() as i64
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics for `predictions` against `golds`. `priors` defaults to the gold
/// class frequencies.
pub fn compute_metrics(predictions: &[Label], golds: &[Label], labels: &LabelSet, priors: Option<&[f64]>) -> Result<MetricsReport> {
    if predictions.len() != golds.len() {
        return Err(invalid!("{} predictions for {} gold labels", predictions.len(), golds.len()));
    }
    let n = labels.len();
    if let Some(l) = predictions.iter().chain(golds).find(|l| l.0 >= n) {
        return Err(invalid!("label {} outside the {n}-label set", l.0));
    }
    if let Some(p) = priors {
        if p.len() != n {
            return Err(invalid!("{} priors for {n} labels", p.len()));
        }
    }
    let mut confusion = vec![vec![0usize; n]; n];
    for (p, g) in predictions.iter().zip(golds) {
        confusion[g.0][p.0] += 1;
    }
    let total = golds.len();
    let mut per_class = Vec::with_capacity(n);
    let mut weighted = 0.0;
    for c in 0..n {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|r| r[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let prior = priors.map_or(ratio(support, total), |p| p[c]);
        weighted += prior * f1;
        per_class.push(ClassMetrics {
            label: labels.name(Label(c)).unwrap_or_default().to_owned(),
            support,
            predicted,
            prior,
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * f1,
        });
    }
    let correct: usize = (0..n).map(|c| confusion[c][c]).sum();
    Ok(MetricsReport {
        total,
        per_class,
        weighted_f1: 100.0 * weighted,
        accuracy: 100.0 * ratio(correct, total),
        confusion,
    })
}

/// Model family plus the hyperparameter values to search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Hcrf {
        /// Base settings; the grids below override the matching fields.
        training: TrainingConfig,
        hidden_states: Vec<usize>,
        context_windows: Vec<usize>,
        l2: Vec<f64>,
    },
    Logreg {
        c: Vec<f64>,
        seed: u64,
    },
    /// Always predicts the most frequent training label (lowest index on
    /// ties).
    Majority,
}

impl ModelSpec {
    pub fn hcrf(training: TrainingConfig) -> Self {
        ModelSpec::Hcrf {
            hidden_states: vec![training.num_hidden_states],
            context_windows: vec![training.context_window],
            l2: vec![training.l2],
            training,
        }
    }

    pub fn feature_level(&self) -> FeatureLevel {
        match self {
            ModelSpec::Hcrf { .. } => FeatureLevel::Ipu,
            _ => FeatureLevel::Document,
        }
    }

    /// Every concrete configuration of the grid, in a fixed order.
    pub fn candidates(&self) -> Vec<ModelChoice> {
        match self {
            ModelSpec::Hcrf {
                training,
                hidden_states,
                context_windows,
                l2,
            } => {
                let mut out = Vec::new();
                for &h in hidden_states {
                    for &w in context_windows {
                        for &l in l2 {
                            out.push(ModelChoice::Hcrf(TrainingConfig {
                                num_hidden_states: h,
                                context_window: w,
                                l2: l,
                                ..training.clone()
                            }));
                        }
                    }
                }
                out
            }
            ModelSpec::Logreg { c, seed } => c.iter().map(|&c| ModelChoice::Logreg { c, seed: *seed }).collect(),
            ModelSpec::Majority => vec![ModelChoice::Majority],
        }
    }
}

/// One point of a [`ModelSpec`] grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelChoice {
    Hcrf(TrainingConfig),
    Logreg { c: f64, seed: u64 },
    Majority,
}

impl ModelChoice {
    pub fn describe(&self) -> String {
        match self {
            ModelChoice::Hcrf(t) => format!("hcrf H={} w={} l2={}", t.num_hidden_states, t.context_window, t.l2),
            ModelChoice::Logreg { c, .. } => format!("logreg C={c}"),
            ModelChoice::Majority => "majority".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Hcrf(HcrfClassifier),
    Logreg(LogRegModel),
    Majority { label: Label, num_labels: usize },
}

impl TrainedModel {
    /// Predicted label and per-label probabilities.
    pub fn predict(&self, x: &ObservationSequence) -> Result<(Label, Vec<f64>)> {
        match self {
            TrainedModel::Hcrf(c) => {
                let p = c.posterior(x)?;
                Ok((p.argmax(), p.probs))
            }
            TrainedModel::Logreg(m) => {
                let v = logreg::aggregate_document_vector(x);
                let (label, p) = m.predict(&v)?;
                Ok((label, vec![1.0 - p, p]))
            }
            TrainedModel::Majority { label, num_labels } => {
                let mut probs = vec![0.0; *num_labels];
                probs[label.0] = 1.0;
                Ok((*label, probs))
            }
        }
    }
}

/// Trains one concrete configuration on already-featurized sequences.
pub fn fit_choice(choice: &ModelChoice, data: &[(ObservationSequence, Label)]) -> Result<TrainedModel> {
    match choice {
        ModelChoice::Hcrf(cfg) => Ok(TrainedModel::Hcrf(training::train_classifier(data, cfg)?.0)),
        ModelChoice::Logreg { c, seed } => {
            let x: Vec<Vec<f64>> = data.iter().map(|(s, _)| logreg::aggregate_document_vector(s)).collect();
            let y: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
            Ok(TrainedModel::Logreg(logreg::train_logreg(&x, &y, *c, *seed)?))
        }
        ModelChoice::Majority => {
            let num_labels = data.iter().map(|(_, l)| l.0 + 1).max().unwrap_or(0).max(2);
            let mut counts = vec![0usize; num_labels];
            for (_, l) in data {
                counts[l.0] += 1;
            }
            let best = counts.iter().enumerate().fold(0, |b, (i, &c)| if c > counts[b] { i } else { b });
            Ok(TrainedModel::Majority {
                label: Label(best),
                num_labels,
            })
        }
    }
}

/// Fits the feature pipeline and the model on labeled training documents.
/// With more than one grid point the configuration is chosen by inner
/// stratified CV accuracy (first best in grid order).
pub fn fit_model(
    docs: &[(&Transcript, Label)],
    res: &FeatureResources,
    features: &FeatureConfig,
    spec: &ModelSpec,
    seed: u64,
) -> Result<(FittedPipeline, TrainedModel, ModelChoice)> {
    let candidates = spec.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("model grid is empty".into()));
    }
    let choice = if candidates.len() == 1 {
        candidates[0].clone()
    } else {
        select_by_inner_cv(docs, res, features, spec, &candidates, seed)?
    };
    let transcripts: Vec<&Transcript> = docs.iter().map(|(t, _)| *t).collect();
    let pipeline = FittedPipeline::fit(&transcripts, res, features, spec.feature_level())?;
    let seqs = pipeline.transform_all(&transcripts, res)?;
    let data: Vec<(ObservationSequence, Label)> = seqs.into_iter().zip(docs.iter().map(|(_, l)| *l)).collect();
    let model = fit_choice(&choice, &data)?;
    Ok((pipeline, model, choice))
}

fn select_by_inner_cv(
    docs: &[(&Transcript, Label)],
    res: &FeatureResources,
    features: &FeatureConfig,
    spec: &ModelSpec,
    candidates: &[ModelChoice],
    seed: u64,
) -> Result<ModelChoice> {
    let labels: Vec<Label> = docs.iter().map(|(_, l)| *l).collect();
    let plan = stratified_k_fold(&labels, INNER_FOLDS, seed)?;
    // featurize each inner split once and reuse it for every candidate
    let splits = (0..plan.k())
        .into_par_iter()
        .map(|f| {
            let train_idx = plan.train_indices(f);
            let train: Vec<&Transcript> = train_idx.iter().map(|&i| docs[i].0).collect();
            let pipeline = FittedPipeline::fit(&train, res, features, spec.feature_level())?;
            let tr = pipeline.transform_all(&train, res)?;
            let test: Vec<&Transcript> = plan.folds[f].iter().map(|&i| docs[i].0).collect();
            let te = pipeline.transform_all(&test, res)?;
            Ok((
                tr.into_iter().zip(train_idx.iter().map(|&i| labels[i])).collect::<Vec<_>>(),
                te.into_iter().zip(plan.folds[f].iter().map(|&i| labels[i])).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = candidates
        .par_iter()
        .map(|c| {
            let mut correct = 0usize;
            for (train, test) in &splits {
                let m = fit_choice(c, train)?;
                for (x, y) in test {
                    if m.predict(x)?.0 == *y {
                        correct += 1;
                    }
                }
            }
            Ok(correct)
        })
        .collect::<Result<Vec<usize>>>()?;
    let best = scores.iter().enumerate().fold(0, |b, (i, &s)| if s > scores[b] { i } else { b });
    log::info!("inner CV selected {} ({} correct)", candidates[best].describe(), scores[best]);
    Ok(candidates[best].clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub fold: usize,
    pub gold: Label,
    pub predicted: Label,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Pooled over all test folds.
    pub pooled: MetricsReport,
    pub per_fold: Vec<MetricsReport>,
    /// Configuration chosen in each fold.
    pub selected: Vec<ModelChoice>,
    /// In corpus order.
    pub predictions: Vec<PredictionRecord>,
}

/// Stratified k-fold CV over the labeled documents of `corpus`. Every fitted
/// quantity of each fold sees only that fold's training documents.
pub fn cross_validate(
    corpus: &[Transcript],
    res: &FeatureResources,
    features: &FeatureConfig,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let docs = crate::corpus::labeled(corpus);
    if docs.len() < corpus.len() {
        log::warn!("{} unlabeled or neutral documents skipped", corpus.len() - docs.len());
    }
    let labels: Vec<Label> = docs.iter().map(|(_, l)| *l).collect();
    let plan = stratified_k_fold(&labels, k, seed)?;
    let label_set = LabelSet::polarity();

    let folds = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<(&Transcript, Label)> = plan.train_indices(f).iter().map(|&i| docs[i]).collect();
            let (pipeline, model, choice) = fit_model(&train, res, features, spec, seed)?;
            let mut records = Vec::with_capacity(plan.folds[f].len());
            for &i in &plan.folds[f] {
                let x = pipeline.transform(docs[i].0, res)?;
                let (predicted, probs) = model.predict(&x)?;
                records.push((
                    i,
                    PredictionRecord {
                        doc_id: docs[i].0.doc_id.clone(),
                        fold: f,
                        gold: docs[i].1,
                        predicted,
                        probs,
                    },
                ));
            }
            Ok((records, choice))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_fold = Vec::with_capacity(k);
    let mut selected = Vec::with_capacity(k);
    let mut all = Vec::with_capacity(docs.len());
    for (records, choice) in folds {
        let p: Vec<Label> = records.iter().map(|(_, r)| r.predicted).collect();
        let g: Vec<Label> = records.iter().map(|(_, r)| r.gold).collect();
        per_fold.push(compute_metrics(&p, &g, &label_set, None)?);
        selected.push(choice);
        all.extend(records);
    }
    all.sort_by_key(|(i, _)| *i);
    let predictions: Vec<PredictionRecord> = all.into_iter().map(|(_, r)| r).collect();
    let p: Vec<Label> = predictions.iter().map(|r| r.predicted).collect();
    let pooled = compute_metrics(&p, &labels, &label_set, None)?;
    Ok(CvReport {
        k,
        seed,
        pooled,
        per_fold,
        selected,
        predictions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// The differences have zero variance; `p_value` is reported as 1.
    pub degenerate: bool,
}

/// Paired two-sided t-test over per-fold scores.
pub fn fold_significance(a: &[f64], b: &[f64]) -> Result<Significance> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid!("need two equal-length score lists of at least 2 folds ({} vs {})", a.len(), b.len()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    // differences equal up to rounding count as constant
    if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
        return Ok(Significance {
            t: 0.0,
            df,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| invalid!("t distribution: {e}"))?;
    Ok(Significance {
        t,
        df,
        p_value: (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0),
        degenerate: false,
    })
}
