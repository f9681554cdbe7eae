//! Acceptance suite. Runs every primary criterion, prints one PASS/FAIL line
//! each, and exits non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use hcrf_opinion::corpus::synthetic::{generate_synthetic, SyntheticSpec, NEGATIVE_WORDS, POSITIVE_WORDS};
use hcrf_opinion::corpus::{save_corpus, TimedToken, Transcript};
use hcrf_opinion::evaluation::{compute_metrics, rounded};
use hcrf_opinion::features::segment_into_ipus;
use hcrf_opinion::model::{marginals, posterior};
use hcrf_opinion::training::{gradient, objective};
use hcrf_opinion::{HcrfParameters, Label, LabelSet, ObservationSequence};
use hcrf_opinion_cli::commands::{self, InspectOptions};
use hcrf_opinion_cli::config::{ModelKind, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracle {
    use hcrf_opinion::{HcrfParameters, ObservationSequence};

    /// Unnormalized score written directly from the definition.
    pub fn score(y: usize, path: &[usize], x: &ObservationSequence, theta: &HcrfParameters) -> f64 {
        let mut s = 0.0;
        for (j, &h) in path.iter().enumerate() {
            s += x.items()[j].iter().zip(theta.observation(h)).map(|(a, b)| a * b).sum::<f64>();
            s += theta.state(y, h);
            if j + 1 < path.len() {
                s += theta.transition(y, h, path[j + 1]);
            }
        }
        s
    }

    pub fn all_paths(len: usize, hidden: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..hidden).map(move |h| {
                        let mut q = p.clone();
                        q.push(h);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn posterior(x: &ObservationSequence, theta: &HcrfParameters) -> Vec<f64> {
        let paths = all_paths(x.len(), theta.num_hidden_states());
        let lz: Vec<f64> = (0..theta.num_labels())
            .map(|y| {
                let s: Vec<f64> = paths.iter().map(|p| score(y, p, x, theta)).collect();
                let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            })
            .collect();
        let m = lz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lz.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = e.iter().sum();
        e.iter().map(|v| v / total).collect()
    }
}

fn random_sequence(r: &mut ChaCha8Rng, len: usize, dim: usize) -> ObservationSequence {
    let items = (0..len).map(|_| (0..dim).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    ObservationSequence::new("rand", items).unwrap()
}

fn random_parameters(r: &mut ChaCha8Rng, hidden: usize, dim: usize, scale: f64) -> HcrfParameters {
    let n = HcrfParameters::parameter_count(hidden, 2, dim);
    HcrfParameters::from_flat(hidden, 2, dim, (0..n).map(|_| r.gen_range(-scale..scale)).collect()).unwrap()
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

type Criterion<'a> = (&'a str, Box<dyn FnOnce() -> Result<Outcome>>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2}s (limit {}s)", t.as_secs_f64(), limit.as_secs()))
}

// ---------------------------------------------------------------- criteria

fn inference_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = r.gen_range(1..=6);
        let hidden = r.gen_range(1..=4);
        let dim = r.gen_range(1..=5);
        let x = random_sequence(&mut r, len, dim);
        let theta = random_parameters(&mut r, hidden, dim, 2.0);
        let got = posterior(&x, &theta)?;
        for (a, b) in got.probs.iter().zip(oracle::posterior(&x, &theta)) {
            worst = worst.max((a - b).abs());
        }
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    Ok(Outcome {
        pass: worst <= 1e-10 && fast,
        detail: format!("200 instances, max |diff| {worst:.2e} (tol 1e-10), {time}"),
    })
}

fn gradient_check() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let hidden = r.gen_range(1..=3);
        let dim = r.gen_range(1..=4);
        let lambda = if case % 2 == 0 { 0.0 } else { 0.1 };
        let data: Vec<(ObservationSequence, Label)> = (0..3)
            .map(|i| {
                let len = r.gen_range(1..=5);
                (random_sequence(&mut r, len, dim), Label(i % 2))
            })
            .collect();
        let theta = random_parameters(&mut r, hidden, dim, 1.0);
        let g = gradient(&data, &theta, lambda)?;
        let mut w = theta.as_slice().to_vec();
        let step = 1e-5;
        for i in 0..w.len() {
            let orig = w[i];
            let f = |w: &[f64]| objective(&data, &HcrfParameters::from_flat(hidden, 2, dim, w.to_vec()).unwrap(), lambda).unwrap();
            w[i] = orig + step;
            let up = f(&w);
            w[i] = orig - step;
            let down = f(&w);
            w[i] = orig;
            worst = worst.max(relative_error(g.as_slice()[i], (up - down) / (2.0 * step)));
        }
    }
    let (fast, time) = within(Duration::from_secs(30), start);
    Ok(Outcome {
        pass: worst <= 1e-6 && fast,
        detail: format!("50 instances, max relative error {worst:.2e} (tol 1e-6), {time}"),
    })
}

fn normalization_suite() -> Result<Outcome> {
    let mut r = ChaCha8Rng::seed_from_u64(1003);
    let (mut sum_err, mut marg_err, mut shift_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let len = r.gen_range(1..=6);
        let hidden = r.gen_range(1..=4);
        let dim = r.gen_range(1..=5);
        let x = random_sequence(&mut r, len, dim);
        let theta = random_parameters(&mut r, hidden, dim, 2.0);
        let p = posterior(&x, &theta)?;
        sum_err = sum_err.max((p.probs.iter().sum::<f64>() - 1.0).abs());
        for y in 0..2 {
            let m = marginals(Label(y), &x, &theta)?;
            for row in &m.state_posteriors {
                marg_err = marg_err.max((row.iter().sum::<f64>() - 1.0).abs());
            }
            for j in 0..m.pair_posteriors.len() {
                for h in 0..hidden {
                    let out: f64 = (0..hidden).map(|k| m.pair(j, h, k)).sum();
                    let inc: f64 = (0..hidden).map(|k| m.pair(j, k, h)).sum();
                    marg_err = marg_err.max((out - m.state_posteriors[j][h]).abs());
                    marg_err = marg_err.max((inc - m.state_posteriors[j + 1][h]).abs());
                }
            }
        }
        let c = r.gen_range(-5.0..5.0);
        let mut shifted = theta.clone();
        for y in 0..2 {
            for h in 0..hidden {
                shifted.set_state(y, h, theta.state(y, h) + c);
            }
        }
        let q = posterior(&x, &shifted)?;
        for (a, b) in p.probs.iter().zip(&q.probs) {
            shift_err = shift_err.max((a - b).abs());
        }
    }
    Ok(Outcome {
        pass: sum_err <= 1e-12 && marg_err <= 1e-10 && shift_err <= 1e-12,
        detail: format!(
            "200 instances: |sum-1| {sum_err:.1e} (1e-12), marginal consistency {marg_err:.1e} (1e-10), state-shift {shift_err:.1e} (1e-12)"
        ),
    })
}

fn corpus_with_split(pos: usize, neg: usize, seed: u64) -> Vec<Transcript> {
    let spec = SyntheticSpec {
        num_docs: pos + neg,
        ..SyntheticSpec::default()
    };
    let mut docs = generate_synthetic(&spec, seed).unwrap().transcripts;
    for (i, d) in docs.iter_mut().enumerate() {
        d.valences = vec![if i < pos { 5.0 } else { 1.0 }];
    }
    docs
}

fn majority_row(dir: &Path) -> Result<Outcome> {
    let golds: Vec<Label> = (0..321).map(|i| if i < 205 { Label::POSITIVE } else { Label::NEGATIVE }).collect();
    let m = compute_metrics(&vec![Label::POSITIVE; 321], &golds, &LabelSet::polarity(), None)?;
    let f1p = m.class("positive").map(|c| c.f1).unwrap_or(f64::NAN);
    let f1n = m.class("negative").map(|c| c.f1).unwrap_or(f64::NAN);
    let lib_ok = rounded(f1p) == 78 && rounded(f1n) == 0 && rounded(m.weighted_f1) == 50;

    // the same row through the evaluate command with the majority model
    let corpus_dir = dir.join("corpus");
    save_corpus(&corpus_dir, &corpus_with_split(205, 116, 7))?;
    let cfg = RunConfig {
        corpus: Some(corpus_dir),
        out: Some(dir.join("run")),
        models: vec![ModelKind::Majority],
        folds: 10,
        features: hcrf_opinion::features::FeatureConfig {
            blocks: vec![hcrf_opinion::features::FeatureBlock::Pattern],
            ..Default::default()
        },
        ..RunConfig::default()
    };
    let report = commands::evaluate(&cfg)?;
    let pooled = &report.models[0].pooled;
    let cmd_ok = rounded(pooled.weighted_f1) == 50
        && rounded(pooled.class("positive").map(|c| c.f1).unwrap_or(f64::NAN)) == 78
        && rounded(pooled.class("negative").map(|c| c.f1).unwrap_or(f64::NAN)) == 0;
    Ok(Outcome {
        pass: lib_ok && cmd_ok,
        detail: format!(
            "F1+ {} ({f1p:.4}), F1- {} ({f1n:.4}), weighted F1 {} ({:.4}); accuracy {:.4} (reference row lists 63); evaluate command weighted F1 {}",
            rounded(f1p),
            rounded(f1n),
            rounded(m.weighted_f1),
            m.weighted_f1,
            m.accuracy,
            rounded(pooled.weighted_f1)
        ),
    })
}

fn dynamics_separation(dir: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let gen = RunConfig {
        out: Some(dir.join("synthetic")),
        seed: 42,
        ..RunConfig::default()
    };
    let syn = commands::generate(&gen)?;
    let x = 100.0 * syn.bayes_accuracy;
    println!("      order-insensitive Bayes accuracy X = {x:.2}% (generator enumeration)");
    let mut cfg = RunConfig::load(&dir.join("synthetic").join(commands::EXPERIMENT_CONFIG_FILE))?;
    cfg.out = Some(dir.join("evaluate"));
    cfg.models = vec![ModelKind::Hcrf, ModelKind::Logreg];
    cfg.hcrf.hidden_states = vec![3];
    cfg.folds = 5;
    let report = commands::evaluate(&cfg)?;
    let hcrf = report.models[0].pooled.accuracy;
    let logreg = report.models[1].pooled.accuracy;
    let (fast, time) = within(Duration::from_secs(300), start);
    Ok(Outcome {
        pass: hcrf - logreg >= 10.0 && fast,
        detail: format!(
            "{} docs, X = {x:.2}%: HCRF {hcrf:.2}% vs logistic regression {logreg:.2}% (gap {:.2}, need >= 10), {time}",
            syn.transcripts.len(),
            hcrf - logreg
        ),
    })
}

/// Token indices at which a new IPU starts.
fn boundaries(t: &Transcript, ms: u64) -> Result<(usize, Vec<usize>)> {
    let ipus = segment_into_ipus(t, ms)?;
    let mut at = 0;
    let mut b = Vec::new();
    for ipu in &ipus {
        b.push(at);
        at += ipu.tokens.len();
    }
    Ok((ipus.len(), b))
}

fn random_timed_corpus(r: &mut ChaCha8Rng, n: usize) -> Vec<Transcript> {
    (0..n)
        .map(|i| {
            let mut clock = 0;
            let tokens = (0..r.gen_range(1..40))
                .map(|k| {
                    clock += r.gen_range(0..700);
                    let start = clock;
                    clock += r.gen_range(50..400);
                    TimedToken {
                        text: format!("w{k}"),
                        start_ms: start,
                        end_ms: clock,
                        pos: None,
                    }
                })
                .collect();
            Transcript {
                doc_id: format!("r{i}"),
                tokens,
                markers: vec![],
                valences: vec![],
            }
        })
        .collect()
}

fn segmentation_monotonicity() -> Result<Outcome> {
    let mut r = ChaCha8Rng::seed_from_u64(1006);
    let mut corpus = generate_synthetic(&SyntheticSpec::default(), 42)?.transcripts;
    corpus.extend(random_timed_corpus(&mut r, 500));
    let mut violations = 0;
    let mut totals = [0usize; 3];
    for t in &corpus {
        let (n150, b150) = boundaries(t, 150)?;
        let (n300, b300) = boundaries(t, 300)?;
        let (n500, b500) = boundaries(t, 500)?;
        totals[0] += n150;
        totals[1] += n300;
        totals[2] += n500;
        let refines = |fine: &[usize], coarse: &[usize]| coarse.iter().all(|b| fine.contains(b));
        if !(n150 >= n300 && n300 >= n500 && refines(&b150, &b300) && refines(&b300, &b500)) {
            violations += 1;
        }
    }
    Ok(Outcome {
        pass: violations == 0,
        detail: format!(
            "{} transcripts, IPUs 150/300/500 ms = {}/{}/{}, {violations} violations",
            corpus.len(),
            totals[0],
            totals[1],
            totals[2]
        ),
    })
}

fn reproducibility(dir: &Path) -> Result<Outcome> {
    let gen = RunConfig {
        out: Some(dir.join("synthetic")),
        seed: 3,
        synthetic: SyntheticSpec {
            num_docs: 150,
            ..SyntheticSpec::default()
        },
        ..RunConfig::default()
    };
    commands::generate(&gen)?;
    let mut cfg = RunConfig::load(&dir.join("synthetic").join(commands::EXPERIMENT_CONFIG_FILE))?;
    cfg.models = vec![ModelKind::Hcrf, ModelKind::Logreg, ModelKind::Majority];
    cfg.features.blocks = hcrf_opinion::features::FeatureBlock::parse_list("embedding,lexicon,pattern,paralinguistic")?;
    cfg.hcrf.context_windows = vec![0, 1];
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        cfg.out = Some(dir.join(run));
        commands::evaluate(&cfg)?;
        outputs.push(dir.join(run));
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for entry in fs::read_dir(&outputs[0])? {
        let name = entry?.file_name();
        // the resolved config names its own output directory
        if name == "config.toml" || name == "run.log" {
            continue;
        }
        compared += 1;
        if fs::read(outputs[0].join(&name))? != fs::read(outputs[1].join(&name))? {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    ensure!(compared >= 5, "expected report files, found {compared}");
    Ok(Outcome {
        pass: differing.is_empty(),
        detail: format!("{compared} report files compared across two evaluate runs, differing: {differing:?}"),
    })
}

fn introspection_sanity(dir: &Path) -> Result<Outcome> {
    let gen = RunConfig {
        out: Some(dir.join("synthetic")),
        seed: 42,
        ..RunConfig::default()
    };
    commands::generate(&gen)?;
    let mut cfg = RunConfig::load(&dir.join("synthetic").join(commands::EXPERIMENT_CONFIG_FILE))?;
    cfg.out = Some(dir.join("train"));
    cfg.models = vec![ModelKind::Hcrf];
    let trained = commands::train(&cfg)?;
    let report = commands::inspect(
        &trained.archive_path,
        &dir.join("inspect"),
        &InspectOptions {
            top_k: 5,
            ..InspectOptions::default()
        },
    )?;
    let mut ok = true;
    let mut parts = Vec::new();
    for label in ["negative", "positive"] {
        let matching: &[&str] = if label == "positive" { &POSITIVE_WORDS } else { &NEGATIVE_WORDS };
        let aligned: Vec<_> = report.states.iter().filter(|s| s.character == label).collect();
        if aligned.is_empty() {
            ok = false;
            parts.push(format!("no state aligned to {label}"));
        }
        for s in aligned {
            let hits = s.activation_words.iter().filter(|(w, _)| matching.contains(&w.as_str())).count();
            let precision = hits as f64 / 5.0;
            ok &= s.activation_words.len() == 5 && precision >= 0.8;
            let words: Vec<&str> = s.activation_words.iter().map(|(w, _)| w.as_str()).collect();
            parts.push(format!("state {} -> {label}: top-5 precision {precision:.1} {words:?}", s.state));
        }
    }
    Ok(Outcome {
        pass: ok,
        detail: parts.join("; "),
    })
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        fs::create_dir_all(&p).expect("scratch directory");
        p
    };
    let criteria: Vec<Criterion> = vec![
        ("inference oracle", Box::new(inference_oracle)),
        ("gradient check", Box::new(gradient_check)),
        ("normalization and consistency", Box::new(normalization_suite)),
        ("majority-label row", {
            let d = sub("majority");
            Box::new(move || majority_row(&d))
        }),
        ("dynamics separation", {
            let d = sub("dynamics");
            Box::new(move || dynamics_separation(&d))
        }),
        ("segmentation monotonicity", Box::new(segmentation_monotonicity)),
        ("reproducibility", {
            let d = sub("repro");
            Box::new(move || reproducibility(&d))
        }),
        ("introspection sanity", {
            let d = sub("introspection");
            Box::new(move || introspection_sanity(&d))
        }),
    ];
    let total = criteria.len();
    let mut failed = 0;
    println!("\nacceptance criteria");
    for (name, check) in criteria {
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome {
                pass: false,
                detail: format!("error: {e:#}"),
            },
            Err(_) => Outcome {
                pass: false,
                detail: "panicked".to_owned(),
            },
        };
        if !outcome.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {} of {total} criteria passed\n", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
