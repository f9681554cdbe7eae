use hcrf_opinion::corpus::synthetic::{generate_synthetic, order_insensitive_bayes_accuracy, SyntheticSpec};
use hcrf_opinion::corpus::{filter_neutral, load_corpus, save_corpus, ParaMarker, TimedToken, Transcript, ValenceClass};
use hcrf_opinion::Error;
use proptest::prelude::*;

fn arb_transcript(id: usize) -> impl Strategy<Value = Transcript> {
    let token = ("[a-zA-Z']{1,8}", 0u64..500, 0u64..300, prop::option::of("[A-Z]{2,4}"));
    (
        prop::collection::vec(token, 1..15),
        prop::collection::vec(("[a-z ]{1,12}", 0u64..5000), 0..3),
        prop::collection::vec(prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, 3.5, 4.0, 5.0]), 0..3),
    )
        .prop_map(move |(toks, marks, valences)| {
            let mut clock = 0;
            let tokens = toks
                .into_iter()
                .map(|(text, gap, dur, pos)| {
                    clock += gap;
                    TimedToken {
                        text,
                        start_ms: clock,
                        end_ms: clock + dur,
                        pos,
                    }
                })
                .collect();
            let mut markers: Vec<ParaMarker> = marks
                .into_iter()
                .map(|(t, ts)| ParaMarker {
                    text: format!("*{}*", t.trim().replace(' ', "_").trim_matches('_').to_owned() + "x"),
                    timestamp_ms: ts,
                })
                .collect();
            markers.sort_by_key(|m| m.timestamp_ms);
            Transcript {
                doc_id: format!("doc{id}"),
                tokens,
                markers,
                valences,
            }
        })
}

fn arb_corpus() -> impl Strategy<Value = Vec<Transcript>> {
    (1usize..5).prop_flat_map(|n| (0..n).map(arb_transcript).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn save_then_load_is_identity(corpus in arb_corpus()) {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(dir.path(), &corpus).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        // markers sharing a timestamp keep their relative order
        prop_assert_eq!(loaded, corpus);
    }

    #[test]
    fn neutral_filter_is_idempotent(corpus in arb_corpus()) {
        let once = filter_neutral(corpus);
        prop_assert!(once.iter().all(|t| t.valence_class() != ValenceClass::Neutral));
        prop_assert_eq!(filter_neutral(once.clone()), once);
    }
}

#[test]
fn empty_directory_is_an_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_corpus(dir.path()).unwrap().is_empty());
}

#[test]
fn missing_path_is_an_io_error_naming_it() {
    let err = load_corpus(std::path::Path::new("/nonexistent/corpus")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/corpus"));
}

#[test]
fn every_malformed_record_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("manifest.tsv"),
        "#format opinion-corpus-manifest 1\ndoc_id\tvalence\tfile\na\t4\ta.tsv\nb\t7\tb.tsv\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("a.tsv"),
        "#format opinion-transcript 1\ndoc_id\ttext\tstart_ms\tend_ms\na\tgood\t100\t200\na\tbad\t50\t80\na\tx\tq\t1\n",
    )
    .unwrap();
    match load_corpus(dir.path()) {
        Err(Error::Malformed(issues)) => {
            let lines: Vec<(String, usize)> = issues
                .iter()
                .map(|i| (i.path.file_name().unwrap().to_string_lossy().into_owned(), i.line))
                .collect();
            assert!(lines.contains(&("manifest.tsv".into(), 4)), "{lines:?}");
            assert!(lines.contains(&("a.tsv".into(), 4)), "{lines:?}");
            assert!(lines.contains(&("a.tsv".into(), 5)), "{lines:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn generator_round_trips_through_disk() {
    let spec = SyntheticSpec {
        num_docs: 25,
        ..SyntheticSpec::default()
    };
    let c = generate_synthetic(&spec, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(dir.path(), &c.transcripts).unwrap();
    assert_eq!(load_corpus(dir.path()).unwrap(), c.transcripts);
}

/// Independent route to the same number: simulate the generator's outcome
/// variables, bucket by what a bag of words can see, and take the majority
/// label per bucket. With many draws this converges to the exact value.
#[test]
fn bayes_accuracy_agrees_with_simulation() {
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;
    let spec = SyntheticSpec {
        positive_fraction: 0.65,
        mixed_fraction: 0.7,
        min_segments: 2,
        max_segments: 5,
        ..SyntheticSpec::default()
    };
    let exact = order_insensitive_bayes_accuracy(&spec).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut buckets: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
    let draws = 400_000;
    for _ in 0..draws {
        let y = rng.gen_bool(spec.positive_fraction) as usize;
        let n = rng.gen_range(spec.min_segments..=spec.max_segments);
        let k = if rng.gen_bool(spec.mixed_fraction) { rng.gen_range(1..n) } else { 0 };
        let pos = if y == 1 { n - k } else { k };
        buckets.entry((n, pos)).or_default()[y] += 1;
    }
    let correct: usize = buckets.values().map(|c| c[0].max(c[1])).sum();
    let simulated = correct as f64 / draws as f64;
    assert!((simulated - exact).abs() < 5e-3, "{simulated} vs {exact}");
}

#[test]
fn default_bayes_accuracy() {
    assert!((order_insensitive_bayes_accuracy(&SyntheticSpec::default()).unwrap() - 0.6).abs() < 1e-12);
}
