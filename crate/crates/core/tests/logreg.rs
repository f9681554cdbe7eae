use hcrf_opinion::logreg::{aggregate_document_vector, objective_and_gradient, train_logreg, C_GRID};
use hcrf_opinion::{Label, ObservationSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let v: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let z: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + r.gen_range(-1.0..1.0);
        // keep both classes present
        let label = if i < 2 { i } else { (z > 0.0) as usize };
        x.push(v);
        y.push(Label(label));
    }
    (x, y)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn gradient_matches_finite_differences() {
    let (x, y) = dataset(1, 30, 4);
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let p: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
    let (_, g) = objective_and_gradient(&x, &y, &p, 0.7).unwrap();
    for i in 0..5 {
        let h = 1e-5;
        let mut a = p.clone();
        let mut b = p.clone();
        a[i] += h;
        b[i] -= h;
        let fd = (objective_and_gradient(&x, &y, &a, 0.7).unwrap().0 - objective_and_gradient(&x, &y, &b, 0.7).unwrap().0) / (2.0 * h);
        assert!((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1.0) < 1e-7);
    }
}

#[test]
fn gradient_vanishes_at_the_returned_optimum() {
    let (x, y) = dataset(3, 60, 5);
    for c in C_GRID {
        let m = train_logreg(&x, &y, c, 0).unwrap();
        let mut p = m.weights.clone();
        p.push(m.intercept);
        // recomputed directly from the definition
        let mut g: Vec<f64> = m.weights.iter().map(|w| w / c).chain([0.0]).collect();
        for (xi, yi) in x.iter().zip(&y) {
            let z: f64 = xi.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>() + m.intercept;
            let r = 1.0 / (1.0 + (-z).exp()) - yi.0 as f64;
            for (gj, v) in g.iter_mut().zip(xi) {
                *gj += r * v;
            }
            g[5] += r;
        }
        assert!(norm(&g) <= 1e-6, "C={c}: gradient norm {}", norm(&g));
    }
}

#[test]
fn restarts_agree_and_norm_grows_with_c() {
    let (x, y) = dataset(4, 50, 3);
    let mut last = 0.0;
    for c in C_GRID {
        let objectives: Vec<f64> = (0..4)
            .map(|s| {
                let m = train_logreg(&x, &y, c, s).unwrap();
                let mut p = m.weights.clone();
                p.push(m.intercept);
                objective_and_gradient(&x, &y, &p, c).unwrap().0
            })
            .collect();
        for o in &objectives {
            assert!((o - objectives[0]).abs() <= 1e-6);
        }
        let n = norm(&train_logreg(&x, &y, c, 0).unwrap().weights);
        assert!(n >= last - 1e-9, "C={c}: {n} < {last}");
        last = n;
    }
}

#[test]
fn tiny_c_predicts_the_majority() {
    let x = vec![vec![1.0], vec![2.0], vec![-1.0], vec![3.0], vec![0.5]];
    let y = vec![Label::POSITIVE, Label::POSITIVE, Label::NEGATIVE, Label::POSITIVE, Label::NEGATIVE];
    let m = train_logreg(&x, &y, 1e-8, 0).unwrap();
    assert!(norm(&m.weights) < 1e-6);
    for v in &x {
        assert_eq!(m.predict(v).unwrap().0, Label::POSITIVE);
    }
}

#[test]
fn batch_predictions_equal_single_ones() {
    let (x, y) = dataset(5, 40, 3);
    let m = train_logreg(&x, &y, 1.0, 0).unwrap();
    let batch = m.predict_batch(&x).unwrap();
    for (v, b) in x.iter().zip(batch) {
        assert_eq!(m.predict(v).unwrap(), b);
    }
}

#[test]
fn aggregation_matches_direct_mean() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let len = r.gen_range(1..10);
        let items: Vec<Vec<f64>> = (0..len).map(|_| (0..4).map(|_| r.gen_range(-5.0..5.0)).collect()).collect();
        let s = ObservationSequence::new("d", items.clone()).unwrap();
        let got = aggregate_document_vector(&s);
        for d in 0..4 {
            let mean = items.iter().map(|v| v[d]).sum::<f64>() / len as f64;
            assert!((got[d] - mean).abs() < 1e-12);
        }
        if len == 1 {
            assert_eq!(got, items[0]);
        }
    }
}
