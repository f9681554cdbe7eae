//! Regularized conditional likelihood training.
//!
//! The objective is `-Σ_i log P(y_i | x_i, θ) + (λ/2)·‖θ‖²`, summed over every
//! parameter block, so the regularizer contributes `λ·θ` to the gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lbfgs::{self, ConvergenceStatus, IterationRecord, LbfgsConfig};
use crate::model::{self, HcrfParameters, Label, Lattice, ObservationSequence, PosteriorDistribution};
use crate::numeric::log_sum_exp;

/// Hidden-state counts explored in the reference experiments.
pub const HIDDEN_STATE_GRID: [usize; 4] = [2, 3, 4, 5];
/// Context windows explored in the reference experiments.
pub const CONTEXT_WINDOW_GRID: [usize; 3] = [0, 1, 2];
/// ℓ2 strengths explored in the reference experiments.
pub const L2_GRID: [f64; 7] = [0.01, 0.05, 0.075, 0.1, 0.25, 0.5, 1.0];

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub num_hidden_states: usize,
    /// Neighbours concatenated on each side of a position.
    pub context_window: usize,
    /// λ in `(λ/2)·‖θ‖²`.
    pub l2: f64,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            num_hidden_states: 3,
            context_window: 0,
            l2: 0.1,
            max_iterations: 300,
            grad_tolerance: 1e-5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_hidden_states == 0 {
            return Err(Error::Config("num_hidden_states must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be finite and non-negative, got {}", self.l2)));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::Config("grad_tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub iterations: Vec<IterationRecord>,
    pub status: ConvergenceStatus,
}

impl TrainingTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Trained parameters together with the context window their feature
/// dimension was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcrfClassifier {
    pub params: HcrfParameters,
    pub context_window: usize,
}

impl HcrfClassifier {
    /// Posterior for a sequence given in base (unwindowed) features.
    pub fn posterior(&self, x: &ObservationSequence) -> Result<PosteriorDistribution> {
        model::posterior(&apply_context_window(x, self.context_window), &self.params)
    }

    pub fn predict(&self, x: &ObservationSequence) -> Result<Label> {
        Ok(self.posterior(x)?.argmax())
    }
}

/// Replaces each item by the concatenation of the `2w + 1` items centred on
/// it, with zero vectors beyond either end.
pub fn apply_context_window(seq: &ObservationSequence, w: usize) -> ObservationSequence {
    if w == 0 {
        return seq.clone();
    }
    let d = seq.dim();
    let items = seq.items();
    let len = items.len() as isize;
    let out: Vec<Vec<f64>> = (0..len)
        .map(|j| {
            let mut v = Vec::with_capacity((2 * w + 1) * d);
            for k in (j - w as isize)..=(j + w as isize) {
                if (0..len).contains(&k) {
                    v.extend_from_slice(&items[k as usize]);
                } else {
                    v.extend(std::iter::repeat_n(0.0, d));
                }
            }
            v
        })
        .collect();
    ObservationSequence::new(seq.doc_id(), out).expect("windowing preserves validity")
}

fn check_dataset(dataset: &[(ObservationSequence, Label)], theta: &HcrfParameters) -> Result<()> {
    if dataset.is_empty() {
        return Err(invalid!("training set is empty"));
    }
    for (x, y) in dataset {
        if y.0 >= theta.num_labels() {
            return Err(invalid!("sequence {:?} has out-of-range label {}", x.doc_id(), y.0));
        }
        if x.dim() != theta.feature_dim() {
            return Err(invalid!(
                "sequence {:?} has dimension {}, parameters expect {}",
                x.doc_id(),
                x.dim(),
                theta.feature_dim()
            ));
        }
    }
    Ok(())
}

/// Adds the negative log-likelihood gradient of one sequence into `grad` and
/// returns its negative log-likelihood.
fn accumulate_sequence(x: &ObservationSequence, gold: Label, theta: &HcrfParameters, grad: &mut [f64]) -> Result<f64> {
    let lattice = Lattice::new(x, theta)?;
    let margs: Vec<_> = (0..theta.num_labels()).map(|y| lattice.marginals(y)).collect();
    let log_z: Vec<f64> = margs.iter().map(|m| m.log_partition).collect();
    let total = log_sum_exp(&log_z);
    let nll = total - log_z[gold.0];

    let hs = theta.num_hidden_states();
    let d = theta.feature_dim();
    for (y, m) in margs.iter().enumerate() {
        // d(-log P(gold|x))/dθ = E_{P(y,h|x)}[f] - E_{P(h|gold,x)}[f]
        let weight = (log_z[y] - total).exp() - if y == gold.0 { 1.0 } else { 0.0 };
        if weight == 0.0 {
            continue;
        }
        for (item, row) in x.items().iter().zip(&m.state_posteriors) {
            for (h, p) in row.iter().enumerate() {
                let c = weight * p;
                let o = theta.observation_offset(h);
                for (g, v) in grad[o..o + d].iter_mut().zip(item) {
                    *g += c * v;
                }
                grad[theta.state_offset(y, h)] += c;
            }
        }
        for block in &m.pair_posteriors {
            for from in 0..hs {
                for to in 0..hs {
                    grad[theta.transition_offset(y, from, to)] += weight * block[from * hs + to];
                }
            }
        }
    }
    Ok(nll)
}

/// Sequences per parallel work unit. Depends only on the dataset size so
/// the summation order, and hence every bit of the result, is independent of
/// the thread count.
fn chunk_size(n: usize) -> usize {
    n.div_ceil(32).max(8)
}

/// Objective value and gradient in one pass.
pub fn objective_and_gradient(
    dataset: &[(ObservationSequence, Label)],
    theta: &HcrfParameters,
    lambda: f64,
) -> Result<(f64, HcrfParameters)> {
    check_dataset(dataset, theta)?;
    let n = theta.as_slice().len();
    let partials: Vec<(f64, Vec<f64>)> = dataset
        .par_chunks(chunk_size(dataset.len()))
        .map(|chunk| {
            let mut grad = vec![0.0; n];
            let mut nll = 0.0;
            for (x, y) in chunk {
                nll += accumulate_sequence(x, *y, theta, &mut grad)?;
            }
            Ok((nll, grad))
        })
        .collect::<Result<_>>()?;

    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for (nll, g) in partials {
        value += nll;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    value += 0.5 * lambda * theta.squared_norm();
    for (g, w) in grad.iter_mut().zip(theta.as_slice()) {
        *g += lambda * w;
    }
    let grad = HcrfParameters::from_flat(theta.num_hidden_states(), theta.num_labels(), theta.feature_dim(), grad)
        .map_err(|_| Error::NonFinite {
            iteration: 0,
            detail: "gradient has non-finite entries".into(),
        })?;
    Ok((value, grad))
}

/// `-Σ_i log P(y_i | x_i, θ) + (λ/2)·‖θ‖²`.
pub fn objective(dataset: &[(ObservationSequence, Label)], theta: &HcrfParameters, lambda: f64) -> Result<f64> {
    check_dataset(dataset, theta)?;
    let terms: Vec<f64> = dataset
        .par_iter()
        .map(|(x, y)| {
            let log_z = model::log_partitions(x, theta)?;
            Ok(log_sum_exp(&log_z) - log_z[y.0])
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() + 0.5 * lambda * theta.squared_norm())
}

/// Gradient of [`objective`], laid out like the parameters.
pub fn gradient(dataset: &[(ObservationSequence, Label)], theta: &HcrfParameters, lambda: f64) -> Result<HcrfParameters> {
    Ok(objective_and_gradient(dataset, theta, lambda)?.1)
}

/// Small symmetric uniform initialization; breaks the exchangeability of
/// hidden states that makes the all-zero point a saddle.
pub fn initial_parameters(num_hidden_states: usize, num_labels: usize, feature_dim: usize, seed: u64) -> Result<HcrfParameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = HcrfParameters::parameter_count(num_hidden_states, num_labels, feature_dim);
    let weights = (0..n).map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE)).collect();
    HcrfParameters::from_flat(num_hidden_states, num_labels, feature_dim, weights)
}

/// Fits an HCRF with L-BFGS. Sequences are given in base features; the
/// configured context window is applied here, so the returned parameters have
/// dimension `(2w + 1)·D`.
pub fn train(dataset: &[(ObservationSequence, Label)], config: &TrainingConfig) -> Result<(HcrfParameters, TrainingTrace)> {
    config.validate()?;
    let Some((first, _)) = dataset.first() else {
        return Err(invalid!("training set is empty"));
    };
    let num_labels = dataset.iter().map(|(_, y)| y.0 + 1).max().unwrap_or(0).max(2);
    for y in 0..num_labels {
        if !dataset.iter().any(|(_, l)| l.0 == y) {
            return Err(invalid!("training set has no example of label {y}"));
        }
    }

    let windowed: Vec<(ObservationSequence, Label)>;
    let data: &[(ObservationSequence, Label)] = if config.context_window > 0 {
        windowed = dataset
            .iter()
            .map(|(x, y)| (apply_context_window(x, config.context_window), *y))
            .collect();
        &windowed
    } else {
        dataset
    };
    let dim = first.dim() * (2 * config.context_window + 1);
    let init = initial_parameters(config.num_hidden_states, num_labels, dim, config.seed)?;
    let (hs, ys) = (init.num_hidden_states(), init.num_labels());

    let lbfgs_config = LbfgsConfig {
        max_iterations: config.max_iterations,
        grad_tolerance: config.grad_tolerance,
        ..LbfgsConfig::default()
    };
    let minimum = lbfgs::minimize(
        |w| {
            let theta = HcrfParameters::from_flat(hs, ys, dim, w.to_vec()).map_err(|e| Error::NonFinite {
                iteration: 0,
                detail: e.to_string(),
            })?;
            let (f, g) = objective_and_gradient(data, &theta, config.l2)?;
            Ok((f, g.into_flat()))
        },
        init.into_flat(),
        &lbfgs_config,
    )?;
    log::debug!(
        "hcrf training finished after {} iterations: {:?}, objective {}",
        minimum.trace.len() - 1,
        minimum.status,
        minimum.objective
    );
    let params = HcrfParameters::from_flat(hs, ys, dim, minimum.x)?;
    Ok((
        params,
        TrainingTrace {
            iterations: minimum.trace,
            status: minimum.status,
        },
    ))
}

/// [`train`] wrapped into a classifier that remembers its context window.
pub fn train_classifier(
    dataset: &[(ObservationSequence, Label)],
    config: &TrainingConfig,
) -> Result<(HcrfClassifier, TrainingTrace)> {
    let (params, trace) = train(dataset, config)?;
    Ok((
        HcrfClassifier {
            params,
            context_window: config.context_window,
        },
        trace,
    ))
}
