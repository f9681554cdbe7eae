//! HCRF parameterization and exact inference.
//!
//! A document is a chain of per-IPU observations `x_1..x_L`. Every position
//! carries a latent state `h_j` from a shared set of `|H|` states, and the
//! whole chain receives one label `y`. The score of a configuration is
//!
//! ```text
//! Ψ(y, h, x) = Σ_j ⟨x_j, θ_o(h_j)⟩ + Σ_j θ_s(y, h_j) + Σ_{j<L} θ_t(y, h_j, h_{j+1})
//! ```
//!
//! and `P(y | x) ∝ Σ_h exp Ψ(y, h, x)`. All chain sums run in log-space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{argmax, dot, log_sum_exp};

/// Maximum number of hidden paths [`brute_force_posterior`] will enumerate.
pub const BRUTE_FORCE_PATH_LIMIT: u128 = 1_000_000;

/// Index of an output class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub usize);

impl Label {
    pub const NEGATIVE: Label = Label(0);
    pub const POSITIVE: Label = Label(1);

    pub fn index(self) -> usize {
        self.0
    }
}

/// Registered label names; index `i` names `Label(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(invalid!("a label set needs at least 2 labels, got {}", names.len()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(invalid!("duplicate label name {n:?}"));
            }
        }
        Ok(Self { names })
    }

    /// `negative` = 0, `positive` = 1.
    pub fn polarity() -> Self {
        Self {
            names: vec!["negative".to_owned(), "positive".to_owned()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, label: Label) -> Option<&str> {
        self.names.get(label.0).map(String::as_str)
    }

    pub fn lookup(&self, name: &str) -> Option<Label> {
        self.names.iter().position(|n| n == name).map(Label)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelSet::new(names)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.names
    }
}

/// One document as an ordered list of per-IPU feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    doc_id: String,
    dim: usize,
    items: Vec<Vec<f64>>,
}

impl ObservationSequence {
    /// Rejects empty sequences, ragged dimensions and non-finite entries.
    pub fn new(doc_id: impl Into<String>, items: Vec<Vec<f64>>) -> Result<Self> {
        let doc_id = doc_id.into();
        let Some(first) = items.first() else {
            return Err(invalid!("observation sequence {doc_id:?} is empty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(invalid!("observation sequence {doc_id:?} has zero-dimensional features"));
        }
        for (j, v) in items.iter().enumerate() {
            if v.len() != dim {
                return Err(invalid!(
                    "observation sequence {doc_id:?}: item {j} has dimension {}, expected {dim}",
                    v.len()
                ));
            }
            if let Some(d) = v.iter().position(|x| !x.is_finite()) {
                return Err(invalid!(
                    "observation sequence {doc_id:?}: item {j} coordinate {d} is not finite"
                ));
            }
        }
        Ok(Self { doc_id, dim, items })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Always false; sequences hold at least one item.
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[Vec<f64>] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Vec<f64>> {
        self.items
    }
}

/// θ = (θ_o, θ_s, θ_t) stored in one flat vector so optimizers can treat it as
/// a point in `R^n`.
///
/// Layout: `θ_o` as `|H| × D` row-major, then `θ_s` as `|Y| × |H|`, then `θ_t`
/// as `|Y| × |H| × |H|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters")]
pub struct HcrfParameters {
    num_hidden_states: usize,
    num_labels: usize,
    feature_dim: usize,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParameters {
    num_hidden_states: usize,
    num_labels: usize,
    feature_dim: usize,
    weights: Vec<f64>,
}

impl TryFrom<RawParameters> for HcrfParameters {
    type Error = Error;
    fn try_from(raw: RawParameters) -> Result<Self> {
        HcrfParameters::from_flat(raw.num_hidden_states, raw.num_labels, raw.feature_dim, raw.weights)
    }
}

impl HcrfParameters {
    pub fn parameter_count(num_hidden_states: usize, num_labels: usize, feature_dim: usize) -> usize {
        let (h, y, d) = (num_hidden_states, num_labels, feature_dim);
        h * d + y * h + y * h * h
    }

    pub fn zeros(num_hidden_states: usize, num_labels: usize, feature_dim: usize) -> Result<Self> {
        let n = Self::parameter_count(num_hidden_states, num_labels, feature_dim);
        Self::from_flat(num_hidden_states, num_labels, feature_dim, vec![0.0; n])
    }

    pub fn from_flat(
        num_hidden_states: usize,
        num_labels: usize,
        feature_dim: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if num_hidden_states == 0 {
            return Err(invalid!("at least one hidden state is required"));
        }
        if num_labels < 2 {
            return Err(invalid!("at least two labels are required, got {num_labels}"));
        }
        if feature_dim == 0 {
            return Err(invalid!("feature dimension must be positive"));
        }
        let expected = Self::parameter_count(num_hidden_states, num_labels, feature_dim);
        if weights.len() != expected {
            return Err(invalid!(
                "parameter vector has {} entries, expected {expected}",
                weights.len()
            ));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(invalid!("parameter {i} is not finite"));
        }
        Ok(Self {
            num_hidden_states,
            num_labels,
            feature_dim,
            weights,
        })
    }

    /// Builds parameters from nested blocks: `observation[h][d]`,
    /// `state[y][h]` and `transition[y][h][h']`.
    pub fn from_blocks(
        observation: &[Vec<f64>],
        state: &[Vec<f64>],
        transition: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let h = observation.len();
        let d = observation.first().map_or(0, Vec::len);
        let y = state.len();
        let mut weights = Vec::with_capacity(Self::parameter_count(h, y, d));
        for row in observation {
            if row.len() != d {
                return Err(invalid!("ragged observation block"));
            }
            weights.extend_from_slice(row);
        }
        for row in state {
            if row.len() != h {
                return Err(invalid!("state block rows must have {h} entries"));
            }
            weights.extend_from_slice(row);
        }
        if transition.len() != y {
            return Err(invalid!("transition block must have {y} label slices"));
        }
        for slice in transition {
            if slice.len() != h {
                return Err(invalid!("transition slices must be {h}x{h}"));
            }
            for row in slice {
                if row.len() != h {
                    return Err(invalid!("transition slices must be {h}x{h}"));
                }
                weights.extend_from_slice(row);
            }
        }
        Self::from_flat(h, y, d, weights)
    }

    pub fn num_hidden_states(&self) -> usize {
        self.num_hidden_states
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Mutable view of the flat vector. Callers must keep every entry finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.weights
    }

    pub fn squared_norm(&self) -> f64 {
        dot(&self.weights, &self.weights)
    }

    pub(crate) fn observation_offset(&self, h: usize) -> usize {
        h * self.feature_dim
    }

    pub(crate) fn state_offset(&self, y: usize, h: usize) -> usize {
        self.num_hidden_states * self.feature_dim + y * self.num_hidden_states + h
    }

    pub(crate) fn transition_offset(&self, y: usize, from: usize, to: usize) -> usize {
        let hs = self.num_hidden_states;
        hs * self.feature_dim + self.num_labels * hs + (y * hs + from) * hs + to
    }

    /// θ_o(h), a vector of length D.
    pub fn observation(&self, h: usize) -> &[f64] {
        let o = self.observation_offset(h);
        &self.weights[o..o + self.feature_dim]
    }

    pub fn observation_mut(&mut self, h: usize) -> &mut [f64] {
        let o = self.observation_offset(h);
        let d = self.feature_dim;
        &mut self.weights[o..o + d]
    }

    /// θ_s(y, h).
    pub fn state(&self, y: usize, h: usize) -> f64 {
        self.weights[self.state_offset(y, h)]
    }

    pub fn set_state(&mut self, y: usize, h: usize, value: f64) {
        let o = self.state_offset(y, h);
        self.weights[o] = value;
    }

    /// θ_t(y, from, to).
    pub fn transition(&self, y: usize, from: usize, to: usize) -> f64 {
        self.weights[self.transition_offset(y, from, to)]
    }

    pub fn set_transition(&mut self, y: usize, from: usize, to: usize, value: f64) {
        let o = self.transition_offset(y, from, to);
        self.weights[o] = value;
    }

    fn check_sequence(&self, x: &ObservationSequence) -> Result<()> {
        if x.dim() != self.feature_dim {
            return Err(invalid!(
                "sequence {:?} has feature dimension {}, model expects {}",
                x.doc_id(),
                x.dim(),
                self.feature_dim
            ));
        }
        Ok(())
    }

    fn check_label(&self, y: Label) -> Result<()> {
        if y.0 >= self.num_labels {
            return Err(invalid!("label {} out of range [0, {})", y.0, self.num_labels));
        }
        Ok(())
    }
}

/// `P(y | x, θ)` for every label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    pub probs: Vec<f64>,
}

impl PosteriorDistribution {
    /// Most probable label; ties go to the lowest index.
    pub fn argmax(&self) -> Label {
        Label(argmax(&self.probs))
    }

    fn from_log_scores(scores: &[f64]) -> Self {
        let total = log_sum_exp(scores);
        let mut probs: Vec<f64> = scores.iter().map(|s| (s - total).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Self { probs }
    }
}

/// Hidden-state marginals of the chain conditioned on one label.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    num_hidden_states: usize,
    /// `state_posteriors[j][h] = P(h_j = h | y, x)`.
    pub state_posteriors: Vec<Vec<f64>>,
    /// `pair_posteriors[j][h * |H| + h'] = P(h_j = h, h_{j+1} = h' | y, x)`,
    /// one entry per adjacent pair (`L - 1` of them).
    pub pair_posteriors: Vec<Vec<f64>>,
    /// `log Σ_h exp Ψ(y, h, x)`.
    pub log_partition: f64,
}

impl Marginals {
    pub fn pair(&self, j: usize, from: usize, to: usize) -> f64 {
        self.pair_posteriors[j][from * self.num_hidden_states + to]
    }
}

/// Per-sequence inference workspace. Observation scores `⟨x_j, θ_o(h)⟩` are
/// shared by every label, so they are computed once.
pub(crate) struct Lattice<'a> {
    theta: &'a HcrfParameters,
    len: usize,
    /// `emissions[j * |H| + h]`.
    emissions: Vec<f64>,
}

impl<'a> Lattice<'a> {
    pub(crate) fn new(x: &ObservationSequence, theta: &'a HcrfParameters) -> Result<Self> {
        theta.check_sequence(x)?;
        let hs = theta.num_hidden_states;
        let mut emissions = Vec::with_capacity(x.len() * hs);
        for item in x.items() {
            for h in 0..hs {
                emissions.push(dot(item, theta.observation(h)));
            }
        }
        Ok(Self {
            theta,
            len: x.len(),
            emissions,
        })
    }

    fn node(&self, y: usize, j: usize, h: usize) -> f64 {
        self.emissions[j * self.theta.num_hidden_states + h] + self.theta.state(y, h)
    }

    /// `alpha[j * |H| + h]` = log-sum of scores of all prefixes ending in `h` at `j`.
    fn forward(&self, y: usize) -> Vec<f64> {
        let hs = self.theta.num_hidden_states;
        let mut alpha = vec![0.0; self.len * hs];
        for h in 0..hs {
            alpha[h] = self.node(y, 0, h);
        }
        let mut buf = vec![0.0; hs];
        for j in 1..self.len {
            for to in 0..hs {
                for (from, b) in buf.iter_mut().enumerate() {
                    *b = alpha[(j - 1) * hs + from] + self.theta.transition(y, from, to);
                }
                alpha[j * hs + to] = log_sum_exp(&buf) + self.node(y, j, to);
            }
        }
        alpha
    }

    /// `beta[j * |H| + h]` = log-sum of scores of all suffixes after `h` at `j`.
    fn backward(&self, y: usize) -> Vec<f64> {
        let hs = self.theta.num_hidden_states;
        let mut beta = vec![0.0; self.len * hs];
        let mut buf = vec![0.0; hs];
        for j in (0..self.len.saturating_sub(1)).rev() {
            for from in 0..hs {
                for (to, b) in buf.iter_mut().enumerate() {
                    *b = self.theta.transition(y, from, to) + self.node(y, j + 1, to) + beta[(j + 1) * hs + to];
                }
                beta[j * hs + from] = log_sum_exp(&buf);
            }
        }
        beta
    }

    pub(crate) fn log_partition(&self, y: usize) -> f64 {
        let hs = self.theta.num_hidden_states;
        let alpha = self.forward(y);
        log_sum_exp(&alpha[(self.len - 1) * hs..])
    }

    pub(crate) fn marginals(&self, y: usize) -> Marginals {
        let hs = self.theta.num_hidden_states;
        let alpha = self.forward(y);
        let beta = self.backward(y);
        let log_z = log_sum_exp(&alpha[(self.len - 1) * hs..]);

        let mut state_posteriors = Vec::with_capacity(self.len);
        for j in 0..self.len {
            let mut row: Vec<f64> = (0..hs)
                .map(|h| (alpha[j * hs + h] + beta[j * hs + h] - log_z).exp())
                .collect();
            renormalize(&mut row);
            state_posteriors.push(row);
        }

        let mut pair_posteriors = Vec::with_capacity(self.len.saturating_sub(1));
        for j in 0..self.len.saturating_sub(1) {
            let mut block = vec![0.0; hs * hs];
            for from in 0..hs {
                for to in 0..hs {
                    block[from * hs + to] = (alpha[j * hs + from]
                        + self.theta.transition(y, from, to)
                        + self.node(y, j + 1, to)
                        + beta[(j + 1) * hs + to]
                        - log_z)
                        .exp();
                }
            }
            renormalize(&mut block);
            pair_posteriors.push(block);
        }

        Marginals {
            num_hidden_states: hs,
            state_posteriors,
            pair_posteriors,
            log_partition: log_z,
        }
    }
}

fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for p in v {
            *p /= s;
        }
    }
}

/// Ψ(y, h, x; θ) evaluated term by term.
pub fn potential(y: Label, hidden: &[usize], x: &ObservationSequence, theta: &HcrfParameters) -> Result<f64> {
    theta.check_sequence(x)?;
    theta.check_label(y)?;
    if hidden.len() != x.len() {
        return Err(invalid!(
            "hidden sequence has length {}, observations have length {}",
            hidden.len(),
            x.len()
        ));
    }
    if let Some(&h) = hidden.iter().find(|&&h| h >= theta.num_hidden_states) {
        return Err(invalid!(
            "hidden state {h} out of range [0, {})",
            theta.num_hidden_states
        ));
    }
    let mut score = 0.0;
    for (item, &h) in x.items().iter().zip(hidden) {
        score += dot(item, theta.observation(h));
        score += theta.state(y.0, h);
    }
    for pair in hidden.windows(2) {
        score += theta.transition(y.0, pair[0], pair[1]);
    }
    Ok(score)
}

/// `log Σ_h exp Ψ(y, h, x; θ)` by the forward recursion, O(L·|H|²).
pub fn log_partition_per_label(y: Label, x: &ObservationSequence, theta: &HcrfParameters) -> Result<f64> {
    theta.check_label(y)?;
    Ok(Lattice::new(x, theta)?.log_partition(y.0))
}

/// Per-label log partition values for every label, in label order.
pub fn log_partitions(x: &ObservationSequence, theta: &HcrfParameters) -> Result<Vec<f64>> {
    let lattice = Lattice::new(x, theta)?;
    Ok((0..theta.num_labels).map(|y| lattice.log_partition(y)).collect())
}

pub fn posterior(x: &ObservationSequence, theta: &HcrfParameters) -> Result<PosteriorDistribution> {
    Ok(PosteriorDistribution::from_log_scores(&log_partitions(x, theta)?))
}

/// Label maximizing the posterior; ties resolve to the lowest label index.
pub fn predict(x: &ObservationSequence, theta: &HcrfParameters) -> Result<Label> {
    Ok(posterior(x, theta)?.argmax())
}

/// Forward-backward state and pair marginals given label `y`.
pub fn marginals(y: Label, x: &ObservationSequence, theta: &HcrfParameters) -> Result<Marginals> {
    theta.check_label(y)?;
    Ok(Lattice::new(x, theta)?.marginals(y.0))
}

/// Posterior by explicit enumeration of every hidden sequence. Refuses when
/// `|H|^L` exceeds [`BRUTE_FORCE_PATH_LIMIT`].
pub fn brute_force_posterior(x: &ObservationSequence, theta: &HcrfParameters) -> Result<PosteriorDistribution> {
    theta.check_sequence(x)?;
    let hs = theta.num_hidden_states;
    let paths = (hs as u128).checked_pow(x.len() as u32).unwrap_or(u128::MAX);
    if paths > BRUTE_FORCE_PATH_LIMIT {
        return Err(Error::BudgetExceeded {
            paths,
            limit: BRUTE_FORCE_PATH_LIMIT,
        });
    }
    let mut per_label: Vec<Vec<f64>> = vec![Vec::with_capacity(paths as usize); theta.num_labels];
    let mut hidden = vec![0usize; x.len()];
    loop {
        for (y, scores) in per_label.iter_mut().enumerate() {
            scores.push(potential(Label(y), &hidden, x, theta)?);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == hidden.len() {
                let scores: Vec<f64> = per_label.iter().map(|s| log_sum_exp(s)).collect();
                return Ok(PosteriorDistribution::from_log_scores(&scores));
            }
            hidden[pos] += 1;
            if hidden[pos] < hs {
                break;
            }
            hidden[pos] = 0;
            pos += 1;
        }
    }
}
