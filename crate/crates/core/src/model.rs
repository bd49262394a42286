//! Finite information structures and the Bayesian quantities derived from
//! them: posteriors, state-conditional mean beliefs and second-order
//! expectations.

use std::collections::HashSet;
use std::fmt;
use std::ops::Index;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, EchelonBasis};

/// Tolerance on simplex sums for belief vectors.
pub const BELIEF_SUM_TOL: f64 = 1e-9;
/// Tolerance on simplex sums for priors and likelihood columns.
pub const STRUCTURE_SUM_TOL: f64 = 1e-12;
/// Default cap on the number of compound signals produced by [`InfoStructure::product_lift`].
pub const DEFAULT_LIFT_CAP: u64 = 1_000_000;
/// Posteriors closer than this in max-norm are merged into one support point.
pub const SUPPORT_MERGE_TOL: f64 = 1e-12;

/// Index of a state in a [`StateSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(pub usize);

impl State {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidStructure(format!(
                "need at least 2 states, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidStructure(format!("duplicate state label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `w1..wL`.
    pub fn numbered(len: usize) -> Result<Self> {
        Self::new((1..=len).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: State) -> &str {
        &self.labels[state.0]
    }

    pub fn lookup(&self, label: &str) -> Result<State> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(State)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = State> {
        (0..self.labels.len()).map(State)
    }
}

/// A point on the probability simplex over states.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidBelief("empty vector".into()));
        }
        if let Some(x) = components.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidBelief(format!("component {x} is not a probability")));
        }
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(Error::InvalidBelief(format!("components sum to {sum}")));
        }
        Ok(Self(components))
    }

    /// Normalises a nonnegative vector with positive total mass.
    pub fn normalize(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidBelief("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidBelief("zero total mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self(weights))
    }

    pub fn point_mass(len: usize, state: State) -> Self {
        let mut v = vec![0.0; len];
        v[state.0] = 1.0;
        Self(v)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub(crate) fn from_vec_unchecked(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_norm_distance(&self, other: &BeliefVector) -> f64 {
        max_norm(&self.0, &other.0)
    }

    /// Most likely state, ties going to the lowest index.
    pub fn argmax(&self) -> State {
        let mut best = 0;
        for (i, x) in self.0.iter().enumerate().skip(1) {
            if *x > self.0[best] {
                best = i;
            }
        }
        State(best)
    }
}

impl Index<usize> for BeliefVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Index<State> for BeliefVector {
    type Output = f64;

    fn index(&self, s: State) -> &f64 {
        &self.0[s.0]
    }
}

pub(crate) fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `entries[(i, j)]` is the expected population-average belief in state `i`
/// when the true state is `j`; column `j` is the state-`j` mean belief.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedBeliefMatrix {
    entries: DMatrix<f64>,
}

impl ExpectedBeliefMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 2 {
            return Err(Error::DimensionMismatch {
                expected: "square matrix with at least 2 states".into(),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        for j in 0..entries.ncols() {
            let sum: f64 = entries.column(j).iter().sum();
            if (sum - 1.0).abs() > BELIEF_SUM_TOL {
                return Err(Error::InvalidBelief(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self { entries })
    }

    /// Builds the matrix from one mean belief per true state.
    pub fn from_columns(columns: &[BeliefVector]) -> Result<Self> {
        let l = columns.len();
        if columns.iter().any(|c| c.len() != l) {
            return Err(Error::DimensionMismatch {
                expected: format!("{l} components per column"),
                found: "ragged columns".into(),
            });
        }
        Self::new(DMatrix::from_fn(l, l, |i, j| columns[j][i]))
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, believed: State, true_state: State) -> f64 {
        self.entries[(believed.0, true_state.0)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, true_state: State) -> BeliefVector {
        BeliefVector(self.entries.column(true_state.0).iter().copied().collect())
    }

    pub fn columns(&self) -> Vec<BeliefVector> {
        (0..self.dim()).map(|j| self.column(State(j))).collect()
    }

    /// Mixture of the columns with the given weights; this is what an agent
    /// holding belief `weights` expects the population average to be.
    pub fn combine(&self, weights: &BeliefVector) -> BeliefVector {
        let l = self.dim();
        let mut out = vec![0.0; l];
        for (j, w) in weights.as_slice().iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * self.entries[(i, j)];
            }
        }
        BeliefVector(out)
    }

    /// Smallest max-norm distance between two distinct columns.
    pub fn min_column_gap(&self) -> f64 {
        let cols = self.columns();
        let mut gap = f64::INFINITY;
        for a in 0..cols.len() {
            for b in (a + 1)..cols.len() {
                gap = gap.min(cols[a].max_norm_distance(&cols[b]));
            }
        }
        gap
    }

    pub fn max_abs_difference(&self, other: &ExpectedBeliefMatrix) -> f64 {
        max_norm(self.entries.as_slice(), other.entries.as_slice())
    }
}

/// State-conditional distribution of an agent's posterior belief.
#[derive(Debug, Clone)]
pub struct BeliefDistribution {
    pub support: Vec<BeliefVector>,
    pub weights: Vec<f64>,
    pub state: State,
}

impl BeliefDistribution {
    /// Total-variation distance, half the L1 distance on the merged support.
    pub fn tv_distance(&self, other: &BeliefDistribution) -> f64 {
        let mut points: Vec<(&BeliefVector, f64, f64)> = Vec::new();
        for (p, w) in self.support.iter().zip(&self.weights) {
            merge_point(&mut points, p, *w, 0.0);
        }
        for (p, w) in other.support.iter().zip(&other.weights) {
            merge_point(&mut points, p, 0.0, *w);
        }
        let l1: f64 = points.iter().map(|(_, a, b)| (a - b).abs()).sum();
        (0.5 * l1).clamp(0.0, 1.0)
    }

    /// Probability that the belief in `component` is at most `threshold`.
    pub fn component_cdf(&self, component: State, threshold: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| p[component] <= threshold)
            .map(|(_, w)| w)
            .sum()
    }
}

fn merge_point<'a>(points: &mut Vec<(&'a BeliefVector, f64, f64)>, p: &'a BeliefVector, a: f64, b: f64) {
    if let Some(slot) = points
        .iter_mut()
        .find(|(q, _, _)| q.max_norm_distance(p) <= SUPPORT_MERGE_TOL)
    {
        slot.1 += a;
        slot.2 += b;
    } else {
        points.push((p, a, b));
    }
}

/// Outcome of [`InfoStructure::check_assumptions`].
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// `informative[a][b]`: signal distributions in states `a` and `b` are
    /// mutually absolutely continuous.
    pub informative: Vec<Vec<bool>>,
    /// Total-variation distance between state-conditional belief distributions.
    pub tv_distance: Vec<Vec<f64>>,
    pub delta: f64,
    /// Minimum max-norm distance between columns of the expected belief matrix.
    pub distinct_means: f64,
    pub posterior_rank: usize,
    pub rank_tol: f64,
    pub num_states: usize,
    pub num_signals: usize,
}

impl AssumptionReport {
    pub fn all_informative(&self) -> bool {
        self.informative.iter().flatten().all(|b| *b)
    }

    pub fn min_tv_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for a in 0..self.num_states {
            for b in (a + 1)..self.num_states {
                min = min.min(self.tv_distance[a][b]);
            }
        }
        min
    }

    pub fn tv_bounded_below(&self) -> bool {
        self.min_tv_distance() >= self.delta
    }

    pub fn means_distinct(&self) -> bool {
        self.distinct_means > self.rank_tol
    }

    pub fn full_rank(&self) -> bool {
        self.posterior_rank == self.num_states
    }

    /// Conditions under which the belief-based procedures are guaranteed to
    /// work: informative signals, the TV bound, distinct state means and a
    /// full-rank posterior set.
    pub fn satisfied(&self) -> bool {
        self.all_informative() && self.tv_bounded_below() && self.means_distinct() && self.full_rank()
    }
}

/// Finite signal structure shared by all agents: prior over states and a
/// state-conditional likelihood `likelihood[(signal, state)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoStructure {
    states: StateSpace,
    signals: Vec<String>,
    prior: Vec<f64>,
    likelihood: DMatrix<f64>,
    posterior_override: Option<DMatrix<f64>>,
}

impl InfoStructure {
    pub fn new(
        states: StateSpace,
        signals: Vec<String>,
        prior: Vec<f64>,
        likelihood: DMatrix<f64>,
    ) -> Result<Self> {
        let l = states.len();
        let k = signals.len();
        if k == 0 {
            return Err(Error::InvalidStructure("no signals".into()));
        }
        let mut seen = HashSet::new();
        for s in &signals {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidStructure(format!("duplicate signal `{s}`")));
            }
        }
        if prior.len() != l {
            return Err(Error::DimensionMismatch {
                expected: format!("prior of length {l}"),
                found: format!("length {}", prior.len()),
            });
        }
        if likelihood.nrows() != k || likelihood.ncols() != l {
            return Err(Error::DimensionMismatch {
                expected: format!("{k}x{l} likelihood"),
                found: format!("{}x{}", likelihood.nrows(), likelihood.ncols()),
            });
        }
        check_probabilities("prior", prior.iter().copied())?;
        check_probabilities("likelihood", likelihood.iter().copied())?;
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > STRUCTURE_SUM_TOL {
            return Err(Error::InvalidStructure(format!("prior sums to {total}")));
        }
        for j in 0..l {
            let sum: f64 = likelihood.column(j).iter().sum();
            if (sum - 1.0).abs() > STRUCTURE_SUM_TOL {
                return Err(Error::InvalidStructure(format!(
                    "likelihood column for state `{}` sums to {sum}",
                    states.labels()[j]
                )));
            }
        }
        Ok(Self {
            states,
            signals,
            prior,
            likelihood,
            posterior_override: None,
        })
    }

    /// Two states, two signals, uniform prior; the signal matches the state
    /// with probability `accuracy`.
    pub fn binary_symmetric(accuracy: f64) -> Result<Self> {
        Self::new(
            StateSpace::new(["w1", "w2"])?,
            vec!["s1".into(), "s2".into()],
            vec![0.5, 0.5],
            DMatrix::from_row_slice(2, 2, &[accuracy, 1.0 - accuracy, 1.0 - accuracy, accuracy]),
        )
    }

    /// Replay mode: use `posterior` (K x L, rows on the simplex) instead of
    /// Bayes' rule wherever the posterior table is consumed.
    pub fn with_posterior_override(mut self, posterior: DMatrix<f64>) -> Result<Self> {
        if posterior.nrows() != self.num_signals() || posterior.ncols() != self.num_states() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} posterior table", self.num_signals(), self.num_states()),
                found: format!("{}x{}", posterior.nrows(), posterior.ncols()),
            });
        }
        for r in 0..posterior.nrows() {
            BeliefVector::new(posterior.row(r).iter().copied().collect())?;
        }
        self.posterior_override = Some(posterior);
        Ok(self)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn likelihood(&self) -> &DMatrix<f64> {
        &self.likelihood
    }

    pub fn posterior_override(&self) -> Option<&DMatrix<f64>> {
        self.posterior_override.as_ref()
    }

    pub fn signal_index(&self, signal: &str) -> Result<usize> {
        self.signals
            .iter()
            .position(|s| s == signal)
            .ok_or_else(|| Error::UnknownSignal(signal.to_string()))
    }

    /// Prior-predictive probability of a signal.
    pub fn signal_marginal(&self, signal: usize) -> f64 {
        (0..self.num_states())
            .map(|j| self.likelihood[(signal, j)] * self.prior[j])
            .sum()
    }

    pub fn bayes_posterior(&self, signal: &str) -> Result<BeliefVector> {
        self.bayes_posterior_at(self.signal_index(signal)?)
    }

    pub fn bayes_posterior_at(&self, signal: usize) -> Result<BeliefVector> {
        let joint: Vec<f64> = (0..self.num_states())
            .map(|j| self.likelihood[(signal, j)] * self.prior[j])
            .collect();
        let marginal: f64 = joint.iter().sum();
        if marginal <= 0.0 {
            return Err(Error::UnreachableSignal(self.signals[signal].clone()));
        }
        Ok(BeliefVector(joint.into_iter().map(|x| x / marginal).collect()))
    }

    /// Posterior held by an agent who sees `signal`: the override row in
    /// replay mode, Bayes' rule otherwise.
    pub fn posterior_at(&self, signal: usize) -> Result<BeliefVector> {
        match &self.posterior_override {
            Some(q) => Ok(BeliefVector(q.row(signal).iter().copied().collect())),
            None => self.bayes_posterior_at(signal),
        }
    }

    pub fn posterior_matrix(&self) -> Result<Vec<BeliefVector>> {
        (0..self.num_signals()).map(|s| self.posterior_at(s)).collect()
    }

    fn posterior_table(&self) -> Result<DMatrix<f64>> {
        let rows = self.posterior_matrix()?;
        Ok(DMatrix::from_fn(self.num_signals(), self.num_states(), |s, j| rows[s][j]))
    }

    pub fn expected_belief_matrix(&self) -> Result<ExpectedBeliefMatrix> {
        let q = self.posterior_table()?;
        // entry[i][j] = sum_s M[s][j] * Q[s][i]
        Ok(ExpectedBeliefMatrix::from_matrix_unchecked(q.transpose() * &self.likelihood))
    }

    pub fn expected_alpha(&self, signal: &str) -> Result<BeliefVector> {
        let s = self.signal_index(signal)?;
        let means = self.expected_belief_matrix()?;
        Ok(means.combine(&self.posterior_at(s)?))
    }

    pub fn belief_distribution(&self, state: State) -> Result<BeliefDistribution> {
        let posteriors = self.posterior_matrix()?;
        let mut support: Vec<BeliefVector> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (s, p) in posteriors.into_iter().enumerate() {
            let w = self.likelihood[(s, state.0)];
            if w == 0.0 {
                continue;
            }
            match support.iter().position(|q| q.max_norm_distance(&p) <= SUPPORT_MERGE_TOL) {
                Some(i) => weights[i] += w,
                None => {
                    support.push(p);
                    weights.push(w);
                }
            }
        }
        Ok(BeliefDistribution {
            support,
            weights,
            state,
        })
    }

    pub fn check_assumptions(&self, delta: f64, rank_tol: f64) -> Result<AssumptionReport> {
        let l = self.num_states();
        let k = self.num_signals();
        let mut informative = vec![vec![true; l]; l];
        for a in 0..l {
            for b in 0..l {
                informative[a][b] = (0..k)
                    .all(|s| (self.likelihood[(s, a)] > 0.0) == (self.likelihood[(s, b)] > 0.0));
            }
        }
        let dists: Vec<BeliefDistribution> =
            self.states.iter().map(|w| self.belief_distribution(w)).collect::<Result<_>>()?;
        let mut tv_distance = vec![vec![0.0; l]; l];
        for a in 0..l {
            for b in 0..l {
                if a != b {
                    tv_distance[a][b] = dists[a].tv_distance(&dists[b]);
                }
            }
        }
        let distinct_means = self.expected_belief_matrix()?.min_column_gap();
        let mut basis = EchelonBasis::new(l, rank_tol);
        for p in self.posterior_matrix()? {
            basis.insert(p.as_slice());
        }
        Ok(AssumptionReport {
            informative,
            tv_distance,
            delta,
            distinct_means,
            posterior_rank: basis.rank(),
            rank_tol,
            num_states: l,
            num_signals: k,
        })
    }

    /// Structure on compound signals made of `k` conditionally independent
    /// draws. Any posterior override is dropped; the lifted structure uses
    /// Bayes' rule.
    pub fn product_lift(&self, k: usize, cap: u64) -> Result<InfoStructure> {
        if k == 0 {
            return Err(Error::InvalidInput("draw count must be at least 1".into()));
        }
        let base = self.num_signals() as u128;
        let size = (0..k).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::CompoundSpaceTooLarge { size, cap });
        }
        if k == 1 {
            let mut out = self.clone();
            out.posterior_override = None;
            return Ok(out);
        }
        let size = size as usize;
        let l = self.num_states();
        let mut signals = Vec::with_capacity(size);
        let mut likelihood = DMatrix::zeros(size, l);
        let mut digits = vec![0usize; k];
        for row in 0..size {
            let mut rem = row;
            for d in digits.iter_mut().rev() {
                *d = rem % self.num_signals();
                rem /= self.num_signals();
            }
            signals.push(
                digits
                    .iter()
                    .map(|d| self.signals[*d].as_str())
                    .collect::<Vec<_>>()
                    .join("|"),
            );
            for j in 0..l {
                likelihood[(row, j)] = digits.iter().map(|d| self.likelihood[(*d, j)]).product();
            }
        }
        // renormalise columns to absorb rounding in the products
        for j in 0..l {
            let sum: f64 = likelihood.column(j).iter().sum();
            for row in 0..size {
                likelihood[(row, j)] /= sum;
            }
        }
        InfoStructure::new(self.states.clone(), signals, self.prior.clone(), likelihood)
    }

    pub fn posterior_rank(&self, rank_tol: f64) -> Result<usize> {
        Ok(linalg::rank(&self.posterior_table()?, rank_tol))
    }
}

fn check_probabilities(what: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    for x in values {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidStructure(format!("{what} entry {x} outside [0, 1]")));
        }
    }
    Ok(())
}
