//! Finite populations of agents: correlated signal draws, truthful and
//! misspecified reports, votes, and the delimited population dump.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BeliefVector, ExpectedBeliefMatrix, InfoStructure, State};
use crate::rng::{self, domain};

/// How agents' signals are correlated given the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationSpec {
    /// Conditionally independent signals.
    Iid,
    /// Consecutive blocks of `block_size` agents share one signal draw.
    Block { block_size: usize },
}

impl CorrelationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationSpec::Block { block_size: 0 } => Err(Error::InvalidBlockSize(0)),
            _ => Ok(()),
        }
    }

    /// Index of the shared draw used by `agent`.
    pub fn unit(&self, agent: usize) -> usize {
        match *self {
            CorrelationSpec::Iid => agent,
            CorrelationSpec::Block { block_size } => agent / block_size,
        }
    }
}

/// Additive noise on agents' perceived state means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisspecSpec {
    pub half_width: f64,
    /// Reject half widths that would let perceived means of different
    /// states overlap.
    pub guard: bool,
}

impl MisspecSpec {
    pub fn new(half_width: f64) -> Self {
        Self {
            half_width,
            guard: true,
        }
    }

    /// Max-norm bound of the perturbation applied to one column. The last
    /// component absorbs the negated sum of the others, so it can move by
    /// up to `(L - 1) * half_width`.
    pub fn effective_bound(&self, num_states: usize) -> f64 {
        self.half_width * (num_states.saturating_sub(1)) as f64
    }

    pub fn check_guard(&self, means: &ExpectedBeliefMatrix) -> Result<()> {
        if !(self.half_width >= 0.0) {
            return Err(Error::InvalidInput(format!("half width {} is negative", self.half_width)));
        }
        if !self.guard {
            return Ok(());
        }
        let limit = means.min_column_gap() / 2.0 - 1e-9;
        let effective = self.effective_bound(means.dim());
        if effective > limit {
            return Err(Error::MisspecOverlap {
                half_width: self.half_width,
                effective,
                limit,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReport {
    pub first_order: BeliefVector,
    /// Expected population average: of beliefs for the belief-based
    /// procedures, of vote shares for action-based aggregation.
    pub second_order: Option<BeliefVector>,
    pub vote: Option<State>,
}

impl AgentReport {
    pub fn first_order_only(first_order: BeliefVector) -> Self {
        Self {
            first_order,
            second_order: None,
            vote: None,
        }
    }

    pub fn with_second_order(first_order: BeliefVector, second_order: BeliefVector) -> Self {
        Self {
            first_order,
            second_order: Some(second_order),
            vote: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDraw {
    pub true_state: State,
    /// Signal index of each agent.
    pub signals: Vec<usize>,
    pub reports: Vec<AgentReport>,
    pub seed: u64,
}

impl PopulationDraw {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

fn sample_index<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draws a population with truthful first-order reports and votes.
pub fn sample_population(
    structure: &InfoStructure,
    corr: CorrelationSpec,
    n: usize,
    true_state: Option<State>,
    seed: u64,
) -> Result<PopulationDraw> {
    corr.validate()?;
    if n == 0 {
        return Err(Error::InvalidPopulationSize(0));
    }
    let l = structure.num_states();
    let true_state = match true_state {
        Some(s) if s.0 >= l => return Err(Error::UnknownState(s.to_string())),
        Some(s) => s,
        None => {
            let mut rng = rng::stream(seed, domain::TRUE_STATE, 0);
            State(sample_index(&mut rng, structure.prior().iter().copied()))
        }
    };
    let column: Vec<f64> = structure.likelihood().column(true_state.0).iter().copied().collect();
    let posteriors: Vec<Option<BeliefVector>> = (0..structure.num_signals())
        .map(|s| structure.posterior_at(s).ok())
        .collect();

    let mut signals = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    let mut current: Option<(usize, usize)> = None;
    for agent in 0..n {
        let unit = corr.unit(agent);
        let signal = match current {
            Some((u, s)) if u == unit => s,
            _ => {
                let mut rng = rng::stream(seed, domain::SIGNAL, unit as u64);
                let s = sample_index(&mut rng, column.iter().copied());
                current = Some((unit, s));
                s
            }
        };
        let first_order = posteriors[signal]
            .clone()
            .ok_or_else(|| Error::UnreachableSignal(structure.signals()[signal].clone()))?;
        let v = vote(&first_order);
        signals.push(signal);
        reports.push(AgentReport {
            first_order,
            second_order: None,
            vote: Some(v),
        });
    }
    Ok(PopulationDraw {
        true_state,
        signals,
        reports,
        seed,
    })
}

/// Expected population average held by an agent with belief `first_order`
/// who knows the state means.
///
/// Panics if the dimensions disagree.
pub fn truthful_alpha(first_order: &BeliefVector, means: &ExpectedBeliefMatrix) -> BeliefVector {
    assert_eq!(first_order.len(), means.dim(), "belief and mean matrix dimensions differ");
    means.combine(first_order)
}

/// Expected population average of an agent whose perception of each state
/// mean is off by independent zero-mean uniform noise.
pub fn misspecified_alpha(
    first_order: &BeliefVector,
    means: &ExpectedBeliefMatrix,
    spec: &MisspecSpec,
    seed: u64,
) -> Result<BeliefVector> {
    spec.check_guard(means)?;
    let l = means.dim();
    if first_order.len() != l {
        return Err(Error::DimensionMismatch {
            expected: format!("belief of length {l}"),
            found: format!("length {}", first_order.len()),
        });
    }
    if spec.half_width == 0.0 {
        return Ok(truthful_alpha(first_order, means));
    }
    let mut rng = rng::stream(seed, domain::MISSPEC, 0);
    let h = spec.half_width;
    let mut out = vec![0.0; l];
    for w in 0..l {
        let mut perturbed: Vec<f64> = means.matrix().column(w).iter().copied().collect();
        let mut sum = 0.0;
        for x in perturbed.iter_mut().take(l - 1) {
            let z: f64 = rng.random_range(-h..=h);
            *x += z;
            sum += z;
        }
        perturbed[l - 1] -= sum;
        for (o, p) in out.iter_mut().zip(&perturbed) {
            *o += first_order[w] * p;
        }
    }
    if out.iter().any(|x| *x < 0.0) {
        for x in &mut out {
            *x = x.max(0.0);
        }
        return BeliefVector::normalize(out);
    }
    Ok(BeliefVector::from_vec_unchecked(out))
}

/// Most likely state under `first_order`; ties go to the lowest index.
pub fn vote(first_order: &BeliefVector) -> State {
    first_order.argmax()
}

/// Column `w` holds the vote shares by state when the true state is `w`.
pub fn vote_share_matrix(structure: &InfoStructure) -> Result<ExpectedBeliefMatrix> {
    let l = structure.num_states();
    let mut shares = DMatrix::zeros(l, l);
    for (s, p) in structure.posterior_matrix()?.iter().enumerate() {
        let v = vote(p);
        for w in 0..l {
            shares[(v.0, w)] += structure.likelihood()[(s, w)];
        }
    }
    ExpectedBeliefMatrix::new(shares)
}

/// Vote shares an agent who saw `signal` expects to observe.
pub fn expected_vote_shares(structure: &InfoStructure, signal: &str) -> Result<BeliefVector> {
    let s = structure.signal_index(signal)?;
    expected_vote_shares_at(structure, s)
}

pub fn expected_vote_shares_at(structure: &InfoStructure, signal: usize) -> Result<BeliefVector> {
    let shares = vote_share_matrix(structure)?;
    Ok(shares.combine(&structure.posterior_at(signal)?))
}

/// `V[j][k]`: ω_k vote share predicted by an ω_j voter. When several signals
/// vote for the same state their predictions are pooled by signal
/// probability; states nobody votes for get an all-zero row.
pub fn predicted_vote_matrix(structure: &InfoStructure) -> Result<DMatrix<f64>> {
    let l = structure.num_states();
    let mut v = DMatrix::zeros(l, l);
    let mut mass = vec![0.0; l];
    for (s, p) in structure.posterior_matrix()?.iter().enumerate() {
        let voted = vote(p).0;
        let weight = structure.signal_marginal(s);
        let predicted = expected_vote_shares_at(structure, s)?;
        for k in 0..l {
            v[(voted, k)] += weight * predicted[k];
        }
        mass[voted] += weight;
    }
    for j in 0..l {
        if mass[j] > 0.0 {
            for k in 0..l {
                v[(j, k)] /= mass[j];
            }
        }
    }
    Ok(v)
}

/// Fills `second_order` of the given agents with their truthful expectation
/// of the population average belief.
pub fn attach_truthful_alpha(draw: &mut PopulationDraw, means: &ExpectedBeliefMatrix, agents: &[usize]) {
    for &i in agents {
        let r = &mut draw.reports[i];
        r.second_order = Some(truthful_alpha(&r.first_order, means));
    }
}

/// Fills `second_order` of the given agents with their expected vote shares.
pub fn attach_expected_vote_shares(
    draw: &mut PopulationDraw,
    structure: &InfoStructure,
    agents: &[usize],
) -> Result<()> {
    let per_signal: Vec<BeliefVector> = (0..structure.num_signals())
        .map(|s| expected_vote_shares_at(structure, s))
        .collect::<Result<_>>()?;
    for &i in agents {
        draw.reports[i].second_order = Some(per_signal[draw.signals[i]].clone());
    }
    Ok(())
}

/// Fills every agent's `second_order` with a misspecified expectation; agent
/// `i` uses its own noise stream.
pub fn attach_misspecified_alpha(
    draw: &mut PopulationDraw,
    means: &ExpectedBeliefMatrix,
    spec: &MisspecSpec,
    seed: u64,
) -> Result<()> {
    spec.check_guard(means)?;
    for (i, r) in draw.reports.iter_mut().enumerate() {
        let agent_seed = rng::derive_seed(seed, domain::MISSPEC, i as u64);
        r.second_order = Some(misspecified_alpha(&r.first_order, means, spec, agent_seed)?);
    }
    Ok(())
}

/// Writes one row per agent: index, signal, belief components, then any
/// second-order components, vote and payment. The header names the states.
pub fn write_dump<W: Write>(
    draw: &PopulationDraw,
    structure: &InfoStructure,
    payments: Option<&[f64]>,
    out: W,
) -> Result<()> {
    if let Some(p) = payments {
        if p.len() != draw.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} payments", draw.len()),
                found: format!("{}", p.len()),
            });
        }
    }
    let labels = structure.states().labels();
    let has_alpha = draw.reports.iter().any(|r| r.second_order.is_some());
    let has_vote = draw.reports.iter().any(|r| r.vote.is_some());
    let mut w = csv::Writer::from_writer(out);

    let mut header = vec!["agent".to_string(), "signal".to_string()];
    header.extend(labels.iter().map(|l| format!("belief_{l}")));
    if has_alpha {
        header.extend(labels.iter().map(|l| format!("alpha_{l}")));
    }
    if has_vote {
        header.push("vote".into());
    }
    if payments.is_some() {
        header.push("payment".into());
    }
    w.write_record(&header).map_err(csv_err)?;

    for (i, r) in draw.reports.iter().enumerate() {
        let mut row = vec![i.to_string(), structure.signals()[draw.signals[i]].clone()];
        row.extend(r.first_order.as_slice().iter().map(|x| format!("{x:.6}")));
        if has_alpha {
            match &r.second_order {
                Some(a) => row.extend(a.as_slice().iter().map(|x| format!("{x:.6}"))),
                None => row.extend(std::iter::repeat_n(String::new(), labels.len())),
            }
        }
        if has_vote {
            row.push(r.vote.map(|v| labels[v.0].clone()).unwrap_or_default());
        }
        if let Some(p) = payments {
            row.push(format!("{:.6}", p[i]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn bin() -> InfoStructure {
        InfoStructure::binary_symmetric(0.7).unwrap()
    }

    #[test]
    fn single_block_shares_signal() {
        let draw = sample_population(&bin(), CorrelationSpec::Block { block_size: 4 }, 4, Some(State(0)), 11)
            .unwrap();
        assert!(draw.signals.iter().all(|s| *s == draw.signals[0]));
    }

    #[test]
    fn zero_block_size_rejected() {
        let r = sample_population(&bin(), CorrelationSpec::Block { block_size: 0 }, 4, None, 1);
        assert!(matches!(r, Err(Error::InvalidBlockSize(0))));
        assert!(sample_population(&bin(), CorrelationSpec::Iid, 0, None, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_population(&bin(), CorrelationSpec::Iid, 500, None, 99).unwrap();
        let b = sample_population(&bin(), CorrelationSpec::Iid, 500, None, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn agent_draw_independent_of_population_size() {
        let small = sample_population(&bin(), CorrelationSpec::Iid, 50, Some(State(1)), 5).unwrap();
        let large = sample_population(&bin(), CorrelationSpec::Iid, 500, Some(State(1)), 5).unwrap();
        assert_eq!(small.signals[..], large.signals[..50]);
    }

    #[test]
    fn truthful_reports_are_posteriors() {
        let s = bin();
        let draw = sample_population(&s, CorrelationSpec::Block { block_size: 3 }, 30, None, 4).unwrap();
        for (sig, r) in draw.signals.iter().zip(&draw.reports) {
            assert_eq!(r.first_order, s.posterior_at(*sig).unwrap());
        }
    }

    #[test]
    fn truthful_alpha_cases() {
        let means = bin().expected_belief_matrix().unwrap();
        let a = truthful_alpha(&BeliefVector::point_mass(2, State(1)), &means);
        assert_eq!(a, means.column(State(1)));
        let a = truthful_alpha(&BeliefVector::new(vec![0.7, 0.3]).unwrap(), &means);
        assert!((a[0] - 0.532).abs() < 1e-12 && (a[1] - 0.468).abs() < 1e-12);

        let ex = fixtures::example1_structure();
        let a = truthful_alpha(&ex.posterior_at(2).unwrap(), &ex.expected_belief_matrix().unwrap());
        for (x, e) in a.as_slice().iter().zip([0.427, 0.211, 0.362]) {
            assert!((x - e).abs() <= 0.002);
        }
    }

    #[test]
    fn misspecified_alpha_cases() {
        let means = bin().expected_belief_matrix().unwrap();
        let mu = BeliefVector::new(vec![0.7, 0.3]).unwrap();
        let exact = truthful_alpha(&mu, &means);
        assert_eq!(misspecified_alpha(&mu, &means, &MisspecSpec::new(0.0), 3).unwrap(), exact);
        for seed in 0..200 {
            let a = misspecified_alpha(&mu, &means, &MisspecSpec::new(0.01), seed).unwrap();
            assert!(a.max_norm_distance(&exact) <= 0.01 + 1e-15);
        }
        let err = misspecified_alpha(&mu, &means, &MisspecSpec::new(0.08), 3);
        assert!(matches!(err, Err(Error::MisspecOverlap { .. })));
        let unguarded = MisspecSpec {
            half_width: 0.08,
            guard: false,
        };
        assert!(misspecified_alpha(&mu, &means, &unguarded, 3).is_ok());
    }

    #[test]
    fn votes() {
        assert_eq!(vote(&BeliefVector::new(vec![0.5, 0.5]).unwrap()), State(0));
        assert_eq!(vote(&BeliefVector::new(vec![0.2, 0.3, 0.5]).unwrap()), State(2));
        let ex = fixtures::example1_structure();
        assert_eq!(vote(&ex.posterior_at(1).unwrap()), State(1));
    }

    #[test]
    fn expected_vote_share_cases() {
        let perfect = InfoStructure::new(
            crate::model::StateSpace::numbered(2).unwrap(),
            vec!["a".into(), "b".into()],
            vec![0.5, 0.5],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let v = expected_vote_shares(&perfect, "b").unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);

        let v = expected_vote_shares(&bin(), "s1").unwrap();
        assert!((v[0] - 0.58).abs() < 1e-12);

        let ex = fixtures::example1_structure();
        let v = expected_vote_shares(&ex, "s1").unwrap();
        let q = fixtures::EXAMPLE1_POSTERIOR;
        let m = fixtures::EXAMPLE1_LIKELIHOOD;
        let direct: f64 = (0..3).map(|l| q[0][l] * m[1][l]).sum();
        assert!((v[1] - direct).abs() < 1e-12);
    }

    #[test]
    fn dump_has_named_header_and_rows() {
        let s = bin();
        let mut draw = sample_population(&s, CorrelationSpec::Iid, 5, Some(State(0)), 1).unwrap();
        let means = s.expected_belief_matrix().unwrap();
        attach_truthful_alpha(&mut draw, &means, &[0]);
        let mut buf = Vec::new();
        write_dump(&draw, &s, Some(&[1.0, 2.0, 3.0, 4.0, 5.0]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "agent,signal,belief_w1,belief_w2,alpha_w1,alpha_w2,vote,payment"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        assert!(rows[1].contains(",,,"), "non-reporter has empty alpha cells: {}", rows[1]);
        assert!(write_dump(&draw, &s, Some(&[1.0]), Vec::new()).is_err());
    }
}
