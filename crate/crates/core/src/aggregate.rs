//! Aggregation procedures.
//!
//! The population-mean-based procedures share one step: stack the
//! reporters' first-order beliefs into a square matrix `B`, their
//! second-order reports into `A`, solve `B Y = A` (row `j` of `Y` is the
//! mean report in state `j`) and return the state whose mean is nearest to
//! the realised population average in max-norm.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, EchelonBasis};
use crate::model::{BeliefVector, ExpectedBeliefMatrix, State, StateSpace};
use crate::population::AgentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Procedure {
    PmbaBinary,
    PmbaMulti,
    ActionPmba,
    LimitedInfoPmba,
    SurprisinglyPopular,
}

impl Procedure {
    pub const ALL: [Procedure; 5] = [
        Procedure::PmbaBinary,
        Procedure::PmbaMulti,
        Procedure::ActionPmba,
        Procedure::LimitedInfoPmba,
        Procedure::SurprisinglyPopular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::PmbaBinary => "pmba_binary",
            Procedure::PmbaMulti => "pmba_multi",
            Procedure::ActionPmba => "action_pmba",
            Procedure::LimitedInfoPmba => "limited_info_pmba",
            Procedure::SurprisinglyPopular => "surprisingly_popular",
        }
    }

    pub fn from_name(name: &str) -> Option<Procedure> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Minimum margin between the best and runner-up column distances.
    pub ambiguity_tol: f64,
    /// Minimum difference between the two reporters' beliefs (binary).
    pub separation_tol: f64,
    /// Pivot threshold for reporter rank decisions.
    pub rank_tol: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            ambiguity_tol: 1e-6,
            separation_tol: 1e-9,
            rank_tol: linalg::DEFAULT_RANK_TOL,
        }
    }
}

impl MatchOptions {
    /// Options for a finite population of `n` agents: the ambiguity margin
    /// scales like the sampling error of the population mean.
    pub fn monte_carlo(num_states: usize, n: usize) -> Self {
        Self {
            ambiguity_tol: 3.0 * (num_states as f64 / n as f64).sqrt(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregationOutcome {
    pub procedure: Procedure,
    pub recovered_state: State,
    pub recovered_means: ExpectedBeliefMatrix,
    /// Realised population average (vote shares for action-based PMBA).
    pub population_mean: BeliefVector,
    /// Distance from the population average to each recovered column.
    pub distances: Vec<f64>,
    pub match_distance: f64,
    pub runner_up_distance: f64,
    pub condition_number: f64,
    /// Agents whose second-order reports entered the solve.
    pub reporters: Vec<usize>,
}

impl AggregationOutcome {
    pub fn ill_conditioned(&self) -> bool {
        self.condition_number > linalg::CONDITION_WARNING
    }

    /// Flat `key = value` document.
    pub fn to_kv(&self, states: &StateSpace, seed: Option<u64>) -> String {
        let mut out = String::new();
        out.push_str(&format!("procedure = {}\n", self.procedure));
        out.push_str(&format!("recovered_state = {}\n", states.label(self.recovered_state)));
        for (label, d) in states.labels().iter().zip(&self.distances) {
            out.push_str(&format!("distance_{label} = {}\n", fmt_sig(*d)));
        }
        out.push_str(&format!("match_distance = {}\n", fmt_sig(self.match_distance)));
        out.push_str(&format!("runner_up_distance = {}\n", fmt_sig(self.runner_up_distance)));
        out.push_str(&format!("condition_number = {}\n", fmt_sig(self.condition_number)));
        if let Some(seed) = seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out
    }
}

/// Formats with 6 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Mean of the agents' first-order beliefs.
pub fn population_mean(reports: &[AgentReport]) -> Result<BeliefVector> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("empty population".into()))?;
    let l = first.first_order.len();
    let mut sum = vec![0.0; l];
    for r in reports {
        if r.first_order.len() != l {
            return Err(Error::DimensionMismatch {
                expected: format!("beliefs of length {l}"),
                found: format!("length {}", r.first_order.len()),
            });
        }
        for (s, x) in sum.iter_mut().zip(r.first_order.as_slice()) {
            *s += x;
        }
    }
    BeliefVector::normalize(sum)
}

/// Indices of columns sorted by distance to `target`, with the distances.
pub fn nearest_column(target: &[f64], means: &DMatrix<f64>) -> (Vec<f64>, State, f64, f64) {
    let distances: Vec<f64> = (0..means.ncols())
        .map(|j| {
            means
                .column(j)
                .iter()
                .zip(target)
                .map(|(m, t)| (m - t).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|a, b| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b)));
    let best = order[0];
    let runner_up = order.get(1).map(|j| distances[*j]).unwrap_or(f64::INFINITY);
    (distances.clone(), State(best), distances[best], runner_up)
}

/// Inverts the reporters' system and matches the population average.
///
/// `reporters` holds `(first_order, second_order)` pairs, one per state.
pub fn pmba_from_limits(
    procedure: Procedure,
    population_mean: &BeliefVector,
    reporters: &[(BeliefVector, BeliefVector)],
    opts: &MatchOptions,
) -> Result<AggregationOutcome> {
    let l = population_mean.len();
    if reporters.len() != l {
        return Err(Error::DimensionMismatch {
            expected: format!("{l} reporters"),
            found: format!("{}", reporters.len()),
        });
    }
    for (mu, alpha) in reporters {
        if mu.len() != l || alpha.len() != l {
            return Err(Error::DimensionMismatch {
                expected: format!("reports of length {l}"),
                found: format!("{} and {}", mu.len(), alpha.len()),
            });
        }
    }
    let mut basis = EchelonBasis::new(l, opts.rank_tol);
    for (mu, _) in reporters {
        basis.insert(mu.as_slice());
    }
    if basis.rank() < l {
        return Err(Error::RankDeficientPopulation {
            found: basis.rank(),
            needed: l,
        });
    }
    let beliefs = DMatrix::from_fn(l, l, |r, c| reporters[r].0[c]);
    let alphas = DMatrix::from_fn(l, l, |r, c| reporters[r].1[c]);
    let solution = linalg::solve(&beliefs, &alphas)?;
    let means = solution.x.transpose();
    let (distances, state, best, runner_up) = nearest_column(population_mean.as_slice(), &means);
    if runner_up - best < opts.ambiguity_tol {
        return Err(Error::AmbiguousMatch { best, runner_up });
    }
    Ok(AggregationOutcome {
        procedure,
        recovered_state: state,
        recovered_means: ExpectedBeliefMatrix::from_matrix_unchecked(means),
        population_mean: population_mean.clone(),
        distances,
        match_distance: best,
        runner_up_distance: runner_up,
        condition_number: solution.condition_number,
        reporters: Vec::new(),
    })
}

fn second_order(reports: &[AgentReport], agent: usize) -> Result<&BeliefVector> {
    reports
        .get(agent)
        .ok_or_else(|| Error::InvalidInput(format!("agent {agent} out of range")))?
        .second_order
        .as_ref()
        .ok_or(Error::MissingSecondOrder(agent))
}

fn require_binary(l: usize) -> Result<()> {
    if l != 2 {
        return Err(Error::InvalidInput(format!("procedure needs 2 states, got {l}")));
    }
    Ok(())
}

fn check_separation(a: &BeliefVector, b: &BeliefVector, opts: &MatchOptions) -> bool {
    (a[0] - b[0]).abs() > opts.separation_tol
}

/// First agent plus the first later agent whose belief differs from it.
pub fn select_binary_reporters(reports: &[AgentReport], opts: &MatchOptions) -> Result<(usize, usize)> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("empty population".into()))?;
    reports
        .iter()
        .position(|r| check_separation(&first.first_order, &r.first_order, opts))
        .map(|b| (0, b))
        .ok_or(Error::RankDeficientPopulation { found: 1, needed: 2 })
}

/// Greedy scan in agent order keeping each agent whose belief increases the
/// rank of the selected set, until `num_states` are found.
pub fn select_reporters(reports: &[AgentReport], num_states: usize, rank_tol: f64) -> Result<Vec<usize>> {
    let mut basis = EchelonBasis::new(num_states, rank_tol);
    let mut chosen = Vec::with_capacity(num_states);
    for (i, r) in reports.iter().enumerate() {
        if basis.insert(r.first_order.as_slice()) {
            chosen.push(i);
            if chosen.len() == num_states {
                return Ok(chosen);
            }
        }
    }
    Err(Error::RankDeficientPopulation {
        found: chosen.len(),
        needed: num_states,
    })
}

/// Two-state population-mean-based aggregation with designated reporters
/// `reporters.0` and `reporters.1`.
pub fn pmba_binary(
    reports: &[AgentReport],
    reporters: (usize, usize),
    opts: &MatchOptions,
) -> Result<AggregationOutcome> {
    let mean = population_mean(reports)?;
    require_binary(mean.len())?;
    let (a, b) = reporters;
    let alpha_a = second_order(reports, a)?;
    let alpha_b = second_order(reports, b)?;
    let (mu_a, mu_b) = (&reports[a].first_order, &reports[b].first_order);
    if !check_separation(mu_a, mu_b, opts) {
        return Err(Error::DegenerateReporterPair(a, b));
    }
    let pairs = [(mu_a.clone(), alpha_a.clone()), (mu_b.clone(), alpha_b.clone())];
    let mut out = pmba_from_limits(Procedure::PmbaBinary, &mean, &pairs, opts)?;
    out.reporters = vec![a, b];
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReporterSelection {
    /// Greedy rank-building scan in agent order.
    Auto,
    Explicit(Vec<usize>),
}

/// L-state population-mean-based aggregation.
pub fn pmba_multi(
    reports: &[AgentReport],
    selection: ReporterSelection,
    opts: &MatchOptions,
) -> Result<AggregationOutcome> {
    let mean = population_mean(reports)?;
    let l = mean.len();
    let chosen = match selection {
        ReporterSelection::Auto => select_reporters(reports, l, opts.rank_tol)?,
        ReporterSelection::Explicit(ix) => ix,
    };
    let pairs = chosen
        .iter()
        .map(|&i| Ok((reports[i].first_order.clone(), second_order(reports, i)?.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = pmba_from_limits(Procedure::PmbaMulti, &mean, &pairs, opts)?;
    out.reporters = chosen;
    Ok(out)
}

/// Realised share of votes for each state.
pub fn vote_shares(reports: &[AgentReport], num_states: usize) -> Result<BeliefVector> {
    let mut counts = vec![0.0; num_states];
    for (i, r) in reports.iter().enumerate() {
        let v = r
            .vote
            .ok_or_else(|| Error::InvalidInput(format!("agent {i} has no vote")))?;
        if v.0 >= num_states {
            return Err(Error::UnknownState(v.to_string()));
        }
        counts[v.0] += 1.0;
    }
    BeliefVector::normalize(counts)
}

/// Action-based aggregation for two states: everyone votes, two reporters
/// with opposite votes also give their belief and expected vote shares.
/// With `reporters = None` the first pair with opposite votes is used.
pub fn action_pmba(
    reports: &[AgentReport],
    reporters: Option<(usize, usize)>,
    opts: &MatchOptions,
) -> Result<AggregationOutcome> {
    let l = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("empty population".into()))?
        .first_order
        .len();
    require_binary(l)?;
    let shares = vote_shares(reports, l)?;
    let (a, b) = match reporters {
        Some((a, b)) => {
            if reports[a].vote == reports[b].vote {
                return Err(Error::HerdingDetected);
            }
            (a, b)
        }
        None => select_opposite_voters(reports)?,
    };
    let pairs = [
        (reports[a].first_order.clone(), second_order(reports, a)?.clone()),
        (reports[b].first_order.clone(), second_order(reports, b)?.clone()),
    ];
    let mut out = pmba_from_limits(Procedure::ActionPmba, &shares, &pairs, opts)?;
    out.reporters = vec![a, b];
    Ok(out)
}

/// First agent plus the first later agent with a different vote.
pub fn select_opposite_voters(reports: &[AgentReport]) -> Result<(usize, usize)> {
    let first = reports.first().and_then(|r| r.vote).ok_or(Error::HerdingDetected)?;
    reports
        .iter()
        .position(|r| r.vote.is_some_and(|v| v != first))
        .map(|b| (0, b))
        .ok_or(Error::HerdingDetected)
}

/// Two-state aggregation when every agent reports a (possibly misspecified)
/// second-order expectation: agents are split at the population mean and
/// each group's averages stand in for a single reporter.
pub fn limited_info_pmba(reports: &[AgentReport], opts: &MatchOptions) -> Result<AggregationOutcome> {
    let mean = population_mean(reports)?;
    require_binary(mean.len())?;
    let mut sums = [[0.0; 4]; 2];
    let mut counts = [0usize; 2];
    for (i, r) in reports.iter().enumerate() {
        let alpha = second_order(reports, i)?;
        let g = usize::from(r.first_order[0] > mean[0]);
        sums[g][0] += r.first_order[0];
        sums[g][1] += r.first_order[1];
        sums[g][2] += alpha[0];
        sums[g][3] += alpha[1];
        counts[g] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::DegenerateGrouping(format!(
            "group sizes {} and {}",
            counts[0], counts[1]
        )));
    }
    let group = |g: usize| -> Result<(BeliefVector, BeliefVector)> {
        let c = counts[g] as f64;
        Ok((
            BeliefVector::normalize(vec![sums[g][0] / c, sums[g][1] / c])?,
            BeliefVector::normalize(vec![sums[g][2] / c, sums[g][3] / c])?,
        ))
    };
    let pairs = [group(0)?, group(1)?];
    if !check_separation(&pairs[0].0, &pairs[1].0, opts) {
        return Err(Error::Singular("group mean beliefs coincide".into()));
    }
    let mut out = pmba_from_limits(Procedure::LimitedInfoPmba, &mean, &pairs, opts)?;
    out.reporters = (0..reports.len()).collect();
    Ok(out)
}

/// Two-state surprisingly-popular rule: the state whose realised average
/// belief exceeds the reporter's expectation of it.
pub fn surprisingly_popular(population_mean: &BeliefVector, alpha: &BeliefVector, tol: f64) -> Result<State> {
    require_binary(population_mean.len())?;
    if alpha.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "2 components".into(),
            found: format!("{}", alpha.len()),
        });
    }
    let margin = population_mean[0] - alpha[0];
    if margin.abs() <= tol {
        return Err(Error::NoSurprise);
    }
    Ok(if margin > 0.0 { State(0) } else { State(1) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpVerdict {
    pub sp_states: Vec<State>,
    pub most_surprising: Option<State>,
    /// Realised minus expected, per state.
    pub margins: Vec<f64>,
}

/// All states whose realised average exceeds the expectation by more than
/// `tol`, and the one exceeding it by the most.
pub fn sp_sets(realized: &BeliefVector, alpha: &BeliefVector, tol: f64) -> Result<SpVerdict> {
    if realized.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} components", realized.len()),
            found: format!("{}", alpha.len()),
        });
    }
    let margins: Vec<f64> = realized
        .as_slice()
        .iter()
        .zip(alpha.as_slice())
        .map(|(r, a)| r - a)
        .collect();
    let sp_states: Vec<State> = (0..margins.len())
        .filter(|i| margins[*i] > tol)
        .map(State)
        .collect();
    let most_surprising = sp_states
        .iter()
        .copied()
        .fold(None, |best: Option<State>, s| match best {
            Some(b) if margins[b.0] >= margins[s.0] => Some(b),
            _ => Some(s),
        });
    Ok(SpVerdict {
        sp_states,
        most_surprising,
        margins,
    })
}

pub fn most_surprisingly_popular(realized: &BeliefVector, alpha: &BeliefVector, tol: f64) -> Result<Option<State>> {
    Ok(sp_sets(realized, alpha, tol)?.most_surprising)
}

/// `score[j] = vote_shares[j] / sum_k V[j][k] / V[k][j]` where `V[j][k]` is
/// the ω_k vote share predicted by an ω_j voter.
pub fn prediction_normalized_votes(vote_shares: &[f64], predicted: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = vote_shares.len();
    if predicted.nrows() != l || predicted.ncols() != l {
        return Err(Error::DimensionMismatch {
            expected: format!("{l}x{l} prediction matrix"),
            found: format!("{}x{}", predicted.nrows(), predicted.ncols()),
        });
    }
    for j in 0..l {
        for k in 0..l {
            if !(predicted[(j, k)] > 0.0) {
                return Err(Error::UndefinedNormalization(j, k));
            }
        }
    }
    Ok((0..l)
        .map(|j| {
            let norm: f64 = (0..l).map(|k| predicted[(j, k)] / predicted[(k, j)]).sum();
            vote_shares[j] / norm
        })
        .collect())
}
