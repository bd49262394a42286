//! Proper scoring rules and the payment scheme for reporters.
//!
//! Every agent is paid a scoring rule on their first-order belief against the
//! recovered state. Designated reporters are also scored on their
//! second-order report against the realised population mean, which a large
//! population makes effectively observable.

use crate::aggregate::AggregationOutcome;
use crate::error::{Error, Result};
use crate::model::{max_norm, BeliefVector, InfoStructure, State};
use crate::population::PopulationDraw;

pub const DEFAULT_LOG_FLOOR: f64 = 1e-6;

/// Grid points closer than this to the truthful report are the truthful
/// report up to rounding and are not counted as deviations.
pub const DEVIATION_MIN_DISTANCE: f64 = 1e-9;

/// A rule scoring a reported distribution against a realised state or a
/// realised distribution.
pub trait Scorer {
    fn against_state(&self, report: &[f64], state: usize) -> f64;
    fn against_vector(&self, report: &[f64], realized: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringRule {
    Brier,
    Logarithmic { log_floor: f64 },
}

impl ScoringRule {
    pub fn logarithmic() -> Self {
        ScoringRule::Logarithmic {
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    pub fn logarithmic_with_floor(log_floor: f64) -> Result<Self> {
        if !(log_floor > 0.0 && log_floor <= 0.01) {
            return Err(Error::InvalidInput(format!("log floor {log_floor} outside (0, 0.01]")));
        }
        Ok(ScoringRule::Logarithmic { log_floor })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoringRule::Brier => "brier",
            ScoringRule::Logarithmic { .. } => "logarithmic",
        }
    }
}

impl Scorer for ScoringRule {
    fn against_state(&self, report: &[f64], state: usize) -> f64 {
        match *self {
            ScoringRule::Brier => -report
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let d = r - f64::from(u8::from(i == state));
                    d * d
                })
                .sum::<f64>(),
            ScoringRule::Logarithmic { log_floor } => report[state].max(log_floor).ln(),
        }
    }

    /// The log rule against a distribution is its expectation over states.
    fn against_vector(&self, report: &[f64], realized: &[f64]) -> f64 {
        match *self {
            ScoringRule::Brier => -report
                .iter()
                .zip(realized)
                .map(|(r, m)| (r - m) * (r - m))
                .sum::<f64>(),
            ScoringRule::Logarithmic { log_floor } => report
                .iter()
                .zip(realized)
                .filter(|(_, m)| **m > 0.0)
                .map(|(r, m)| m * r.max(log_floor).ln())
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Outcome<'a> {
    State(State),
    Realized(&'a BeliefVector),
}

pub fn score(rule: &impl Scorer, report: &BeliefVector, outcome: Outcome<'_>) -> f64 {
    match outcome {
        Outcome::State(s) => rule.against_state(report.as_slice(), s.index()),
        Outcome::Realized(m) => rule.against_vector(report.as_slice(), m.as_slice()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaymentSchedule {
    pub rule: ScoringRule,
    pub first_order_scale: f64,
    /// Zero switches second-order payments off.
    pub second_order_scale: f64,
}

impl PaymentSchedule {
    pub fn new(rule: ScoringRule, first_order_scale: f64, second_order_scale: f64) -> Result<Self> {
        if !(first_order_scale > 0.0 && first_order_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "first-order scale {first_order_scale} must be positive"
            )));
        }
        if !(second_order_scale >= 0.0 && second_order_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "second-order scale {second_order_scale} must be nonnegative"
            )));
        }
        Ok(Self {
            rule,
            first_order_scale,
            second_order_scale,
        })
    }
}

/// Per-agent payments for a draw that produced `outcome`.
pub fn settle(draw: &PopulationDraw, outcome: &AggregationOutcome, schedule: &PaymentSchedule) -> Result<Vec<f64>> {
    let mut pay: Vec<f64> = draw
        .reports
        .iter()
        .map(|r| {
            schedule.first_order_scale * score(&schedule.rule, &r.first_order, Outcome::State(outcome.recovered_state))
        })
        .collect();
    for &i in &outcome.reporters {
        let report = draw
            .reports
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("reporter {i} not in draw")))?;
        let alpha = report.second_order.as_ref().ok_or(Error::MissingSecondOrder(i))?;
        if schedule.second_order_scale > 0.0 {
            pay[i] += schedule.second_order_scale
                * score(&schedule.rule, alpha, Outcome::Realized(&outcome.population_mean));
        }
    }
    Ok(pay)
}

/// All points of the simplex in `num_states` dimensions whose coordinates are
/// multiples of `1 / divisions`.
pub fn simplex_grid(num_states: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, slots: usize, n: f64, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / n).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(left - c, slots - 1, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if num_states > 0 {
        rec(divisions, num_states, divisions as f64, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGain {
    pub signal: String,
    pub first_order_gain: f64,
    pub second_order_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthfulnessReport {
    pub per_signal: Vec<SignalGain>,
    /// Largest expected gain of any grid deviation over truthful reporting.
    pub max_gain: f64,
}

impl TruthfulnessReport {
    pub fn truthful(&self) -> bool {
        self.max_gain <= 0.0
    }
}

/// Expected-score gain of the best grid deviation from truthful first- and
/// second-order reports, for each signal.
///
/// The first-order report is scored against the state drawn from the
/// holder's posterior; the second-order report against the mean-belief
/// column of that state.
pub fn truthfulness_check<R: Scorer + ?Sized>(
    structure: &InfoStructure,
    rule: &R,
    grid_step: f64,
) -> Result<TruthfulnessReport> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidInput(format!("grid step {grid_step} outside (0, 1]")));
    }
    let divisions = (1.0 / grid_step).round() as usize;
    if ((divisions as f64) * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("grid step {grid_step} does not divide 1")));
    }
    let l = structure.num_states();
    let grid = simplex_grid(l, divisions);
    let means = structure.expected_belief_matrix()?;
    let columns: Vec<BeliefVector> = means.columns();

    let mut per_signal = Vec::with_capacity(structure.num_signals());
    for s in 0..structure.num_signals() {
        let post = match structure.posterior_at(s) {
            Ok(p) => p,
            Err(Error::UnreachableSignal(_)) => continue,
            Err(e) => return Err(e),
        };
        let q = post.as_slice();
        let first = |r: &[f64]| -> f64 { (0..l).map(|w| q[w] * rule.against_state(r, w)).sum() };
        let second =
            |r: &[f64]| -> f64 { (0..l).map(|w| q[w] * rule.against_vector(r, columns[w].as_slice())).sum() };
        let alpha = means.combine(&post);

        let best_gain = |truth: &[f64], f: &dyn Fn(&[f64]) -> f64| {
            let base = f(truth);
            grid.iter()
                .filter(|g| max_norm(g, truth) > DEVIATION_MIN_DISTANCE)
                .map(|g| f(g) - base)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        per_signal.push(SignalGain {
            signal: structure.signals()[s].clone(),
            first_order_gain: best_gain(q, &first),
            second_order_gain: best_gain(alpha.as_slice(), &second),
        });
    }
    let max_gain = per_signal
        .iter()
        .flat_map(|g| [g.first_order_gain, g.second_order_gain])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TruthfulnessReport { per_signal, max_gain })
}
