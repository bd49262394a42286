//! Seeded Monte Carlo sweeps over population sizes.

use std::collections::BTreeMap;

use crowdmean::aggregate::{
    action_pmba, fmt_sig, limited_info_pmba, most_surprisingly_popular, pmba_binary, pmba_multi, population_mean,
    select_binary_reporters, select_opposite_voters, select_reporters, surprisingly_popular, MatchOptions,
    ReporterSelection,
};
use crowdmean::population::{
    attach_expected_vote_shares, attach_misspecified_alpha, attach_truthful_alpha, sample_population, truthful_alpha,
};
use crowdmean::rng::{derive_seed, domain};
use crowdmean::{CorrelationSpec, Error, InfoStructure, MisspecSpec, Procedure, Result, State};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::{Format, Table};

/// Margin below which a surprisingly-popular comparison is a tie.
pub const SP_TIE_TOL: f64 = 1e-12;

/// What one trial needs besides its seed.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub structure: &'a InfoStructure,
    pub procedure: Procedure,
    pub correlation: CorrelationSpec,
    pub true_state: Option<State>,
    pub misspec_half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub true_state: Option<State>,
    pub recovered_state: Option<State>,
    pub match_distance: Option<f64>,
    pub runner_up_distance: Option<f64>,
    pub error: Option<&'static str>,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.recovered_state.is_some() && self.recovered_state == self.true_state
    }
}

/// Seed of trial `trial` at population size `n`.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(master, domain::TRIAL, n as u64), domain::TRIAL, trial as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub true_state: State,
    pub recovered_state: State,
    /// Best and runner-up column distances; absent for the
    /// surprisingly-popular rule, which does not match columns.
    pub distances: Option<(f64, f64)>,
}

/// Samples one population and applies the procedure. Reporters are the
/// first agents that make the procedure well posed; their second-order
/// reports are truthful except under `limited_info_pmba`, where everyone
/// reports with misspecification noise.
pub fn run_trial(setup: &TrialSetup<'_>, n: usize, seed: u64) -> Result<TrialOutcome> {
    let s = setup.structure;
    let l = s.num_states();
    let mut draw = sample_population(s, setup.correlation, n, setup.true_state, seed)?;
    let means = s.expected_belief_matrix()?;
    let opts = MatchOptions::monte_carlo(l, n);
    let outcome = match setup.procedure {
        Procedure::PmbaBinary => {
            let (a, b) = select_binary_reporters(&draw.reports, &opts)?;
            attach_truthful_alpha(&mut draw, &means, &[a, b]);
            pmba_binary(&draw.reports, (a, b), &opts)?
        }
        Procedure::PmbaMulti => {
            let chosen = select_reporters(&draw.reports, l, opts.rank_tol)?;
            attach_truthful_alpha(&mut draw, &means, &chosen);
            pmba_multi(&draw.reports, ReporterSelection::Explicit(chosen), &opts)?
        }
        Procedure::ActionPmba => {
            let (a, b) = select_opposite_voters(&draw.reports)?;
            attach_expected_vote_shares(&mut draw, s, &[a, b])?;
            action_pmba(&draw.reports, Some((a, b)), &opts)?
        }
        Procedure::LimitedInfoPmba => {
            let spec = MisspecSpec::new(setup.misspec_half_width);
            attach_misspecified_alpha(&mut draw, &means, &spec, seed)?;
            limited_info_pmba(&draw.reports, &opts)?
        }
        Procedure::SurprisinglyPopular => {
            let mean = population_mean(&draw.reports)?;
            let alpha = truthful_alpha(&draw.reports[0].first_order, &means);
            let state = if l == 2 {
                surprisingly_popular(&mean, &alpha, SP_TIE_TOL)?
            } else {
                most_surprisingly_popular(&mean, &alpha, SP_TIE_TOL)?.ok_or(Error::NoSurprise)?
            };
            return Ok(TrialOutcome {
                true_state: draw.true_state,
                recovered_state: state,
                distances: None,
            });
        }
    };
    Ok(TrialOutcome {
        true_state: draw.true_state,
        recovered_state: outcome.recovered_state,
        distances: Some((outcome.match_distance, outcome.runner_up_distance)),
    })
}

fn record(setup: &TrialSetup<'_>, n: usize, trial: usize, master: u64) -> TrialRecord {
    let seed = trial_seed(master, n, trial);
    let mut rec = TrialRecord {
        n,
        trial,
        seed,
        true_state: setup.true_state,
        recovered_state: None,
        match_distance: None,
        runner_up_distance: None,
        error: None,
    };
    match run_trial(setup, n, seed) {
        Ok(out) => {
            rec.true_state = Some(out.true_state);
            rec.recovered_state = Some(out.recovered_state);
            rec.match_distance = out.distances.map(|d| d.0);
            rec.runner_up_distance = out.distances.map(|d| d.1);
        }
        Err(e) => rec.error = Some(e.kind()),
    }
    rec
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub trials: usize,
    pub recovered: usize,
    pub wrong: usize,
    pub errors: BTreeMap<&'static str, usize>,
    pub mean_match_distance: Option<f64>,
}

impl SizeSummary {
    pub fn recovery_rate(&self) -> f64 {
        self.recovered as f64 / self.trials as f64
    }

    fn error_cell(&self) -> String {
        self.errors
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub procedure: Procedure,
    pub seed: u64,
    pub state_labels: Vec<String>,
    /// Ordered by (population size, trial).
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SizeSummary>,
}

/// Runs `trials` seeded trials at each population size in parallel.
pub fn sweep(
    setup: &TrialSetup<'_>,
    population_sizes: &[usize],
    trials: usize,
    master_seed: u64,
) -> Result<SweepResult> {
    if trials == 0 {
        return Err(Error::InvalidInput("a sweep needs at least one trial".into()));
    }
    if let Some(&n) = population_sizes.iter().find(|&&n| n == 0) {
        return Err(Error::InvalidPopulationSize(n));
    }
    let jobs: Vec<(usize, usize)> = population_sizes
        .iter()
        .flat_map(|&n| (0..trials).map(move |t| (n, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs.par_iter().map(|&(n, t)| record(setup, n, t, master_seed)).collect();

    let summaries = records
        .chunks(trials)
        .map(|chunk| {
            let mut errors = BTreeMap::new();
            let (mut recovered, mut wrong) = (0, 0);
            let mut dist = Vec::new();
            for r in chunk {
                match r.error {
                    Some(kind) => *errors.entry(kind).or_insert(0) += 1,
                    None if r.correct() => recovered += 1,
                    None => wrong += 1,
                }
                dist.extend(r.match_distance);
            }
            SizeSummary {
                n: chunk[0].n,
                trials: chunk.len(),
                recovered,
                wrong,
                errors,
                mean_match_distance: (!dist.is_empty()).then(|| dist.iter().sum::<f64>() / dist.len() as f64),
            }
        })
        .collect();

    Ok(SweepResult {
        procedure: setup.procedure,
        seed: master_seed,
        state_labels: setup.structure.states().labels().to_vec(),
        records,
        summaries,
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let structure = config.structure.load()?;
    let true_state = config
        .true_state
        .as_deref()
        .map(|label| structure.states().lookup(label))
        .transpose()?;
    let setup = TrialSetup {
        structure: &structure,
        procedure: config.procedure,
        correlation: config.correlation,
        true_state,
        misspec_half_width: config.misspec_half_width,
    };
    sweep(&setup, &config.population_sizes, config.trials, config.seed)
}

fn opt_sig(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

impl SweepResult {
    fn label(&self, s: Option<State>) -> String {
        s.map(|s| self.state_labels[s.index()].clone()).unwrap_or_default()
    }

    pub fn trial_table(&self) -> Table {
        let mut t = Table::new(&[
            "n",
            "trial",
            "seed",
            "true_state",
            "recovered_state",
            "correct",
            "match_distance",
            "runner_up_distance",
            "error",
        ]);
        for r in &self.records {
            t.push(vec![
                r.n.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                self.label(r.true_state),
                self.label(r.recovered_state),
                r.correct().to_string(),
                opt_sig(r.match_distance),
                opt_sig(r.runner_up_distance),
                r.error.unwrap_or("").to_string(),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["n", "trials", "recovered", "wrong", "recovery_rate", "mean_match_distance", "errors"]);
        for s in &self.summaries {
            t.push(vec![
                s.n.to_string(),
                s.trials.to_string(),
                s.recovered.to_string(),
                s.wrong.to_string(),
                fmt_sig(s.recovery_rate()),
                opt_sig(s.mean_match_distance),
                s.error_cell(),
            ]);
        }
        t
    }

    /// Full document: per-trial rows as delimited text, or the summary and
    /// every trial as keys.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.trial_table().to_csv(),
            Format::Kv => {
                let mut out = format!("procedure = {}\nseed = {}\n", self.procedure, self.seed);
                for s in &self.summaries {
                    let p = format!("n{}", s.n);
                    out.push_str(&format!("{p}.trials = {}\n", s.trials));
                    out.push_str(&format!("{p}.recovered = {}\n", s.recovered));
                    out.push_str(&format!("{p}.wrong = {}\n", s.wrong));
                    out.push_str(&format!("{p}.recovery_rate = {}\n", fmt_sig(s.recovery_rate())));
                    out.push_str(&format!("{p}.mean_match_distance = {}\n", opt_sig(s.mean_match_distance)));
                    for (k, v) in &s.errors {
                        out.push_str(&format!("{p}.errors.{k} = {v}\n"));
                    }
                }
                for r in &self.records {
                    let outcome = match r.error {
                        Some(kind) => format!("error {kind}"),
                        None => format!("{} {}", self.label(r.recovered_state), opt_sig(r.match_distance)),
                    };
                    out.push_str(&format!(
                        "n{}.trial{} = {} {}\n",
                        r.n,
                        r.trial,
                        self.label(r.true_state),
                        outcome.trim_end()
                    ));
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(s: &InfoStructure, procedure: Procedure) -> TrialSetup<'_> {
        TrialSetup {
            structure: s,
            procedure,
            correlation: CorrelationSpec::Iid,
            true_state: Some(State(0)),
            misspec_half_width: 0.02,
        }
    }

    #[test]
    fn every_procedure_runs_on_binary_structure() {
        let s = InfoStructure::binary_symmetric(0.7).unwrap();
        for p in Procedure::ALL {
            let r = sweep(&setup(&s, p), &[5000], 20, 1).unwrap();
            assert!(r.summaries[0].recovered >= 18, "{p}: {:?}", r.summaries[0]);
        }
    }

    #[test]
    fn rows_ordered_by_size_then_trial() {
        let s = InfoStructure::binary_symmetric(0.7).unwrap();
        let r = sweep(&setup(&s, Procedure::PmbaBinary), &[300, 100], 7, 2).unwrap();
        let keys: Vec<(usize, usize)> = r.records.iter().map(|r| (r.n, r.trial)).collect();
        let expected: Vec<(usize, usize)> = [300, 100].iter().flat_map(|&n| (0..7).map(move |t| (n, t))).collect();
        assert_eq!(keys, expected);
        assert_eq!(r.summaries.iter().map(|s| s.trials).sum::<usize>(), 14);
    }

    #[test]
    fn small_populations_report_ambiguity_as_errors() {
        let s = InfoStructure::binary_symmetric(0.7).unwrap();
        let r = sweep(&setup(&s, Procedure::PmbaBinary), &[10], 50, 3).unwrap();
        let sm = &r.summaries[0];
        assert_eq!(sm.recovered + sm.wrong + sm.errors.values().sum::<usize>(), 50);
        assert!(sm.errors.contains_key("ambiguous_match"));
    }

    #[test]
    fn zero_trials_rejected() {
        let s = InfoStructure::binary_symmetric(0.7).unwrap();
        assert!(sweep(&setup(&s, Procedure::PmbaBinary), &[10], 0, 3).is_err());
    }
}
