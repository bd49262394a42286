use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::BeliefVector;

/// A ground state tagged with the payoff state it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundState {
    pub name: String,
    pub payoff: usize,
}

/// Finite ground-state space with a common prior and one partition per
/// player. Probabilities are exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionModel {
    payoff_states: Vec<String>,
    ground: Vec<GroundState>,
    prior: Vec<BigRational>,
    partitions: Vec<Vec<Vec<usize>>>,
    cell_of: Vec<Vec<usize>>,
}

impl PartitionModel {
    pub fn new(
        payoff_states: Vec<String>,
        ground: Vec<GroundState>,
        prior: Vec<BigRational>,
        partitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let n = ground.len();
        if payoff_states.is_empty() {
            return Err(Error::InvalidModel("no payoff states".into()));
        }
        if n == 0 {
            return Err(Error::InvalidModel("no ground states".into()));
        }
        if prior.len() != n {
            return Err(Error::InvalidModel(format!("{} prior entries for {n} ground states", prior.len())));
        }
        if let Some(g) = ground.iter().find(|g| g.payoff >= payoff_states.len()) {
            return Err(Error::InvalidModel(format!("`{}` has unknown payoff state {}", g.name, g.payoff)));
        }
        if let Some(i) = prior.iter().position(|p| p.is_negative()) {
            return Err(Error::InvalidModel(format!("negative prior on `{}`", ground[i].name)));
        }
        let total: BigRational = prior.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidModel(format!("prior sums to {total}")));
        }
        if partitions.is_empty() {
            return Err(Error::InvalidModel("no players".into()));
        }
        let mut cell_of = Vec::with_capacity(partitions.len());
        for (p, cells) in partitions.iter().enumerate() {
            let mut owner = vec![usize::MAX; n];
            for (c, cell) in cells.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::InvalidModel(format!("player {} has an empty cell", p + 1)));
                }
                for &g in cell {
                    if g >= n {
                        return Err(Error::InvalidModel(format!("player {} cell names ground state {g}", p + 1)));
                    }
                    if owner[g] != usize::MAX {
                        return Err(Error::InvalidModel(format!(
                            "player {} covers `{}` twice",
                            p + 1,
                            ground[g].name
                        )));
                    }
                    owner[g] = c;
                }
            }
            if let Some(g) = owner.iter().position(|&c| c == usize::MAX) {
                return Err(Error::InvalidModel(format!(
                    "player {} does not cover `{}`",
                    p + 1,
                    ground[g].name
                )));
            }
            cell_of.push(owner);
        }
        Ok(Self {
            payoff_states,
            ground,
            prior,
            partitions,
            cell_of,
        })
    }

    pub fn payoff_states(&self) -> &[String] {
        &self.payoff_states
    }

    pub fn num_payoffs(&self) -> usize {
        self.payoff_states.len()
    }

    pub fn ground_states(&self) -> &[GroundState] {
        &self.ground
    }

    pub fn num_ground(&self) -> usize {
        self.ground.len()
    }

    pub fn prior(&self) -> &[BigRational] {
        &self.prior
    }

    pub fn num_players(&self) -> usize {
        self.partitions.len()
    }

    pub fn cells(&self, player: usize) -> &[Vec<usize>] {
        &self.partitions[player]
    }

    pub fn cell_of(&self, player: usize, ground: usize) -> usize {
        self.cell_of[player][ground]
    }

    pub fn cell_mass(&self, player: usize, cell: usize) -> BigRational {
        self.partitions[player][cell].iter().map(|&g| &self.prior[g]).sum()
    }

    pub fn ground_index(&self, name: &str) -> Result<usize> {
        self.ground
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown ground state `{name}`")))
    }

    /// Each player's cell containing `ground`.
    pub fn profile_at(&self, ground: usize) -> Vec<usize> {
        (0..self.num_players()).map(|p| self.cell_of[p][ground]).collect()
    }

    /// Ground states in every cell of `profile`.
    pub fn intersection(&self, profile: &[usize]) -> Result<Vec<usize>> {
        self.check_profile(profile)?;
        Ok((0..self.num_ground())
            .filter(|&g| (0..self.num_players()).all(|p| self.cell_of[p][g] == profile[p]))
            .collect())
    }

    pub(crate) fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.num_players() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cells", self.num_players()),
                found: format!("{}", profile.len()),
            });
        }
        for (p, &c) in profile.iter().enumerate() {
            if c >= self.partitions[p].len() {
                return Err(Error::InvalidInput(format!("player {} has no cell {c}", p + 1)));
            }
        }
        Ok(())
    }

    /// Every cell profile whose intersection has positive prior mass.
    pub fn positive_profiles(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..self.num_ground())
            .filter(|&g| self.prior[g].is_positive())
            .map(|g| self.profile_at(g))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for PartitionModel {
    /// Renders the model in the file format read by [`parse_partition_model`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quoted = |v: &[String]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
        writeln!(f, "payoff_states = [{}]", quoted(&self.payoff_states))?;
        for (g, p) in self.ground.iter().zip(&self.prior) {
            writeln!(f, "\n[[state]]")?;
            writeln!(f, "name = \"{}\"", g.name)?;
            writeln!(f, "payoff = \"{}\"", self.payoff_states[g.payoff])?;
            writeln!(f, "prior = \"{p}\"")?;
        }
        for cells in &self.partitions {
            writeln!(f, "\n[[player]]")?;
            let rendered: Vec<String> = cells
                .iter()
                .map(|c| {
                    let names: Vec<String> = c.iter().map(|&g| self.ground[g].name.clone()).collect();
                    format!("[{}]", quoted(&names))
                })
                .collect();
            writeln!(f, "cells = [{}]", rendered.join(", "))?;
        }
        Ok(())
    }
}

/// Exact rational from `"3/8"`, `"0.125"` or `"1"`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::parse(format!("`{text}` is not a rational number"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, scale);
    Ok(if neg { -r } else { r })
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Converts an exact distribution into a [`BeliefVector`].
pub fn to_belief(dist: &[BigRational]) -> Result<BeliefVector> {
    BeliefVector::normalize(dist.iter().map(rational_to_f64).collect())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProb {
    Text(String),
    Int(i64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    name: String,
    payoff: String,
    prior: toml::Spanned<RawProb>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlayer {
    cells: toml::Spanned<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    payoff_states: Vec<String>,
    state: Vec<toml::Spanned<RawState>>,
    player: Vec<RawPlayer>,
}

/// Reads a partition model:
///
/// ```toml
/// payoff_states = ["w1", "w2"]
///
/// [[state]]
/// name = "a"
/// payoff = "w1"
/// prior = "1/2"
///
/// [[state]]
/// name = "b"
/// payoff = "w2"
/// prior = "1/2"
///
/// [[player]]
/// cells = [["a"], ["b"]]
/// ```
///
/// Decimal priors are read as exact fractions of a power of ten.
pub fn parse_partition_model(text: &str) -> Result<PartitionModel> {
    let line = |offset: usize| text[..offset.min(text.len())].matches('\n').count() + 1;
    let raw: RawModel = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line(s.start)),
        message: e.message().to_string(),
    })?;
    let at = |span: std::ops::Range<usize>, message: String| Error::Parse {
        line: Some(line(span.start)),
        message,
    };
    let payoff_index: HashMap<&str, usize> = raw
        .payoff_states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut ground = Vec::new();
    let mut prior = Vec::new();
    let mut by_name = HashMap::new();
    for s in &raw.state {
        let st = s.get_ref();
        let payoff = *payoff_index
            .get(st.payoff.as_str())
            .ok_or_else(|| at(s.span(), format!("unknown payoff state `{}`", st.payoff)))?;
        if by_name.insert(st.name.clone(), ground.len()).is_some() {
            return Err(at(s.span(), format!("duplicate state `{}`", st.name)));
        }
        let p = match st.prior.get_ref() {
            RawProb::Text(t) => parse_rational(t).map_err(|e| at(st.prior.span(), e.to_string()))?,
            RawProb::Int(i) => BigRational::from_integer(BigInt::from(*i)),
        };
        ground.push(GroundState {
            name: st.name.clone(),
            payoff,
        });
        prior.push(p);
    }
    let mut partitions = Vec::new();
    for p in &raw.player {
        let cells = p
            .cells
            .get_ref()
            .iter()
            .map(|cell| {
                cell.iter()
                    .map(|name| {
                        by_name
                            .get(name)
                            .copied()
                            .ok_or_else(|| at(p.cells.span(), format!("unknown state `{name}`")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        partitions.push(cells);
    }
    PartitionModel::new(raw.payoff_states, ground, prior, partitions)
}

pub fn load_partition_model(path: &Path) -> Result<PartitionModel> {
    parse_partition_model(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
pub(crate) fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
