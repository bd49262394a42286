//! Random structures and partition models for property tests and sweeps.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::error::Result;
use crate::hierarchy::{GroundState, PartitionModel};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::model::{InfoStructure, StateSpace};

/// Flat Dirichlet draw of the given length.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Structure with a Dirichlet prior and Dirichlet likelihood columns. All
/// entries are positive almost surely.
pub fn random_structure<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_signals: usize) -> Result<InfoStructure> {
    let prior = dirichlet(rng, num_states);
    let mut likelihood = DMatrix::zeros(num_signals, num_states);
    for w in 0..num_states {
        for (s, p) in dirichlet(rng, num_signals).into_iter().enumerate() {
            likelihood[(s, w)] = p;
        }
    }
    InfoStructure::new(
        StateSpace::numbered(num_states)?,
        (1..=num_signals).map(|s| format!("s{s}")).collect(),
        prior,
        likelihood,
    )
}

/// Rejection-samples [`random_structure`] until the assumption report at
/// `delta` is satisfied. Returns the structure and the number of rejections.
pub fn random_valid_structure<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_signals: usize,
    delta: f64,
) -> Result<(InfoStructure, usize)> {
    let mut rejected = 0;
    loop {
        let s = random_structure(rng, num_states, num_signals)?;
        if s.check_assumptions(delta, DEFAULT_RANK_TOL)?.satisfied() {
            return Ok((s, rejected));
        }
        rejected += 1;
    }
}

/// Model on ground states `(w, c_1, .., c_n)`: player `i` observes `c_i`.
/// Prior weights are small integers, zero with probability `zero_prob`.
pub fn random_partition_model<R: Rng + ?Sized>(
    rng: &mut R,
    num_players: usize,
    num_payoffs: usize,
    max_cells: usize,
    zero_prob: f64,
) -> Result<PartitionModel> {
    let cells: Vec<usize> = (0..num_players).map(|_| rng.random_range(1..=max_cells)).collect();
    let mut coords: Vec<Vec<usize>> = vec![vec![]];
    for &c in std::iter::once(&num_payoffs).chain(&cells) {
        coords = coords
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    let mut weights: Vec<u32> = coords
        .iter()
        .map(|_| if rng.random::<f64>() < zero_prob { 0 } else { rng.random_range(1..=6) })
        .collect();
    if weights.iter().all(|w| *w == 0) {
        weights[0] = 1;
    }
    let total: u32 = weights.iter().sum();
    let ground = coords
        .iter()
        .map(|c| GroundState {
            name: c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("."),
            payoff: c[0],
        })
        .collect();
    let prior = weights
        .iter()
        .map(|&w| BigRational::new(BigInt::from(w), BigInt::from(total)))
        .collect();
    let partitions = (0..num_players)
        .map(|p| {
            (0..cells[p])
                .map(|v| (0..coords.len()).filter(|&g| coords[g][p + 1] == v).collect())
                .collect()
        })
        .collect();
    PartitionModel::new(
        (1..=num_payoffs).map(|w| format!("w{w}")).collect(),
        ground,
        prior,
        partitions,
    )
}
