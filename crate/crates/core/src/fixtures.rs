//! Embedded three-state worked example: a posterior table and a
//! state-conditional signal table published with rounding, plus the derived
//! tables they are expected to reproduce.
//!
//! The two input tables are not jointly Bayes-consistent under a uniform
//! prior, so [`example1_structure`] carries the posterior table as an
//! override and every downstream quantity is computed from the pair.

use nalgebra::DMatrix;

use crate::model::{InfoStructure, StateSpace};

/// `POSTERIOR[s][w]`: belief in state `w` after signal `s`.
pub const EXAMPLE1_POSTERIOR: [[f64; 3]; 3] = [[0.4, 0.21, 0.39], [0.45, 0.54, 0.01], [0.44, 0.06, 0.5]];

/// `LIKELIHOOD[s][w]`: probability of signal `s` in state `w`.
pub const EXAMPLE1_LIKELIHOOD: [[f64; 3]; 3] =
    [[0.31, 0.259, 0.433], [0.349, 0.667, 0.011], [0.341, 0.074, 0.556]];

/// `MEAN[i][j]`: average belief in state `i` when the true state is `j`.
pub const EXAMPLE1_MEAN_TABLE: [[f64; 3]; 3] =
    [[0.431, 0.436, 0.422], [0.274, 0.419, 0.130], [0.295, 0.145, 0.447]];

/// `ALPHA[i][s]`: component `i` of the expected population average held by
/// an agent who saw signal `s`.
pub const EXAMPLE1_ALPHA_TABLE: [[f64; 3]; 3] =
    [[0.429, 0.434, 0.427], [0.248, 0.351, 0.211], [0.323, 0.215, 0.362]];

/// Surprisingly-popular verdicts: `[reporter signal][true state]` gives the
/// set of surprising states (0-based) and the most surprising one.
pub const EXAMPLE1_SP_TABLE: [[(&[usize], usize); 3]; 3] = [
    [(&[0, 1], 1), (&[0, 1], 1), (&[2], 2)],
    [(&[2], 2), (&[0, 1], 1), (&[2], 2)],
    [(&[0, 1], 1), (&[0, 1], 1), (&[2], 2)],
];

pub fn example1_posterior_table() -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |s, w| EXAMPLE1_POSTERIOR[s][w])
}

pub fn example1_likelihood_table() -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |s, w| EXAMPLE1_LIKELIHOOD[s][w])
}

/// Likelihood table alone, uniform prior, Bayes posteriors.
pub fn example1_likelihood_structure() -> InfoStructure {
    InfoStructure::new(
        StateSpace::numbered(3).expect("three labels"),
        vec!["s1".into(), "s2".into(), "s3".into()],
        vec![1.0 / 3.0; 3],
        example1_likelihood_table(),
    )
    .expect("published likelihood columns sum to one")
}

/// Replay structure: published likelihoods with the published posterior
/// table as an override.
pub fn example1_structure() -> InfoStructure {
    example1_likelihood_structure()
        .with_posterior_override(example1_posterior_table())
        .expect("published posterior rows sum to one")
}
