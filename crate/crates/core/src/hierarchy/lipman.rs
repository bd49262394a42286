//! Pairs of partition models that agree in beliefs up to order `m` at a
//! designated profile yet have opposite pooled posteriors.
//!
//! The base model has ground states `(s_l, k)`, `l = 1, 2`, `k = 1..2^m`,
//! uniform prior and interleaved partitions: player 1 holds
//! `{(s1,2k-1), (s1,2k), (s2,k)}` and player 2 holds
//! `{(s2,2k-1), (s2,2k), (s1,k)}` for `k <= 2^(m-1)`, plus one terminal cell
//! each. The cells form a binary tree rooted at `(s1,1)`. The shifted model
//! moves the weight of `(s1,1)` onto a new state `(s1,1)'` hanging off the
//! left subtree, and reweights left and right subtrees so every first-order
//! belief below the root survives except at the terminal cells.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::partition::{GroundState, PartitionModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LipmanModels {
    /// Order requested by the caller.
    pub order: usize,
    /// Order the construction was run at (odd, at least the request).
    pub built_order: usize,
    /// Base model with uniform prior.
    pub mu: PartitionModel,
    /// Shifted model with posterior point mass on the second state.
    pub mu_prime: PartitionModel,
    /// Mirror image of `mu_prime` with posterior point mass on the first state.
    pub mirror: PartitionModel,
    /// Cells containing `(s1,1)` in each model.
    pub profile_mu: Vec<usize>,
    pub profile_prime: Vec<usize>,
    pub profile_mirror: Vec<usize>,
    /// Prior weight unit of the shifted models.
    pub x: BigRational,
}

fn rat(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Ground state index of `(s_l, k)` in the base model: `l` in `{1, 2}`,
/// `k` in `1..=2^m`.
fn base_index(size: usize, l: usize, k: usize) -> usize {
    (l - 1) * size + (k - 1)
}

fn base_partitions(size: usize) -> [Vec<Vec<usize>>; 2] {
    let idx = |l, k| base_index(size, l, k);
    let build = |own: usize, other: usize| {
        let mut cells: Vec<Vec<usize>> = (1..=size / 2)
            .map(|k| vec![idx(own, 2 * k - 1), idx(own, 2 * k), idx(other, k)])
            .collect();
        cells.push((size / 2 + 1..=size).map(|k| idx(other, k)).collect());
        cells
    };
    [build(1, 2), build(2, 1)]
}

fn base_name(l: usize, k: usize) -> String {
    format!("(s{l},{k})")
}

/// States in the subtree hanging below `(s_l, k)` through the cell of the
/// player who does not hold `(s_l, k)` in a triple with its children; the
/// subtree root included.
fn subtree(size: usize, l: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(l, k)];
    let mut frontier = vec![(l, k)];
    while let Some((l, k)) = frontier.pop() {
        if 2 * k <= size {
            let child = 3 - l;
            for c in [2 * k - 1, 2 * k] {
                out.push((child, c));
                frontier.push((child, c));
            }
        }
    }
    out
}

/// Builds the shifted model. The left subtree gets primed copies and
/// receives the extra state; the right subtree keeps its names. `flip`
/// swaps the roles of the two payoff states and players.
fn shifted(size: usize, flip: bool, x: &BigRational) -> (PartitionModel, Vec<usize>) {
    // In the unflipped model (s1,1) is emptied, (s2,2) roots the left subtree
    // and (s1,2) roots the right one. Flipping exchanges s1 and s2 together
    // with the players.
    let (a, b) = if flip { (2, 1) } else { (1, 2) };
    let root_empty = (a, 1);
    let left = subtree(size, b, 2);
    let right = subtree(size, a, 2);
    let mark = if flip { "''" } else { "'" };

    let mut ground = Vec::new();
    let mut prior = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut push = |key: (usize, usize), primed: bool, p: BigRational| {
        let name = format!("{}{}", base_name(key.0, key.1), if primed { mark } else { "" });
        index.insert((key, primed), ground.len());
        ground.push(GroundState { name, payoff: key.0 - 1 });
        prior.push(p);
    };
    let half = x / BigRational::from_integer(2.into());
    let double = x * BigRational::from_integer(2.into());
    push((1, 1), false, if flip { x.clone() } else { BigRational::zero() });
    push((2, 1), false, if flip { BigRational::zero() } else { x.clone() });
    push(root_empty, true, x.clone());
    for &s in &left {
        push(s, true, if s == (b, 2) { x.clone() } else { half.clone() });
    }
    for &s in &right {
        push(s, false, double.clone());
    }

    let primed: std::collections::HashSet<(usize, usize)> = left.iter().copied().collect();
    let locate = |s: (usize, usize)| -> usize {
        if s == (1, 1) || s == (2, 1) {
            index[&(s, false)]
        } else {
            index[&(s, primed.contains(&s))]
        }
    };
    let base = base_partitions(size);
    let mut partitions: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut profile = Vec::new();
    for player in 0..2 {
        let mut cells: Vec<Vec<usize>> = base[player]
            .iter()
            .map(|cell| {
                cell.iter()
                    .map(|&g| {
                        let (l, k) = if g < size { (1, g + 1) } else { (2, g - size + 1) };
                        locate((l, k))
                    })
                    .collect()
            })
            .collect();
        let extra = index[&(root_empty, true)];
        // the player whose triples are made of `b` states gets the extra
        // state in the root cell, the other one in the cell of (b,2)
        let holds_b_triples = player + 1 == b;
        let target = if holds_b_triples { locate((a, 1)) } else { locate((b, 2)) };
        let c = cells.iter().position(|cell| cell.contains(&target)).expect("cell exists");
        if holds_b_triples {
            cells[c].push(extra);
        } else {
            cells[c].insert(0, extra);
        }
        profile.push(cells.iter().position(|cell| cell.contains(&index[&((1, 1), false)])).expect("root"));
        partitions.push(cells);
    }
    let model = PartitionModel::new(vec!["w1".into(), "w2".into()], ground, prior, partitions)
        .expect("construction produces a valid model");
    (model, profile)
}

/// The construction constant: `3x + y x/2 + (y+1) 2x = 1` with
/// `y = 2^m - 2`.
pub fn construction_constant(built_order: usize) -> BigRational {
    let size = 1u64 << built_order;
    rat(2, 5 * size)
}

/// Base model plus shifted and mirror models agreeing with it up to order
/// `m` at `(s1,1)`. Even `m` is built at `m + 1`.
pub fn build_lipman(m: usize) -> Result<LipmanModels> {
    if m < 2 {
        return Err(Error::InvalidOrder(m));
    }
    if m > 20 {
        return Err(Error::InvalidInput(format!("order {m} too large")));
    }
    let built = if m >= 4 && m.is_multiple_of(2) { m + 1 } else { m };
    let size = 1usize << built;

    let ground: Vec<GroundState> = (1..=2)
        .flat_map(|l| {
            (1..=size).map(move |k| GroundState {
                name: base_name(l, k),
                payoff: l - 1,
            })
        })
        .collect();
    let uniform = rat(1, 2 * size as u64);
    let [p1, p2] = base_partitions(size);
    let mu = PartitionModel::new(
        vec!["w1".into(), "w2".into()],
        ground,
        vec![uniform; 2 * size],
        vec![p1, p2],
    )
    .expect("base construction is valid");
    let profile_mu = mu.profile_at(0);

    let x = construction_constant(built);
    let (mu_prime, profile_prime) = shifted(size, false, &x);
    let (mirror, profile_mirror) = shifted(size, true, &x);
    debug_assert!(mu_prime.prior().iter().sum::<BigRational>().is_one());
    Ok(LipmanModels {
        order: m,
        built_order: built,
        mu,
        mu_prime,
        mirror,
        profile_mu,
        profile_prime,
        profile_mirror,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::super::partition::r;
    use super::super::recovery::full_info_posterior;
    use super::super::types::{hierarchies_equal_up_to, kth_order_types};
    use super::*;

    #[test]
    fn m2_base_model() {
        let l = build_lipman(2).unwrap();
        assert_eq!(l.mu.num_ground(), 8);
        assert!(l.mu.prior().iter().all(|p| *p == r(1, 8)));
        // player 1's terminal cell {(s2,3),(s2,4)} believes w2 for sure
        let t = kth_order_types(&l.mu, 1).unwrap();
        let terminal = l.mu.cell_of(0, l.mu.ground_index("(s2,3)").unwrap());
        assert_eq!(l.mu.cells(0)[terminal].len(), 2);
        let mut interner = super::super::types::TypeInterner::new();
        let orders = super::super::types::orders_up_to(&l.mu, 1, &mut interner).unwrap();
        let rec = interner.record(orders[0].classes[0][terminal].unwrap());
        assert_eq!(rec.entries, vec![(1, vec![], r(1, 1))]);
        assert!(t.classes[0][terminal].is_some());
    }

    #[test]
    fn m2_every_cell_distinct_at_order_two() {
        let l = build_lipman(2).unwrap();
        let t = kth_order_types(&l.mu, 2).unwrap();
        for p in 0..2 {
            assert_eq!(t.class_counts()[p], l.mu.cells(p).len());
        }
    }

    #[test]
    fn m2_shifted_model_matches_table() {
        let l = build_lipman(2).unwrap();
        assert_eq!(l.x, r(1, 10));
        let p = |name: &str| l.mu_prime.prior()[l.mu_prime.ground_index(name).unwrap()].clone();
        assert_eq!(p("(s1,1)"), r(0, 1));
        assert_eq!(p("(s2,1)"), r(1, 10));
        assert_eq!(p("(s1,1)'"), r(1, 10));
        assert_eq!(p("(s2,2)'"), r(1, 10));
        assert_eq!(p("(s1,3)'"), r(1, 20));
        assert_eq!(p("(s1,4)'"), r(1, 20));
        assert_eq!(p("(s1,2)"), r(1, 5));
        assert_eq!(p("(s2,3)"), r(1, 5));
        assert_eq!(p("(s2,4)"), r(1, 5));
        assert_eq!(l.mu_prime.num_ground(), 9);
    }

    #[test]
    fn m2_posteriors_and_agreement() {
        let l = build_lipman(2).unwrap();
        assert_eq!(full_info_posterior(&l.mu, &l.profile_mu).unwrap(), vec![r(1, 2), r(1, 2)]);
        assert_eq!(full_info_posterior(&l.mu_prime, &l.profile_prime).unwrap(), vec![r(0, 1), r(1, 1)]);
        assert_eq!(full_info_posterior(&l.mirror, &l.profile_mirror).unwrap(), vec![r(1, 1), r(0, 1)]);
        assert!(hierarchies_equal_up_to(&l.mu, &l.profile_mu, &l.mu_prime, &l.profile_prime, 2).unwrap());
        assert!(!hierarchies_equal_up_to(&l.mu, &l.profile_mu, &l.mu_prime, &l.profile_prime, 3).unwrap());
        assert!(hierarchies_equal_up_to(&l.mu, &l.profile_mu, &l.mirror, &l.profile_mirror, 2).unwrap());
    }

    #[test]
    fn even_orders_built_one_higher() {
        assert_eq!(build_lipman(3).unwrap().built_order, 3);
        assert_eq!(build_lipman(4).unwrap().built_order, 5);
        assert!(matches!(build_lipman(1), Err(Error::InvalidOrder(1))));
    }

    #[test]
    fn constant_balances_total_probability() {
        for m in 2..10 {
            let x = construction_constant(m);
            let y = BigRational::from_integer(BigInt::from((1u64 << m) - 2));
            let three = BigRational::from_integer(3.into());
            let two = BigRational::from_integer(2.into());
            let total = &three * &x + &y * &x / &two + (&y + BigRational::one()) * &two * &x;
            assert!(total.is_one(), "m = {m}");
        }
    }
}
