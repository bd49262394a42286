//! Recovering the pooled-information posterior from a profile of full
//! belief hierarchies.
//!
//! Only the players' type-space beliefs are used: starting from the
//! reported profile, the set of `(state, type profile)` pairs reachable
//! through some player's positive-probability beliefs is closed, then
//! relative weights are propagated along the closure. Two pairs sharing
//! player `j`'s type have weight ratio equal to the ratio of that type's
//! beliefs, which a common prior must satisfy.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::partition::PartitionModel;
use super::types::{stable_types, ClassId, TypeInterner};
use crate::error::{Error, Result};

/// `(payoff state, full type profile)`.
pub type Point = (usize, Vec<ClassId>);

/// One type's belief: `(payoff state, other players' types)` to probability.
pub type TypeBelief = BTreeMap<(usize, Vec<ClassId>), BigRational>;

#[derive(Debug, Clone)]
pub struct TypeSpace {
    num_payoffs: usize,
    beliefs: Vec<BTreeMap<ClassId, TypeBelief>>,
    cell_types: Vec<Vec<Option<ClassId>>>,
}

fn insert_at(others: &[ClassId], player: usize, own: ClassId) -> Vec<ClassId> {
    let mut full = others.to_vec();
    full.insert(player, own);
    full
}

fn without(profile: &[ClassId], player: usize) -> Vec<ClassId> {
    let mut v = profile.to_vec();
    v.remove(player);
    v
}

impl TypeSpace {
    /// Type space given directly by beliefs, one map per player.
    pub fn from_beliefs(num_payoffs: usize, beliefs: Vec<BTreeMap<ClassId, TypeBelief>>) -> Self {
        Self {
            num_payoffs,
            beliefs,
            cell_types: Vec::new(),
        }
    }

    /// Stable types of `model` and their beliefs. Fails unless every player's
    /// positive-mass cells carry pairwise distinct hierarchies.
    pub fn from_model(model: &PartitionModel) -> Result<Self> {
        let mut interner = TypeInterner::new();
        let types = stable_types(model, &mut interner);
        let n = model.num_players();
        let mut beliefs = vec![BTreeMap::new(); n];
        for player in 0..n {
            for (c, cell) in model.cells(player).iter().enumerate() {
                let Some(t) = types.classes[player][c] else { continue };
                let mass = model.cell_mass(player, c);
                let mut belief = TypeBelief::new();
                for &g in cell {
                    let p = &model.prior()[g];
                    if p.is_zero() {
                        continue;
                    }
                    let others: Vec<ClassId> = (0..n)
                        .filter(|&q| q != player)
                        .map(|q| types.class_of_ground(model, q, g).expect("positive state"))
                        .collect();
                    *belief
                        .entry((model.ground_states()[g].payoff, others))
                        .or_insert_with(BigRational::zero) += p / &mass;
                }
                if beliefs[player].insert(t, belief).is_some() {
                    return Err(Error::UnidentifiableHierarchy { player: player + 1 });
                }
            }
        }
        Ok(Self {
            num_payoffs: model.num_payoffs(),
            beliefs,
            cell_types: types.classes,
        })
    }

    pub fn num_players(&self) -> usize {
        self.beliefs.len()
    }

    /// Type of `player`'s `cell` when built from a model.
    pub fn type_of_cell(&self, player: usize, cell: usize) -> Option<ClassId> {
        self.cell_types.get(player)?.get(cell).copied().flatten()
    }

    /// Types of a cell profile.
    pub fn profile_types(&self, cells: &[usize]) -> Result<Vec<ClassId>> {
        cells
            .iter()
            .enumerate()
            .map(|(p, &c)| {
                self.type_of_cell(p, c)
                    .ok_or_else(|| Error::InvalidInput(format!("player {} cell {c} has no type", p + 1)))
            })
            .collect()
    }

    pub fn belief(&self, player: usize, t: ClassId) -> Result<&TypeBelief> {
        self.beliefs
            .get(player)
            .and_then(|b| b.get(&t))
            .ok_or_else(|| Error::InvalidInput(format!("player {} has no type {t}", player + 1)))
    }

    fn prob(&self, player: usize, point: &Point) -> Result<Option<&BigRational>> {
        let (w, profile) = point;
        let belief = self.belief(player, profile[player])?;
        Ok(belief.get(&(*w, without(profile, player))))
    }

    /// Closure and posterior for a reported type profile.
    pub fn recover(&self, reported: &[ClassId]) -> Result<RecoveryResult> {
        let n = self.num_players();
        if reported.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} hierarchies"),
                found: format!("{}", reported.len()),
            });
        }
        for (p, &t) in reported.iter().enumerate() {
            self.belief(p, t)?;
        }

        let mut seed = None;
        for w in 0..self.num_payoffs {
            let point = (w, reported.to_vec());
            for p in 0..n {
                if self.prob(p, &point)?.is_some_and(|x| x.is_positive()) {
                    seed = Some(point.clone());
                }
            }
            if seed.is_some() {
                break;
            }
        }
        let seed = seed.ok_or(Error::ZeroProbabilityProfile)?;

        // breadth-first closure with weight propagation
        let mut weights: BTreeMap<Point, BigRational> = BTreeMap::new();
        weights.insert(seed.clone(), BigRational::one());
        let mut queue = VecDeque::from([seed]);
        while let Some(point) = queue.pop_front() {
            let w_here = weights[&point].clone();
            for j in 0..n {
                let t = point.1[j];
                let belief = self.belief(j, t)?;
                let Some(here) = belief.get(&(point.0, without(&point.1, j))) else {
                    continue;
                };
                if !here.is_positive() {
                    continue;
                }
                for ((w2, others), p) in belief {
                    if !p.is_positive() {
                        continue;
                    }
                    let next: Point = (*w2, insert_at(others, j, t));
                    let w_next = &w_here * p / here;
                    match weights.get(&next) {
                        Some(existing) if *existing != w_next => return Err(Error::InconsistentHierarchies),
                        Some(_) => {}
                        None => {
                            for q in 0..n {
                                self.belief(q, next.1[q]).map_err(|_| Error::InconsistentHierarchies)?;
                            }
                            weights.insert(next.clone(), w_next);
                            queue.push_back(next);
                        }
                    }
                }
            }
        }

        let mut posterior = vec![BigRational::zero(); self.num_payoffs];
        for ((w, profile), x) in &weights {
            if profile == reported {
                posterior[*w] += x;
            }
        }
        let total: BigRational = posterior.iter().sum();
        if !total.is_positive() {
            return Err(Error::ZeroProbabilityProfile);
        }
        posterior.iter_mut().for_each(|x| *x /= &total);
        Ok(RecoveryResult {
            closure: weights.keys().cloned().collect(),
            posterior,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub closure: BTreeSet<Point>,
    /// Exact posterior over payoff states.
    pub posterior: Vec<BigRational>,
}

/// Prior conditioned on the intersection of the profile's cells,
/// marginalised to payoff states.
pub fn full_info_posterior(model: &PartitionModel, profile: &[usize]) -> Result<Vec<BigRational>> {
    let inside = model.intersection(profile)?;
    let mut post = vec![BigRational::zero(); model.num_payoffs()];
    for g in inside {
        post[model.ground_states()[g].payoff] += &model.prior()[g];
    }
    let total: BigRational = post.iter().sum();
    if !total.is_positive() {
        return Err(Error::IncompatibleProfile);
    }
    post.iter_mut().for_each(|x| *x /= &total);
    Ok(post)
}

/// Recovers the pooled posterior from a reported profile of hierarchies,
/// given as the model's stable type ids (see [`TypeSpace::profile_types`]).
pub fn recover_from_hierarchy(model: &PartitionModel, reported: &[ClassId]) -> Result<RecoveryResult> {
    TypeSpace::from_model(model)?.recover(reported)
}

#[cfg(test)]
mod tests {
    use super::super::partition::{r, GroundState};
    use super::*;

    /// Two players with independent binary signals about a binary state.
    fn independent_two_by_two() -> PartitionModel {
        // ground (w, s1, s2); P(w) = 1/2, P(s = w | w) = 3/4 and 2/3
        let mut ground = Vec::new();
        let mut prior = Vec::new();
        for w in 0..2 {
            for s1 in 0..2 {
                for s2 in 0..2 {
                    ground.push(GroundState {
                        name: format!("{w}{s1}{s2}"),
                        payoff: w,
                    });
                    let p1 = if s1 == w { r(3, 4) } else { r(1, 4) };
                    let p2 = if s2 == w { r(2, 3) } else { r(1, 3) };
                    prior.push(r(1, 2) * p1 * p2);
                }
            }
        }
        let by = |f: &dyn Fn(usize) -> usize| -> Vec<Vec<usize>> {
            (0..2).map(|v| (0..8).filter(|&g| f(g) == v).collect()).collect()
        };
        let p1 = by(&|g| (g >> 1) & 1);
        let p2 = by(&|g| g & 1);
        PartitionModel::new(vec!["w1".into(), "w2".into()], ground, prior, vec![p1, p2]).unwrap()
    }

    #[test]
    fn independent_signals_match_bayes() {
        let m = independent_two_by_two();
        let space = TypeSpace::from_model(&m).unwrap();
        for profile in m.positive_profiles() {
            let got = space.recover(&space.profile_types(&profile).unwrap()).unwrap();
            assert_eq!(got.posterior, full_info_posterior(&m, &profile).unwrap());
        }
        // both signals say w1: 1/2·3/4·2/3 against 1/2·1/4·1/3
        assert_eq!(full_info_posterior(&m, &[0, 0]).unwrap(), vec![r(6, 7), r(1, 7)]);
    }

    #[test]
    fn one_state_model_gives_point_mass() {
        let m = PartitionModel::new(
            vec!["w".into()],
            vec![GroundState { name: "g".into(), payoff: 0 }],
            vec![r(1, 1)],
            vec![vec![vec![0]]],
        )
        .unwrap();
        assert_eq!(full_info_posterior(&m, &[0]).unwrap(), vec![r(1, 1)]);
        assert_eq!(recover_from_hierarchy(&m, &TypeSpace::from_model(&m).unwrap().profile_types(&[0]).unwrap()).unwrap().posterior, vec![r(1, 1)]);
    }

    #[test]
    fn incompatible_profile() {
        let m = PartitionModel::new(
            vec!["w1".into(), "w2".into()],
            vec![
                GroundState { name: "a".into(), payoff: 0 },
                GroundState { name: "b".into(), payoff: 1 },
            ],
            vec![r(1, 2), r(1, 2)],
            vec![vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
        )
        .unwrap();
        assert!(matches!(full_info_posterior(&m, &[0, 1]), Err(Error::IncompatibleProfile)));
    }

    #[test]
    fn identical_cells_are_unidentifiable() {
        // player 1's two cells induce the same beliefs
        let m = PartitionModel::new(
            vec!["w1".into(), "w2".into()],
            ["a", "b", "c", "d"]
                .iter()
                .enumerate()
                .map(|(i, n)| GroundState {
                    name: (*n).into(),
                    payoff: i % 2,
                })
                .collect(),
            vec![r(1, 4); 4],
            vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]]],
        )
        .unwrap();
        assert!(matches!(
            TypeSpace::from_model(&m),
            Err(Error::UnidentifiableHierarchy { player: 1 })
        ));
    }

    #[test]
    fn non_common_prior_is_inconsistent() {
        let belief = |a: (i64, i64), b: (i64, i64)| -> TypeBelief {
            [((0, vec![0]), r(a.0, a.1)), ((1, vec![0]), r(b.0, b.1))].into_iter().collect()
        };
        let space = TypeSpace::from_beliefs(
            2,
            vec![
                [(0, belief((1, 2), (1, 2)))].into_iter().collect(),
                [(0, belief((1, 3), (2, 3)))].into_iter().collect(),
            ],
        );
        assert!(matches!(space.recover(&[0, 0]), Err(Error::InconsistentHierarchies)));
    }

    #[test]
    fn zero_probability_profile() {
        let m = independent_two_by_two();
        let space = TypeSpace::from_model(&m).unwrap();
        let t0 = space.type_of_cell(0, 0).unwrap();
        let b = space.belief(0, t0).unwrap().clone();
        let mut beliefs = vec![BTreeMap::new(), BTreeMap::new()];
        // player 2's type 7 never appears in player 1's beliefs and believes nothing about player 1's type
        beliefs[0].insert(t0, b);
        beliefs[1].insert(7, [((0, vec![99]), r(1, 1))].into_iter().collect());
        let odd = TypeSpace::from_beliefs(2, beliefs);
        assert!(matches!(odd.recover(&[t0, 7]), Err(Error::ZeroProbabilityProfile)));
    }
}
