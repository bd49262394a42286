use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::partition::PartitionModel;
use crate::error::{Error, Result};

/// Interned class identifier. Equal ids mean equal belief records, also
/// across models sharing one [`TypeInterner`].
pub type ClassId = u32;

/// One belief record: a distribution over `(payoff state, other players'
/// lower-order classes)`, with positive entries only, sorted. At order 1
/// the class vector is empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Record {
    pub order: usize,
    pub entries: Vec<(usize, Vec<ClassId>, BigRational)>,
}

#[derive(Debug, Default, Clone)]
pub struct TypeInterner {
    ids: HashMap<Record, ClassId>,
    records: Vec<Record>,
}

impl TypeInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, record: Record) -> ClassId {
        if let Some(&id) = self.ids.get(&record) {
            return id;
        }
        let id = self.records.len() as ClassId;
        self.records.push(record.clone());
        self.ids.insert(record, id);
        id
    }

    pub fn record(&self, id: ClassId) -> &Record {
        &self.records[id as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Order-k belief classes of every cell of every player. Zero-mass cells
/// have no class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderKTypes {
    pub order: usize,
    pub classes: Vec<Vec<Option<ClassId>>>,
}

impl OrderKTypes {
    pub fn class_of_cell(&self, player: usize, cell: usize) -> Option<ClassId> {
        self.classes[player][cell]
    }

    /// Class of the cell containing `ground`.
    pub fn class_of_ground(&self, model: &PartitionModel, player: usize, ground: usize) -> Option<ClassId> {
        self.classes[player][model.cell_of(player, ground)]
    }

    /// Number of distinct classes per player.
    pub fn class_counts(&self) -> Vec<usize> {
        self.classes
            .iter()
            .map(|cells| {
                let mut ids: Vec<ClassId> = cells.iter().flatten().copied().collect();
                ids.sort_unstable();
                ids.dedup();
                ids.len()
            })
            .collect()
    }
}

fn others(classes: &[Vec<Option<ClassId>>], model: &PartitionModel, player: usize, ground: usize) -> Vec<ClassId> {
    (0..model.num_players())
        .filter(|&q| q != player)
        .map(|q| classes[q][model.cell_of(q, ground)].expect("positive ground state lies in positive cells"))
        .collect()
}

/// Records of order `order` given the classes of order `order - 1` (absent
/// at order 1).
fn next_order(
    model: &PartitionModel,
    previous: Option<&OrderKTypes>,
    interner: &mut TypeInterner,
) -> OrderKTypes {
    let order = previous.map_or(1, |p| p.order + 1);
    let classes = (0..model.num_players())
        .map(|player| {
            model
                .cells(player)
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    let mass = model.cell_mass(player, c);
                    if !mass.is_positive() {
                        return None;
                    }
                    let mut dist: BTreeMap<(usize, Vec<ClassId>), BigRational> = BTreeMap::new();
                    for &g in cell {
                        let p = &model.prior()[g];
                        if p.is_zero() {
                            continue;
                        }
                        let key = (
                            model.ground_states()[g].payoff,
                            previous.map_or_else(Vec::new, |prev| others(&prev.classes, model, player, g)),
                        );
                        *dist.entry(key).or_insert_with(BigRational::zero) += p;
                    }
                    let entries = dist.into_iter().map(|((w, o), p)| (w, o, p / &mass)).collect();
                    Some(interner.intern(Record { order, entries }))
                })
                .collect()
        })
        .collect();
    OrderKTypes { order, classes }
}

/// Orders `1..=k`, interned into `interner`.
pub fn orders_up_to(model: &PartitionModel, k: usize, interner: &mut TypeInterner) -> Result<Vec<OrderKTypes>> {
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    let mut out: Vec<OrderKTypes> = Vec::with_capacity(k);
    for _ in 0..k {
        let next = next_order(model, out.last(), interner);
        out.push(next);
    }
    Ok(out)
}

pub fn kth_order_types(model: &PartitionModel, k: usize) -> Result<OrderKTypes> {
    let mut interner = TypeInterner::new();
    Ok(orders_up_to(model, k, &mut interner)?.pop().expect("k >= 1"))
}

/// Iterates orders until the class partition stops refining. Returns the
/// first stable order.
pub fn stable_types(model: &PartitionModel, interner: &mut TypeInterner) -> OrderKTypes {
    let mut current = next_order(model, None, interner);
    loop {
        let next = next_order(model, Some(&current), interner);
        if next.class_counts() == current.class_counts() {
            return current;
        }
        current = next;
    }
}

fn profile_classes(
    model: &PartitionModel,
    profile: &[usize],
    orders: &[OrderKTypes],
) -> Result<Vec<Vec<ClassId>>> {
    model.check_profile(profile)?;
    orders
        .iter()
        .map(|o| {
            profile
                .iter()
                .enumerate()
                .map(|(p, &c)| {
                    o.class_of_cell(p, c)
                        .ok_or_else(|| Error::InvalidInput(format!("player {} cell {c} has zero mass", p + 1)))
                })
                .collect()
        })
        .collect()
}

/// Whether every player's belief records at orders `1..=m` coincide between
/// the two profiles.
pub fn hierarchies_equal_up_to(
    model_a: &PartitionModel,
    profile_a: &[usize],
    model_b: &PartitionModel,
    profile_b: &[usize],
    m: usize,
) -> Result<bool> {
    if model_a.num_players() != model_b.num_players() {
        return Ok(false);
    }
    let mut interner = TypeInterner::new();
    let a = profile_classes(model_a, profile_a, &orders_up_to(model_a, m, &mut interner)?)?;
    let b = profile_classes(model_b, profile_b, &orders_up_to(model_b, m, &mut interner)?)?;
    Ok(a == b)
}

/// Largest `m <= max_order` with equal hierarchies up to `m`. `Some(0)` if
/// first-order beliefs already differ; `None` if they agree through
/// `max_order`.
pub fn agreement_depth(
    model_a: &PartitionModel,
    profile_a: &[usize],
    model_b: &PartitionModel,
    profile_b: &[usize],
    max_order: usize,
) -> Result<Option<usize>> {
    if model_a.num_players() != model_b.num_players() {
        return Ok(Some(0));
    }
    let mut interner = TypeInterner::new();
    let a = profile_classes(model_a, profile_a, &orders_up_to(model_a, max_order, &mut interner)?)?;
    let b = profile_classes(model_b, profile_b, &orders_up_to(model_b, max_order, &mut interner)?)?;
    Ok(a.iter().zip(&b).position(|(x, y)| x != y))
}

/// Search bound for [`agreement_depth`] between two models.
pub fn depth_search_bound(model_a: &PartitionModel, model_b: &PartitionModel) -> usize {
    model_a.num_ground() + model_b.num_ground() + 2
}

#[cfg(test)]
mod tests {
    use super::super::partition::{r, GroundState};
    use super::*;

    fn trivial() -> PartitionModel {
        PartitionModel::new(
            vec!["w1".into(), "w2".into()],
            vec![
                GroundState { name: "a".into(), payoff: 0 },
                GroundState { name: "b".into(), payoff: 1 },
            ],
            vec![r(1, 3), r(2, 3)],
            vec![vec![vec![0, 1]], vec![vec![0, 1]]],
        )
        .unwrap()
    }

    #[test]
    fn common_knowledge_has_one_class() {
        let m = trivial();
        for k in 1..5 {
            assert_eq!(kth_order_types(&m, k).unwrap().class_counts(), vec![1, 1]);
        }
        assert!(hierarchies_equal_up_to(&m, &[0, 0], &m, &[0, 0], 4).unwrap());
        assert!(matches!(kth_order_types(&m, 0), Err(Error::InvalidOrder(0))));
    }

    #[test]
    fn zero_mass_cell_has_no_class() {
        let m = PartitionModel::new(
            vec!["w1".into(), "w2".into()],
            vec![
                GroundState { name: "a".into(), payoff: 0 },
                GroundState { name: "b".into(), payoff: 1 },
            ],
            vec![r(1, 1), r(0, 1)],
            vec![vec![vec![0], vec![1]]],
        )
        .unwrap();
        let t = kth_order_types(&m, 2).unwrap();
        assert_eq!(t.classes[0][1], None);
        assert!(t.classes[0][0].is_some());
    }

    #[test]
    fn records_are_label_independent() {
        // the same model with ground states listed in reverse order
        let m = trivial();
        let rev = PartitionModel::new(
            vec!["w1".into(), "w2".into()],
            vec![
                GroundState { name: "b".into(), payoff: 1 },
                GroundState { name: "a".into(), payoff: 0 },
            ],
            vec![r(2, 3), r(1, 3)],
            vec![vec![vec![0, 1]], vec![vec![1, 0]]],
        )
        .unwrap();
        assert!(hierarchies_equal_up_to(&m, &[0, 0], &rev, &[0, 0], 3).unwrap());
        assert_eq!(agreement_depth(&m, &[0, 0], &rev, &[0, 0], 3).unwrap(), None);
    }
}
