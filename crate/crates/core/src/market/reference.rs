//! The reference ordering ≻0 shared by all daycare priorities.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::ChildIx;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceOrdering {
    pub ordering: Vec<ChildIx>,
    /// Keyed by family position; only families with siblings appear.
    pub grouped: BTreeMap<usize, bool>,
}

enum Entity<'a> {
    Block(&'a [ChildIx]),
    Single(ChildIx),
}

/// Shuffle singles and sibling families, keeping most families contiguous.
///
/// A family with siblings is split into independent children with
/// probability `1 / n^(1+ε)`.
pub fn gen_reference_ordering<R: Rng + ?Sized>(
    families: &[Vec<ChildIx>],
    n: usize,
    epsilon: f64,
    rng: &mut R,
) -> ReferenceOrdering {
    let split_p = (n.max(1) as f64).powf(-(1.0 + epsilon));
    let mut grouped = BTreeMap::new();
    let mut entities = Vec::new();
    for (i, kids) in families.iter().enumerate() {
        if kids.len() < 2 {
            entities.extend(kids.iter().map(|&c| Entity::Single(c)));
            continue;
        }
        let split = rng.random_bool(split_p.min(1.0));
        grouped.insert(i, !split);
        if split {
            entities.extend(kids.iter().map(|&c| Entity::Single(c)));
        } else {
            entities.push(Entity::Block(kids));
        }
    }
    entities.shuffle(rng);
    let ordering = entities
        .into_iter()
        .flat_map(|e| match e {
            Entity::Block(kids) => kids.to_vec(),
            Entity::Single(c) => vec![c],
        })
        .collect();
    ReferenceOrdering { ordering, grouped }
}
