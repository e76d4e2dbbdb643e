//! Random daycare markets.
//!
//! Each physical daycare is split into one unit per age group. Children apply
//! to the unit matching their age, and every unit ranks children of that age
//! by an independent Mallows draw around one shared reference ordering.

mod mallows;
mod prefs;
mod reference;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{ChildIx, DaycareDoc, FamilyDoc, Instance, InstanceDoc, ModelError, DUMMY_ID};

pub use mallows::{kendall_tau, mallows_sample};
pub use prefs::{bounded_distribution, gen_family_prefs, gen_individual_prefs};
pub use reference::{gen_reference_ordering, ReferenceOrdering};

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("invalid market config: {0}")]
    Config(String),
    #[error("orderings are not over the same elements")]
    OrderingMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub n: usize,
    pub alpha: f64,
    #[serde(alias = "K")]
    pub max_siblings: usize,
    /// List length for children without siblings.
    #[serde(alias = "L")]
    pub pref_length: usize,
    /// Individual list length for each sibling before tuples are formed.
    pub sibling_pref_length: usize,
    pub sigma: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub daycare_ratio: f64,
    pub capacity_profile: Vec<usize>,
    pub joint_pref_length: usize,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            n: 500,
            alpha: 0.2,
            max_siblings: 3,
            pref_length: 5,
            sibling_pref_length: 10,
            sigma: 1.0,
            phi: 0.5,
            epsilon: 1.0,
            daycare_ratio: 0.1,
            capacity_profile: vec![5, 5, 1, 1, 1, 1],
            joint_pref_length: 10,
            seed: 0,
        }
    }
}

/// Counts of families by size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyCounts {
    pub pairs: usize,
    pub triples: usize,
    pub singles: usize,
}

impl FamilyCounts {
    pub fn sibling_children(&self) -> usize {
        2 * self.pairs + 3 * self.triples
    }

    pub fn families(&self) -> usize {
        self.pairs + self.triples + self.singles
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: String| Err(MarketError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return bad(format!("phi must lie in [0, 1], got {}", self.phi));
        }
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 1, got {}", self.sigma));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.daycare_ratio > 0.0 && self.daycare_ratio.is_finite()) {
            return bad("daycare_ratio must be positive".into());
        }
        if self.capacity_profile.is_empty() {
            return bad("capacity_profile must list at least one age group".into());
        }
        if self.pref_length == 0 || self.sibling_pref_length == 0 || self.joint_pref_length == 0 {
            return bad("preference lengths must be positive".into());
        }
        if self.alpha > 0.0 && !(2..=3).contains(&self.max_siblings) {
            return bad(format!("max_siblings must be 2 or 3, got {}", self.max_siblings));
        }
        self.family_counts().map(|_| ())
    }

    /// Two-sibling families hold 80% of sibling children and three-sibling
    /// families 20%; with `max_siblings = 2` all siblings come in pairs.
    pub fn family_counts(&self) -> Result<FamilyCounts, MarketError> {
        let s = self.alpha * self.n as f64;
        let (pairs, triples) = if self.max_siblings >= 3 {
            ((s * 0.8 / 2.0) as usize, (s * 0.2 / 3.0) as usize)
        } else {
            ((s / 2.0) as usize, 0)
        };
        let sib = 2 * pairs + 3 * triples;
        if sib > self.n {
            return Err(MarketError::Config(format!("{sib} sibling children exceed n = {}", self.n)));
        }
        Ok(FamilyCounts { pairs, triples, singles: self.n - sib })
    }

    /// Number of physical daycares, at least one.
    pub fn physical_daycares(&self) -> Result<usize, MarketError> {
        let f = self.family_counts()?.families();
        Ok(((self.daycare_ratio * f as f64) as usize).max(1))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedMarket {
    pub instance: Instance,
    pub reference: ReferenceOrdering,
    pub ages: Vec<usize>,
}

pub fn unit_id(daycare: usize, age: usize) -> String {
    format!("d{daycare}-a{age}")
}

pub fn gen_instance(cfg: &MarketConfig) -> Result<GeneratedMarket, MarketError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let counts = cfg.family_counts()?;
    let m = cfg.physical_daycares()?;
    let n_ages = cfg.capacity_profile.len();

    let mut sizes: Vec<usize> =
        [(3, counts.triples), (2, counts.pairs), (1, counts.singles)].iter().flat_map(|&(k, c)| vec![k; c]).collect();
    sizes.shuffle(&mut rng);
    let mut families: Vec<Vec<ChildIx>> = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for k in sizes {
        families.push((next..next + k).map(ChildIx).collect());
        next += k;
    }
    let ages: Vec<usize> = (0..cfg.n).map(|_| rng.random_range(0..n_ages)).collect();
    let unit = |d: usize, c: ChildIx| d * n_ages + ages[c.0];

    let p = bounded_distribution(m, cfg.sigma, &mut rng)?;
    let mut preferences: Vec<Vec<Vec<usize>>> = Vec::with_capacity(families.len());
    for kids in &families {
        let tuples = if kids.len() == 1 {
            gen_individual_prefs(&p, cfg.pref_length.min(m), &mut rng)?
                .into_iter()
                .map(|d| vec![unit(d, kids[0])])
                .collect()
        } else {
            let lists = kids
                .iter()
                .map(|&c| {
                    let l = gen_individual_prefs(&p, cfg.sibling_pref_length.min(m), &mut rng)?;
                    Ok(l.into_iter().map(|d| unit(d, c)).collect())
                })
                .collect::<Result<Vec<Vec<usize>>, MarketError>>()?;
            gen_family_prefs(&lists, cfg.joint_pref_length, &mut rng)?
        };
        preferences.push(tuples);
    }

    let reference = gen_reference_ordering(&families, cfg.n, cfg.epsilon, &mut rng);
    let child_id = |c: ChildIx| format!("c{}", c.0 + 1);
    let mut daycares = Vec::with_capacity(m * n_ages + 1);
    for d in 0..m {
        for (age, &quota) in cfg.capacity_profile.iter().enumerate() {
            let priority = mallows_sample(&reference.ordering, cfg.phi, &mut rng)
                .into_iter()
                .filter(|c| ages[c.0] == age)
                .map(child_id)
                .collect();
            daycares.push(DaycareDoc { id: unit_id(d + 1, age), quota: Some(quota), priority });
        }
    }
    daycares.push(DaycareDoc { id: DUMMY_ID.to_string(), quota: None, priority: Vec::new() });

    let unit_name = |u: usize| daycares[u].id.clone();
    let family_docs: Vec<FamilyDoc> = families
        .iter()
        .zip(&preferences)
        .enumerate()
        .map(|(i, (kids, prefs))| FamilyDoc {
            id: format!("f{}", i + 1),
            children: kids.iter().map(|&c| child_id(c)).collect(),
            preferences: prefs.iter().map(|t| t.iter().map(|&u| unit_name(u)).collect()).collect(),
        })
        .collect();

    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), serde_json::to_value(cfg).expect("config serializes"));
    meta.insert("reference_ordering".into(), json!(reference.ordering.iter().map(|&c| child_id(c)).collect::<Vec<_>>()));
    meta.insert(
        "grouped".into(),
        Value::Object(reference.grouped.iter().map(|(&f, &g)| (format!("f{}", f + 1), json!(g))).collect()),
    );
    meta.insert(
        "ages".into(),
        Value::Object(ages.iter().enumerate().map(|(c, &a)| (child_id(ChildIx(c)), json!(a))).collect()),
    );

    let instance = Instance::from_doc(InstanceDoc { families: family_docs, daycares, meta })?;
    Ok(GeneratedMarket { instance, reference, ages })
}
