#![allow(dead_code)]

use std::path::PathBuf;

use daycare_core::model::{load_instance, ChildIx, DaycareIx, FamilyIx, Instance, Matching};

pub fn fixture(name: &str) -> Instance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.json"));
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_instance(&bytes).unwrap()
}

pub fn matching(inst: &Instance, pairs: &[(&str, &str)]) -> Matching {
    Matching::from_pairs(inst, pairs.iter().copied()).unwrap()
}

pub fn child_ids(inst: &Instance, cs: &[ChildIx]) -> Vec<String> {
    cs.iter().map(|&c| inst.child(c).id.clone()).collect()
}

pub fn family_ids(inst: &Instance, fs: &[FamilyIx]) -> Vec<String> {
    fs.iter().map(|&f| inst.family(f).id.clone()).collect()
}

pub fn tuple_ids(inst: &Instance, ds: &[DaycareIx]) -> Vec<String> {
    ds.iter().map(|&d| inst.daycare(d).id.clone()).collect()
}

pub fn assigned(inst: &Instance, m: &Matching, family: &str) -> Vec<String> {
    let f = inst.family(inst.family_ix(family).unwrap());
    tuple_ids(inst, &m.family_assignment(f))
}

use daycare_core::model::{DaycareDoc, FamilyDoc, InstanceDoc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small arbitrary market: up to `max_children` children in families of
/// one to three, a handful of daycares with quotas 0..=2, partial priorities.
pub fn random_instance(seed: u64, max_children: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_children);
    let mut families = Vec::new();
    let mut next = 1;
    while next <= n {
        let k = rng.random_range(1..=3).min(n + 1 - next);
        families.push((next..next + k).map(|c| format!("c{c}")).collect::<Vec<_>>());
        next += k;
    }
    let m = rng.random_range(1..=4);
    let names: Vec<String> = (1..=m).map(|d| format!("d{d}")).collect();
    let mut daycares: Vec<DaycareDoc> = names
        .iter()
        .map(|id| {
            let mut priority: Vec<String> = (1..=n).map(|c| format!("c{c}")).filter(|_| rng.random_bool(0.85)).collect();
            priority.shuffle(&mut rng);
            DaycareDoc { id: id.clone(), quota: Some(rng.random_range(0..=2)), priority }
        })
        .collect();
    daycares.push(DaycareDoc { id: "d0".into(), quota: None, priority: vec![] });
    let mut options = names.clone();
    options.push("d0".into());
    let family_docs = families
        .into_iter()
        .enumerate()
        .map(|(i, children)| {
            let mut prefs: Vec<Vec<String>> = Vec::new();
            for _ in 0..rng.random_range(0..=4) {
                let t: Vec<String> = children.iter().map(|_| options.choose(&mut rng).unwrap().clone()).collect();
                if t.iter().all(|d| d == "d0") || prefs.contains(&t) {
                    continue;
                }
                prefs.push(t);
            }
            FamilyDoc { id: format!("f{}", i + 1), children, preferences: prefs }
        })
        .collect();
    Instance::from_doc(InstanceDoc { families: family_docs, daycares, meta: Default::default() }).unwrap()
}

/// Greedily gives each family (random order) a random listed tuple that
/// still fits, or leaves it unmatched. Always feasible and IR.
pub fn random_feasible_ir(inst: &Instance, seed: u64) -> Matching {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matching::unmatched(inst);
    let mut order: Vec<FamilyIx> = inst.family_ixs().collect();
    order.shuffle(&mut rng);
    for f in order {
        let fam = inst.family(f);
        let mut prefs: Vec<&Vec<DaycareIx>> = fam.preferences.iter().collect();
        prefs.shuffle(&mut rng);
        for t in prefs {
            let fits = fam.children.iter().zip(t.iter()).all(|(&c, &d)| {
                let dc = inst.daycare(d);
                let extra = t.iter().filter(|&&e| e == d).count();
                dc.accepts(c) && dc.quota.admits(m.roster(d).len() + extra)
            });
            if fits && rng.random_bool(0.8) {
                for (&c, &d) in fam.children.iter().zip(t.iter()) {
                    m.assign(c, d);
                }
                break;
            }
        }
    }
    m
}
