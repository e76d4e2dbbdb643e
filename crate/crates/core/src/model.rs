//! Market model: children, families with joint preferences over daycare
//! tuples, daycares with quotas and strict priorities, and matchings.
//!
//! Ids are strings in the serialized form. Once an [`Instance`] is loaded
//! everything is addressed by dense indices ([`ChildIx`], [`FamilyIx`],
//! [`DaycareIx`]), which is what the algorithms operate on.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Id of the dummy daycare. Being assigned to it means being unmatched.
pub const DUMMY_ID: &str = "d0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChildIx(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyIx(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DaycareIx(pub usize);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: duplicate id {id:?}")]
    DuplicateId { path: String, id: String },
    #[error("{path}: unknown id {id:?}")]
    DanglingReference { path: String, id: String },
    #[error("daycares: the dummy daycare \"d0\" is missing")]
    MissingDummy,
    #[error("{path}: the dummy daycare must have an unlimited (null) quota")]
    DummyQuota { path: String },
    #[error("{path}: only \"d0\" may have an unlimited quota")]
    UnlimitedQuota { path: String },
    #[error("{path}: a family needs at least one child")]
    EmptyFamily { path: String },
    #[error("{path}: tuple has {found} entries but the family has {expected} children")]
    TupleArity { path: String, expected: usize, found: usize },
    #[error("{path}: tuple is listed twice")]
    DuplicateTuple { path: String },
    #[error("{path}: the all-\"d0\" tuple cannot be listed")]
    AllDummyTuple { path: String },
}

/// Capacity of a daycare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quota {
    Limited(usize),
    Unlimited,
}

impl Quota {
    pub fn admits(self, count: usize) -> bool {
        match self {
            Quota::Limited(q) => count <= q,
            Quota::Unlimited => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Child {
    pub id: String,
    pub family: FamilyIx,
    /// Position of the child in its family's sibling order.
    pub sibling_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub id: String,
    /// Children in the family's predefined sibling order.
    pub children: Vec<ChildIx>,
    /// Joint preferences, best first. Entry `i` of a tuple is the daycare
    /// for `children[i]`.
    pub preferences: Vec<Vec<DaycareIx>>,
}

impl Family {
    pub fn is_singleton(&self) -> bool {
        self.children.len() == 1
    }

    /// Where `tuple` sits in this family's preference order.
    pub fn standing(&self, tuple: &[DaycareIx], dummy: DaycareIx) -> Standing {
        if tuple.iter().all(|&d| d == dummy) {
            return Standing::Unmatched;
        }
        match self.preferences.iter().position(|t| t.as_slice() == tuple) {
            Some(j) => Standing::Listed(j),
            None => Standing::Unlisted,
        }
    }
}

/// A family's view of one of its possible assignments.
///
/// Listed tuples beat being unmatched, which beats any unlisted tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Standing {
    Listed(usize),
    Unmatched,
    Unlisted,
}

impl Standing {
    /// Whether the listed tuple with index `j` is strictly better than this.
    pub fn is_improved_by(self, j: usize) -> bool {
        match self {
            Standing::Listed(p) => j < p,
            Standing::Unmatched | Standing::Unlisted => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Daycare {
    pub id: String,
    pub quota: Quota,
    /// Acceptable children, highest priority first. Empty for the dummy,
    /// which accepts everybody.
    pub priority: Vec<ChildIx>,
    rank: Vec<u32>,
    is_dummy: bool,
}

const UNRANKED: u32 = u32::MAX;

impl Daycare {
    pub fn is_dummy(&self) -> bool {
        self.is_dummy
    }

    /// Zero-based priority rank of `c`, `None` if `c` is unacceptable.
    /// Every child is acceptable to the dummy and shares rank 0 there.
    pub fn rank_of(&self, c: ChildIx) -> Option<u32> {
        if self.is_dummy {
            return Some(0);
        }
        match self.rank[c.0] {
            UNRANKED => None,
            r => Some(r),
        }
    }

    pub fn accepts(&self, c: ChildIx) -> bool {
        self.rank_of(c).is_some()
    }
}

/// A validated daycare market.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    children: Vec<Child>,
    families: Vec<Family>,
    daycares: Vec<Daycare>,
    dummy: DaycareIx,
    meta: BTreeMap<String, Value>,
    child_lookup: HashMap<String, ChildIx>,
    family_lookup: HashMap<String, FamilyIx>,
    daycare_lookup: HashMap<String, DaycareIx>,
}

// Serialized form.

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub families: Vec<FamilyDoc>,
    pub daycares: Vec<DaycareDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub id: String,
    pub children: Vec<String>,
    pub preferences: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DaycareDoc {
    pub id: String,
    pub quota: Option<usize>,
    #[serde(default)]
    pub priority: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatchingDoc {
    pub assignment: BTreeMap<String, String>,
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ModelError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| ModelError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Parses and validates a serialized instance.
pub fn load_instance(bytes: &[u8]) -> Result<Instance, ModelError> {
    Instance::from_doc(parse_json(bytes)?)
}

impl Instance {
    pub fn from_doc(doc: InstanceDoc) -> Result<Instance, ModelError> {
        let mut children = Vec::new();
        let mut child_lookup = HashMap::new();
        let mut family_lookup = HashMap::new();
        for (fi, fam) in doc.families.iter().enumerate() {
            let path = format!("families[{fi}]");
            if family_lookup.insert(fam.id.clone(), FamilyIx(fi)).is_some() {
                return Err(ModelError::DuplicateId { path: format!("{path}.id"), id: fam.id.clone() });
            }
            if fam.children.is_empty() {
                return Err(ModelError::EmptyFamily { path: format!("{path}.children") });
            }
            for (si, cid) in fam.children.iter().enumerate() {
                let ix = ChildIx(children.len());
                if child_lookup.insert(cid.clone(), ix).is_some() {
                    return Err(ModelError::DuplicateId {
                        path: format!("{path}.children[{si}]"),
                        id: cid.clone(),
                    });
                }
                children.push(Child { id: cid.clone(), family: FamilyIx(fi), sibling_index: si });
            }
        }

        let n = children.len();
        let mut daycare_lookup = HashMap::new();
        let mut daycares = Vec::with_capacity(doc.daycares.len());
        let mut dummy = None;
        for (di, dc) in doc.daycares.iter().enumerate() {
            let path = format!("daycares[{di}]");
            if daycare_lookup.insert(dc.id.clone(), DaycareIx(di)).is_some() {
                return Err(ModelError::DuplicateId { path: format!("{path}.id"), id: dc.id.clone() });
            }
            let is_dummy = dc.id == DUMMY_ID;
            let quota = match (dc.quota, is_dummy) {
                (None, true) => Quota::Unlimited,
                (Some(_), true) => return Err(ModelError::DummyQuota { path: format!("{path}.quota") }),
                (None, false) => return Err(ModelError::UnlimitedQuota { path: format!("{path}.quota") }),
                (Some(q), false) => Quota::Limited(q),
            };
            if is_dummy {
                dummy = Some(DaycareIx(di));
            }
            let mut rank = if is_dummy { Vec::new() } else { vec![UNRANKED; n] };
            let mut priority = Vec::with_capacity(dc.priority.len());
            for (pi, cid) in dc.priority.iter().enumerate() {
                let ppath = format!("{path}.priority[{pi}]");
                let c = *child_lookup
                    .get(cid)
                    .ok_or_else(|| ModelError::DanglingReference { path: ppath.clone(), id: cid.clone() })?;
                if is_dummy {
                    continue;
                }
                if rank[c.0] != UNRANKED {
                    return Err(ModelError::DuplicateId { path: ppath, id: cid.clone() });
                }
                rank[c.0] = priority.len() as u32;
                priority.push(c);
            }
            daycares.push(Daycare { id: dc.id.clone(), quota, priority, rank, is_dummy });
        }
        let dummy = dummy.ok_or(ModelError::MissingDummy)?;

        let mut families = Vec::with_capacity(doc.families.len());
        for (fi, fam) in doc.families.iter().enumerate() {
            let k = fam.children.len();
            let mut seen = HashSet::new();
            let mut preferences = Vec::with_capacity(fam.preferences.len());
            for (ti, tuple) in fam.preferences.iter().enumerate() {
                let path = format!("families[{fi}].preferences[{ti}]");
                if tuple.len() != k {
                    return Err(ModelError::TupleArity { path, expected: k, found: tuple.len() });
                }
                let mut resolved = Vec::with_capacity(k);
                for (pos, did) in tuple.iter().enumerate() {
                    let d = *daycare_lookup.get(did).ok_or_else(|| ModelError::DanglingReference {
                        path: format!("{path}[{pos}]"),
                        id: did.clone(),
                    })?;
                    resolved.push(d);
                }
                if resolved.iter().all(|&d| d == dummy) {
                    return Err(ModelError::AllDummyTuple { path });
                }
                if !seen.insert(resolved.clone()) {
                    return Err(ModelError::DuplicateTuple { path });
                }
                preferences.push(resolved);
            }
            let kids = fam.children.iter().map(|c| child_lookup[c]).collect();
            families.push(Family { id: fam.id.clone(), children: kids, preferences });
        }

        Ok(Instance {
            children,
            families,
            daycares,
            dummy,
            meta: doc.meta,
            child_lookup,
            family_lookup,
            daycare_lookup,
        })
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            families: self
                .families
                .iter()
                .map(|f| FamilyDoc {
                    id: f.id.clone(),
                    children: f.children.iter().map(|&c| self.child(c).id.clone()).collect(),
                    preferences: f
                        .preferences
                        .iter()
                        .map(|t| t.iter().map(|&d| self.daycare(d).id.clone()).collect())
                        .collect(),
                })
                .collect(),
            daycares: self
                .daycares
                .iter()
                .map(|d| DaycareDoc {
                    id: d.id.clone(),
                    quota: match d.quota {
                        Quota::Limited(q) => Some(q),
                        Quota::Unlimited => None,
                    },
                    priority: d.priority.iter().map(|&c| self.child(c).id.clone()).collect(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub fn children(&self) -> &[Child] {
        &self.children
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn daycares(&self) -> &[Daycare] {
        &self.daycares
    }

    pub fn meta(&self) -> &BTreeMap<String, Value> {
        &self.meta
    }

    pub fn child(&self, c: ChildIx) -> &Child {
        &self.children[c.0]
    }

    pub fn family(&self, f: FamilyIx) -> &Family {
        &self.families[f.0]
    }

    pub fn daycare(&self, d: DaycareIx) -> &Daycare {
        &self.daycares[d.0]
    }

    pub fn family_of(&self, c: ChildIx) -> FamilyIx {
        self.children[c.0].family
    }

    pub fn dummy(&self) -> DaycareIx {
        self.dummy
    }

    pub fn num_children(&self) -> usize {
        self.children.len()
    }

    pub fn child_ix(&self, id: &str) -> Option<ChildIx> {
        self.child_lookup.get(id).copied()
    }

    pub fn family_ix(&self, id: &str) -> Option<FamilyIx> {
        self.family_lookup.get(id).copied()
    }

    pub fn daycare_ix(&self, id: &str) -> Option<DaycareIx> {
        self.daycare_lookup.get(id).copied()
    }

    pub fn family_ixs(&self) -> impl Iterator<Item = FamilyIx> {
        (0..self.families.len()).map(FamilyIx)
    }

    /// Families with exactly one child (F^O), in instance order.
    pub fn singleton_families(&self) -> Vec<FamilyIx> {
        self.family_ixs().filter(|&f| self.family(f).is_singleton()).collect()
    }

    /// Families with siblings (F^S), in instance order.
    pub fn sibling_families(&self) -> Vec<FamilyIx> {
        self.family_ixs().filter(|&f| !self.family(f).is_singleton()).collect()
    }

    pub fn has_siblings(&self, c: ChildIx) -> bool {
        !self.family(self.family_of(c)).is_singleton()
    }
}

/// A total assignment of children to daycares, unmatched children sitting
/// at the dummy. Rosters are kept in step with the assignment.
#[derive(Clone, Debug)]
pub struct Matching {
    assignment: Vec<DaycareIx>,
    rosters: Vec<Vec<ChildIx>>,
    slot: Vec<usize>,
}

impl PartialEq for Matching {
    fn eq(&self, other: &Self) -> bool {
        self.assignment == other.assignment
    }
}

impl Eq for Matching {}

impl Matching {
    /// The matching that leaves every child at the dummy daycare.
    pub fn unmatched(inst: &Instance) -> Matching {
        let n = inst.num_children();
        let mut rosters = vec![Vec::new(); inst.daycares().len()];
        rosters[inst.dummy().0] = (0..n).map(ChildIx).collect();
        Matching { assignment: vec![inst.dummy(); n], rosters, slot: (0..n).collect() }
    }

    /// Builds a matching from `(child id, daycare id)` pairs; children not
    /// mentioned stay unmatched.
    pub fn from_pairs<'a>(
        inst: &Instance,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Matching, ModelError> {
        let mut m = Matching::unmatched(inst);
        for (c, d) in pairs {
            let ci = inst
                .child_ix(c)
                .ok_or_else(|| ModelError::DanglingReference { path: "assignment".into(), id: c.into() })?;
            let di = inst.daycare_ix(d).ok_or_else(|| ModelError::DanglingReference {
                path: format!("assignment.{c}"),
                id: d.into(),
            })?;
            m.assign(ci, di);
        }
        Ok(m)
    }

    pub fn from_doc(inst: &Instance, doc: &MatchingDoc) -> Result<Matching, ModelError> {
        Matching::from_pairs(inst, doc.assignment.iter().map(|(c, d)| (c.as_str(), d.as_str())))
    }

    pub fn load(inst: &Instance, bytes: &[u8]) -> Result<Matching, ModelError> {
        Matching::from_doc(inst, &parse_json(bytes)?)
    }

    pub fn to_doc(&self, inst: &Instance) -> MatchingDoc {
        MatchingDoc {
            assignment: self
                .assignment
                .iter()
                .enumerate()
                .map(|(c, &d)| (inst.child(ChildIx(c)).id.clone(), inst.daycare(d).id.clone()))
                .collect(),
        }
    }

    pub fn daycare_of(&self, c: ChildIx) -> DaycareIx {
        self.assignment[c.0]
    }

    pub fn assignment(&self) -> &[DaycareIx] {
        &self.assignment
    }

    pub fn roster(&self, d: DaycareIx) -> &[ChildIx] {
        &self.rosters[d.0]
    }

    /// Moves `c` to `d`. O(1).
    pub fn assign(&mut self, c: ChildIx, d: DaycareIx) {
        let old = self.assignment[c.0];
        if old == d {
            return;
        }
        let at = self.slot[c.0];
        let roster = &mut self.rosters[old.0];
        roster.swap_remove(at);
        if let Some(&moved) = roster.get(at) {
            self.slot[moved.0] = at;
        }
        self.slot[c.0] = self.rosters[d.0].len();
        self.rosters[d.0].push(c);
        self.assignment[c.0] = d;
    }

    /// μ(f): the family's daycares in sibling order.
    pub fn family_assignment(&self, f: &Family) -> Vec<DaycareIx> {
        f.children.iter().map(|&c| self.daycare_of(c)).collect()
    }
}

/// Every daycare's roster fits within its quota.
pub fn is_feasible(inst: &Instance, m: &Matching) -> bool {
    inst.daycares().iter().enumerate().all(|(d, dc)| dc.quota.admits(m.roster(DaycareIx(d)).len()))
}

/// Each family holds a listed tuple or nothing, and no daycare hosts a
/// child it finds unacceptable.
pub fn is_individually_rational(inst: &Instance, m: &Matching) -> bool {
    let families_ok = inst.families().iter().all(|f| {
        !matches!(f.standing(&m.family_assignment(f), inst.dummy()), Standing::Unlisted)
    });
    families_ok
        && inst
            .daycares()
            .iter()
            .enumerate()
            .all(|(d, dc)| m.roster(DaycareIx(d)).iter().all(|&c| dc.accepts(c)))
}

impl fmt::Display for ChildIx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "child#{}", self.0)
    }
}
