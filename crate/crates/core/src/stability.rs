//! Daycare choice and the two blocking-coalition notions.
//!
//! Both notions ask whether a family can get a tuple it strictly prefers,
//! with every daycare in the tuple choosing all of the family's applicants.
//! They differ only in what the daycare chooses from:
//!
//! * [`StabilityMode::Ours`]: the family's own children currently seated
//!   at `d` give up their seats first, `Ch_d((μ(d) \ C_f) ∪ A)`.
//! * [`StabilityMode::Abh`]: the current roster stays put, `Ch_d(μ(d) ∪ A)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{
    is_feasible, is_individually_rational, ChildIx, Daycare, DaycareIx, FamilyIx, Instance, Matching, Quota,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityMode {
    Ours,
    Abh,
}

impl std::str::FromStr for StabilityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ours" => Ok(StabilityMode::Ours),
            "abh" => Ok(StabilityMode::Abh),
            other => Err(format!("unknown stability mode {other:?} (expected ours|abh)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StabilityError {
    #[error("matching exceeds a daycare quota")]
    Infeasible,
    #[error("matching is not individually rational")]
    NotIndividuallyRational,
}

/// Greedy choice: acceptable applicants in priority order, up to quota.
/// Duplicates in `applicants` are ignored.
pub fn choice(daycare: &Daycare, applicants: impl IntoIterator<Item = ChildIx>) -> Vec<ChildIx> {
    let mut ranked: Vec<(u32, ChildIx)> =
        applicants.into_iter().filter_map(|c| daycare.rank_of(c).map(|r| (r, c))).collect();
    ranked.sort_unstable();
    ranked.dedup();
    let take = match daycare.quota {
        Quota::Limited(q) => q,
        Quota::Unlimited => ranked.len(),
    };
    ranked.into_iter().take(take).map(|(_, c)| c).collect()
}

/// The children of family `f` grouped by the daycare tuple `j` sends them to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApplicationSlice {
    pub family: FamilyIx,
    pub tuple_index: usize,
    pub applicants: BTreeMap<DaycareIx, Vec<ChildIx>>,
}

pub fn application_slice(inst: &Instance, f: FamilyIx, j: usize) -> ApplicationSlice {
    let fam = inst.family(f);
    let mut applicants: BTreeMap<DaycareIx, Vec<ChildIx>> = BTreeMap::new();
    for (&c, &d) in fam.children.iter().zip(&fam.preferences[j]) {
        applicants.entry(d).or_default().push(c);
    }
    ApplicationSlice { family: f, tuple_index: j, applicants }
}

/// A family and a tuple it strictly prefers that every daycare of the tuple
/// would grant. `accepted` holds the chosen set at each non-dummy daycare.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockingCoalition {
    pub family: FamilyIx,
    pub tuple_index: usize,
    pub accepted: BTreeMap<DaycareIx, Vec<ChildIx>>,
}

impl BlockingCoalition {
    pub fn to_json(&self, inst: &Instance) -> Value {
        let fam = inst.family(self.family);
        let accepted: serde_json::Map<String, Value> = self
            .accepted
            .iter()
            .map(|(&d, cs)| {
                let ids: Vec<&str> = cs.iter().map(|&c| inst.child(c).id.as_str()).collect();
                (inst.daycare(d).id.clone(), json!(ids))
            })
            .collect();
        let tuple: Vec<&str> =
            fam.preferences[self.tuple_index].iter().map(|&d| inst.daycare(d).id.as_str()).collect();
        json!({
            "family": fam.id,
            "tuple_index": self.tuple_index,
            "tuple": tuple,
            "accepted": accepted,
        })
    }
}

/// Condition 2 for tuple `j` of family `f`: every non-dummy daycare in the
/// tuple chooses all of the family's applicants to it. Returns the chosen
/// sets when it holds.
pub fn tuple_granted(
    inst: &Instance,
    m: &Matching,
    f: FamilyIx,
    j: usize,
    mode: StabilityMode,
) -> Option<BTreeMap<DaycareIx, Vec<ChildIx>>> {
    let slice = application_slice(inst, f, j);
    let mut accepted = BTreeMap::new();
    for (&d, applying) in &slice.applicants {
        let dc = inst.daycare(d);
        if dc.is_dummy() {
            continue;
        }
        let current = m.roster(d).iter().copied();
        let chosen = match mode {
            StabilityMode::Ours => {
                choice(dc, current.filter(|&c| inst.family_of(c) != f).chain(applying.iter().copied()))
            }
            StabilityMode::Abh => choice(dc, current.chain(applying.iter().copied())),
        };
        if !applying.iter().all(|c| chosen.contains(c)) {
            return None;
        }
        accepted.insert(d, chosen);
    }
    Some(accepted)
}

/// First tuple (in preference order) that lets `f` block `m`.
pub fn blocking_tuple(inst: &Instance, m: &Matching, f: FamilyIx, mode: StabilityMode) -> Option<BlockingCoalition> {
    let fam = inst.family(f);
    let standing = fam.standing(&m.family_assignment(fam), inst.dummy());
    (0..fam.preferences.len())
        .take_while(|&j| standing.is_improved_by(j))
        .find_map(|j| {
            tuple_granted(inst, m, f, j, mode).map(|accepted| BlockingCoalition { family: f, tuple_index: j, accepted })
        })
}

/// Scans families in instance order and tuples in preference order and
/// returns the first blocking coalition, if any.
pub fn find_blocking_coalition(
    inst: &Instance,
    m: &Matching,
    mode: StabilityMode,
) -> Result<Option<BlockingCoalition>, StabilityError> {
    if !is_feasible(inst, m) {
        return Err(StabilityError::Infeasible);
    }
    if !is_individually_rational(inst, m) {
        return Err(StabilityError::NotIndividuallyRational);
    }
    Ok(inst.family_ixs().find_map(|f| blocking_tuple(inst, m, f, mode)))
}

/// Feasible, individually rational and free of blocking coalitions.
pub fn is_stable(inst: &Instance, m: &Matching, mode: StabilityMode) -> bool {
    matches!(find_blocking_coalition(inst, m, mode), Ok(None))
}
