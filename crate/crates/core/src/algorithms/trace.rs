//! Execution traces.
//!
//! A trace is an ordered log of what a run did. Replaying it from the
//! all-dummy matching reproduces every intermediate matching: a `Segment`
//! resets the matching, `InitialMatching` installs the deferred-acceptance
//! result for single-child families, and each `Accepted` event moves the
//! displaced children to the dummy and seats the proposing family, as one
//! atomic step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChildIx, DaycareIx, FamilyIx, Instance, Matching};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement<C, D> {
    pub child: C,
    pub daycare: D,
}

/// `child` lost its seat at `daycare` to `by`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Displacement<C, D> {
    pub child: C,
    pub daycare: D,
    pub by: C,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event<C, D, F> {
    /// A pass under a new order of the sibling families. Resets the matching.
    Segment { permutation: Vec<F> },
    /// Deferred acceptance over the single-child families.
    InitialMatching { placements: Vec<Placement<C, D>> },
    /// Start of the insertion of a sibling family.
    Insert { family: F },
    Rejected { family: F, tuple_index: usize },
    Accepted {
        family: F,
        tuple_index: usize,
        placements: Vec<Placement<C, D>>,
        displaced: Vec<Displacement<C, D>>,
    },
    /// The family ran out of tuples and stays unmatched.
    Exhausted { family: F },
    /// A sibling family lost a child while `family` was being inserted.
    Restart { family: F, evicted: C, evicted_family: F, permutation: Vec<F>, repeated: bool },
    /// Sequential couples: an application reached a daycare some sibling had applied to.
    Clash { child: C, daycare: D },
    /// The inserted family can reach a better tuple by passing seats between siblings.
    Improvement { family: F, tuple_index: usize },
    Success,
}

pub type TraceEvent = Event<ChildIx, DaycareIx, FamilyIx>;

impl<C, D, F> Event<C, D, F> {
    /// Rewrites every id in the event.
    pub fn try_map<C2, D2, F2, E>(
        self,
        fc: &mut impl FnMut(C) -> Result<C2, E>,
        fd: &mut impl FnMut(D) -> Result<D2, E>,
        ff: &mut impl FnMut(F) -> Result<F2, E>,
    ) -> Result<Event<C2, D2, F2>, E> {
        Ok(match self {
            Event::Segment { permutation } => {
                Event::Segment { permutation: permutation.into_iter().map(&mut *ff).collect::<Result<_, _>>()? }
            }
            Event::InitialMatching { placements: ps } => Event::InitialMatching { placements: map_placements(ps, fc, fd)? },
            Event::Insert { family } => Event::Insert { family: ff(family)? },
            Event::Rejected { family, tuple_index } => Event::Rejected { family: ff(family)?, tuple_index },
            Event::Accepted { family, tuple_index, placements: ps, displaced } => {
                let ps = map_placements(ps, fc, fd)?;
                let displaced = displaced
                    .into_iter()
                    .map(|x| Ok(Displacement { child: fc(x.child)?, daycare: fd(x.daycare)?, by: fc(x.by)? }))
                    .collect::<Result<_, E>>()?;
                Event::Accepted { family: ff(family)?, tuple_index, placements: ps, displaced }
            }
            Event::Exhausted { family } => Event::Exhausted { family: ff(family)? },
            Event::Restart { family, evicted, evicted_family, permutation, repeated } => Event::Restart {
                family: ff(family)?,
                evicted: fc(evicted)?,
                evicted_family: ff(evicted_family)?,
                permutation: permutation.into_iter().map(&mut *ff).collect::<Result<_, _>>()?,
                repeated,
            },
            Event::Clash { child, daycare } => Event::Clash { child: fc(child)?, daycare: fd(daycare)? },
            Event::Improvement { family, tuple_index } => Event::Improvement { family: ff(family)?, tuple_index },
            Event::Success => Event::Success,
        })
    }
}

fn map_placements<C, D, C2, D2, E>(
    ps: Vec<Placement<C, D>>,
    fc: &mut impl FnMut(C) -> Result<C2, E>,
    fd: &mut impl FnMut(D) -> Result<D2, E>,
) -> Result<Vec<Placement<C2, D2>>, E> {
    ps.into_iter().map(|p| Ok(Placement { child: fc(p.child)?, daycare: fd(p.daycare)? })).collect()
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: unknown id {id:?}")]
    UnknownId { line: usize, id: String },
    #[error("malformed trace: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    /// One JSON object per line, ids written as strings.
    pub fn to_json_lines(&self, inst: &Instance) -> String {
        let mut out = String::new();
        for ev in &self.events {
            let named: Event<&str, &str, &str> = ev
                .clone()
                .try_map::<_, _, _, std::convert::Infallible>(
                    &mut |c| Ok(inst.child(c).id.as_str()),
                    &mut |d| Ok(inst.daycare(d).id.as_str()),
                    &mut |f| Ok(inst.family(f).id.as_str()),
                )
                .unwrap();
            out.push_str(&serde_json::to_string(&named).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(inst: &Instance, text: &str) -> Result<ExecutionTrace, TraceError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let named: Event<String, String, String> =
                serde_json::from_str(line).map_err(|source| TraceError::Parse { line: line_no, source })?;
            let unknown = |id: String| TraceError::UnknownId { line: line_no, id };
            let ev = named.try_map(
                &mut |c| inst.child_ix(&c).ok_or_else(|| unknown(c)),
                &mut |d| inst.daycare_ix(&d).ok_or_else(|| unknown(d)),
                &mut |f| inst.family_ix(&f).ok_or_else(|| unknown(f)),
            )?;
            events.push(ev);
        }
        Ok(ExecutionTrace { events })
    }

    /// Permutations tried, in order (one per segment).
    pub fn permutations(&self) -> Vec<Vec<FamilyIx>> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Segment { permutation } => Some(permutation.clone()),
                _ => None,
            })
            .collect()
    }

    /// Replays the trace and returns the matching after its last event.
    pub fn replay(&self, inst: &Instance) -> Matching {
        let mut m = Matching::unmatched(inst);
        for ev in &self.events {
            apply_event(inst, &mut m, ev);
        }
        m
    }
}

/// Applies one event to a matching being replayed.
pub fn apply_event(inst: &Instance, m: &mut Matching, ev: &TraceEvent) {
    match ev {
        Event::Segment { .. } => *m = Matching::unmatched(inst),
        Event::InitialMatching { placements } => {
            for p in placements {
                m.assign(p.child, p.daycare);
            }
        }
        Event::Accepted { placements, displaced, .. } => {
            for x in displaced {
                m.assign(x.child, inst.dummy());
            }
            for p in placements {
                m.assign(p.child, p.daycare);
            }
        }
        _ => {}
    }
}

/// A sequence of displacements `children[0] → children[1] → …`, where each
/// child pushed the next one out of `daycares[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectionChain {
    /// The sibling family whose insertion started the chain.
    pub inserted: Option<FamilyIx>,
    /// Index of the segment (permutation pass) the chain belongs to.
    pub segment: usize,
    pub children: Vec<ChildIx>,
    pub daycares: Vec<DaycareIx>,
}

/// Rebuilds displacement chains. Chains are scoped to one insertion: each
/// proposal of the inserted family that displaces somebody starts a chain,
/// and a displaced child that in turn displaces someone extends it.
pub fn rejection_chains(events: &[TraceEvent]) -> Vec<RejectionChain> {
    let mut chains: Vec<RejectionChain> = Vec::new();
    let mut active: HashMap<ChildIx, usize> = HashMap::new();
    let mut inserted = None;
    let mut segment = 0usize;
    let mut seen_segment = false;
    for ev in events {
        match ev {
            Event::Segment { .. } => {
                if seen_segment {
                    segment += 1;
                }
                seen_segment = true;
                inserted = None;
                active.clear();
            }
            Event::Insert { family } => {
                inserted = Some(*family);
                active.clear();
            }
            Event::Accepted { displaced, .. } => {
                for x in displaced {
                    let id = match active.remove(&x.by) {
                        Some(id) => id,
                        None => {
                            chains.push(RejectionChain {
                                inserted,
                                segment,
                                children: vec![x.by],
                                daycares: Vec::new(),
                            });
                            chains.len() - 1
                        }
                    };
                    chains[id].children.push(x.child);
                    chains[id].daycares.push(x.daycare);
                    active.insert(x.child, id);
                }
            }
            _ => {}
        }
    }
    chains
}
