//! Structure of reference orderings and execution traces.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::algorithms::trace::{rejection_chains, Event, ExecutionTrace, RejectionChain};
use crate::model::{ChildIx, DaycareIx, FamilyIx, Instance, Matching, Quota};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagnosticsError {
    #[error("{0} does not appear in the ordering")]
    MissingChild(ChildIx),
    #[error("reference ordering in instance metadata is unreadable: {0}")]
    BadReference(String),
}

/// Positions of children in an ordering, best first.
pub struct OrderingIndex {
    pos: HashMap<ChildIx, usize>,
}

impl OrderingIndex {
    pub fn new(ordering: &[ChildIx]) -> Self {
        OrderingIndex { pos: ordering.iter().enumerate().map(|(i, &c)| (c, i)).collect() }
    }

    fn span(&self, kids: &[ChildIx]) -> Result<(usize, usize), DiagnosticsError> {
        let mut best = usize::MAX;
        let mut worst = 0;
        for &c in kids {
            let &p = self.pos.get(&c).ok_or(DiagnosticsError::MissingChild(c))?;
            best = best.min(p);
            worst = worst.max(p);
        }
        Ok((best, worst))
    }

    pub fn dominates(&self, f: &[ChildIx], g: &[ChildIx]) -> Result<bool, DiagnosticsError> {
        Ok(self.span(f)?.0 < self.span(g)?.1)
    }

    pub fn top_dominates(&self, f: &[ChildIx], g: &[ChildIx]) -> Result<bool, DiagnosticsError> {
        Ok(self.span(f)?.0 < self.span(g)?.0)
    }

    pub fn diameter(&self, f: &[ChildIx]) -> Result<usize, DiagnosticsError> {
        let (best, worst) = self.span(f)?;
        Ok(worst - best + 1)
    }
}

/// True iff the best child of `f` is ranked above the worst child of `g`.
pub fn dominates(ordering: &[ChildIx], f: &[ChildIx], g: &[ChildIx]) -> Result<bool, DiagnosticsError> {
    OrderingIndex::new(ordering).dominates(f, g)
}

pub fn top_dominates(ordering: &[ChildIx], f: &[ChildIx], g: &[ChildIx]) -> Result<bool, DiagnosticsError> {
    OrderingIndex::new(ordering).top_dominates(f, g)
}

pub fn diameter(ordering: &[ChildIx], f: &[ChildIx]) -> Result<usize, DiagnosticsError> {
    OrderingIndex::new(ordering).diameter(f)
}

/// Index pairs `(i, j)`, `i < j`, of families that dominate each other.
/// Families with a single child are ignored.
pub fn nesting_pairs(ordering: &[ChildIx], families: &[&[ChildIx]]) -> Result<Vec<(usize, usize)>, DiagnosticsError> {
    let idx = OrderingIndex::new(ordering);
    let spans = families
        .iter()
        .map(|f| if f.len() > 1 { idx.span(f).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            if let (Some(a), Some(b)) = (spans[i], spans[j]) {
                if a.0 < b.1 && b.0 < a.1 {
                    out.push((i, j));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainInfo {
    pub chain: RejectionChain,
    /// Returns to its first child after visiting someone else.
    pub child_cycle: bool,
    /// Starts and ends in the same family after visiting someone else.
    pub family_cycle: bool,
    /// Families of the chain's children, first-appearance order.
    pub touched_families: Vec<FamilyIx>,
}

impl ChainInfo {
    pub fn len(&self) -> usize {
        self.chain.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.children.is_empty()
    }
}

pub fn extract_chains(inst: &Instance, trace: &ExecutionTrace) -> Vec<ChainInfo> {
    rejection_chains(&trace.events)
        .into_iter()
        .map(|chain| {
            let kids = &chain.children;
            let (first, last) = (kids[0], kids[kids.len() - 1]);
            let detour = kids.iter().any(|&c| c != first);
            let mut touched = Vec::new();
            for &c in kids {
                let f = inst.family_of(c);
                if !touched.contains(&f) {
                    touched.push(f);
                }
            }
            ChainInfo {
                child_cycle: kids.len() > 1 && first == last && detour,
                family_cycle: kids.len() > 1 && inst.family_of(first) == inst.family_of(last) && detour,
                touched_families: touched,
                chain,
            }
        })
        .collect()
}

/// Priority rank (1 = best) of the weakest child at `d`, counting each
/// vacant seat as a child of rank `|C| + 1`. `None` for the dummy.
pub fn rank(inst: &Instance, m: &Matching, d: DaycareIx) -> Option<u32> {
    let dc = inst.daycare(d);
    let Quota::Limited(q) = dc.quota else { return None };
    let roster = m.roster(d);
    if roster.len() < q {
        return Some(inst.num_children() as u32 + 1);
    }
    Some(roster.iter().filter_map(|&c| dc.rank_of(c)).map(|r| r + 1).max().unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantViolation {
    pub segment: usize,
    pub event: usize,
    pub daycare: DaycareIx,
    pub before: u32,
    pub after: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TraceChecks {
    /// Roster shrank inside a segment before any sibling was evicted.
    pub roster_violations: Vec<InvariantViolation>,
    /// Rank rose inside a segment that still ended in success.
    pub rank_violations: Vec<InvariantViolation>,
    pub permutations_unique: bool,
}

impl TraceChecks {
    pub fn ok(&self) -> bool {
        self.roster_violations.is_empty() && self.rank_violations.is_empty() && self.permutations_unique
    }
}

fn evicts_sibling(inst: &Instance, ev: &Event<ChildIx, DaycareIx, FamilyIx>) -> bool {
    match ev {
        Event::Accepted { displaced, .. } => displaced.iter().any(|x| inst.has_siblings(x.child)),
        _ => false,
    }
}

/// Replays `trace` and checks the roster-size and rank invariants of each
/// permutation pass, plus uniqueness of the permutation history.
pub fn check_trace(inst: &Instance, trace: &ExecutionTrace) -> TraceChecks {
    let real: Vec<DaycareIx> =
        (0..inst.daycares().len()).map(DaycareIx).filter(|&d| !inst.daycare(d).is_dummy()).collect();
    let mut checks = TraceChecks::default();

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for (i, ev) in trace.events.iter().enumerate() {
        if matches!(ev, Event::Segment { .. }) {
            if let Some(last) = segments.last_mut() {
                last.1 = i;
            }
            segments.push((i, trace.events.len()));
        }
    }

    for (s, &(start, end)) in segments.iter().enumerate() {
        let mut m = Matching::unmatched(inst);
        let succeeded = matches!(trace.events[end - 1], Event::Success);
        let mut qualifying = true;
        let mut rank_rose = None;
        for i in start..end {
            let ev = &trace.events[i];
            if evicts_sibling(inst, ev) {
                qualifying = false;
            }
            let sizes: Vec<usize> = real.iter().map(|&d| m.roster(d).len()).collect();
            let ranks: Vec<Option<u32>> = real.iter().map(|&d| rank(inst, &m, d)).collect();
            crate::algorithms::trace::apply_event(inst, &mut m, ev);
            for (k, &d) in real.iter().enumerate() {
                let size = m.roster(d).len();
                if qualifying && size < sizes[k] {
                    checks.roster_violations.push(InvariantViolation {
                        segment: s,
                        event: i,
                        daycare: d,
                        before: sizes[k] as u32,
                        after: size as u32,
                    });
                }
                let (before, after) = (ranks[k].unwrap_or(0), rank(inst, &m, d).unwrap_or(0));
                if after > before && rank_rose.is_none() {
                    rank_rose = Some(InvariantViolation { segment: s, event: i, daycare: d, before, after });
                }
            }
        }
        if succeeded {
            checks.rank_violations.extend(rank_rose);
        }
    }

    let perms = trace.permutations();
    let mut seen = std::collections::HashSet::new();
    let distinct = perms.iter().all(|p| seen.insert(p.clone()));
    let terminal_ok = match trace.events.last() {
        Some(Event::Restart { permutation, repeated: true, .. }) => seen.contains(permutation),
        _ => true,
    };
    checks.permutations_unique = distinct && terminal_ok;
    checks
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub inserted: Option<String>,
    pub children: Vec<String>,
    pub daycares: Vec<String>,
    pub length: usize,
    pub child_cycle: bool,
    pub family_cycle: bool,
    pub touched_families: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: &'static str,
    pub failure: Option<&'static str>,
    pub permutations: usize,
    pub chains: Vec<ChainReport>,
    pub checks: TraceChecks,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub children: usize,
    pub families: usize,
    pub sibling_families: usize,
    /// Present only when the instance records its reference ordering.
    pub diameters: Option<BTreeMap<String, usize>>,
    pub nesting_pairs: Option<Vec<(String, String)>>,
    pub domination: Option<Vec<(String, String)>>,
    pub run: Option<RunReport>,
}

/// Reads the reference ordering stored by the market generator, if any.
pub fn reference_from_meta(inst: &Instance) -> Result<Option<Vec<ChildIx>>, DiagnosticsError> {
    let Some(v) = inst.meta().get("reference_ordering") else { return Ok(None) };
    let ids: Vec<String> =
        serde_json::from_value(v.clone()).map_err(|e| DiagnosticsError::BadReference(e.to_string()))?;
    ids.iter()
        .map(|id| inst.child_ix(id).ok_or_else(|| DiagnosticsError::BadReference(format!("unknown child {id}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn structure_report(
    inst: &Instance,
    reference: Option<&[ChildIx]>,
    trace: Option<&ExecutionTrace>,
) -> Result<StructureReport, DiagnosticsError> {
    let fid = |f: FamilyIx| inst.family(f).id.clone();
    let sib = inst.sibling_families();
    let (mut diameters, mut nesting, mut domination) = (None, None, None);
    if let Some(order) = reference {
        let idx = OrderingIndex::new(order);
        let kids: Vec<&[ChildIx]> = sib.iter().map(|&f| inst.family(f).children.as_slice()).collect();
        let mut diam = BTreeMap::new();
        for (&f, k) in sib.iter().zip(&kids) {
            diam.insert(fid(f), idx.diameter(k)?);
        }
        let mut dom = Vec::new();
        for (i, a) in kids.iter().enumerate() {
            for (j, b) in kids.iter().enumerate() {
                if i != j && idx.dominates(a, b)? {
                    dom.push((fid(sib[i]), fid(sib[j])));
                }
            }
        }
        nesting = Some(nesting_pairs(order, &kids)?.into_iter().map(|(i, j)| (fid(sib[i]), fid(sib[j]))).collect());
        diameters = Some(diam);
        domination = Some(dom);
    }
    let run = trace.map(|t| run_report(inst, t));
    Ok(StructureReport {
        children: inst.num_children(),
        families: inst.families().len(),
        sibling_families: sib.len(),
        diameters,
        nesting_pairs: nesting,
        domination,
        run,
    })
}

fn run_report(inst: &Instance, trace: &ExecutionTrace) -> RunReport {
    let names = |xs: &[ChildIx]| xs.iter().map(|&c| inst.child(c).id.clone()).collect();
    let chains = extract_chains(inst, trace)
        .into_iter()
        .map(|ci| ChainReport {
            inserted: ci.chain.inserted.map(|f| inst.family(f).id.clone()),
            children: names(&ci.chain.children),
            daycares: ci.chain.daycares.iter().map(|&d| inst.daycare(d).id.clone()).collect(),
            length: ci.len(),
            child_cycle: ci.child_cycle,
            family_cycle: ci.family_cycle,
            touched_families: ci.touched_families.iter().map(|&f| inst.family(f).id.clone()).collect(),
        })
        .collect();
    let (status, failure) = match trace.events.last() {
        Some(Event::Success) => ("success", None),
        Some(_) => ("failure", crate::algorithms::classify_failure(trace).ok().map(|k| k.label())),
        None => ("empty", None),
    };
    RunReport { status, failure, permutations: trace.permutations().len(), chains, checks: check_trace(inst, trace) }
}
