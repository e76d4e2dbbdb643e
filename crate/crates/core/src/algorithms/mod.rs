//! Deferred acceptance and the three sibling-aware procedures built on it:
//! sequential couples (SC), sorted deferred acceptance (SDA) and its
//! seat-transfer extension (ESDA).
//!
//! SC, SDA and ESDA share one skeleton. Run DA over the single-child
//! families, then insert the sibling families one by one in the order `π`.
//! An inserted family walks down its tuple list until every daycare of a
//! tuple takes all of its applicants; single children pushed out along the
//! way re-apply down their own lists. They differ in what happens when a
//! child with siblings loses a seat:
//!
//! * SC gives up, and also gives up as soon as a displaced single applies to
//!   a daycare some child with siblings applied to.
//! * SDA and ESDA move the inserted family in front of the evicted one and
//!   start over, failing once an order repeats.
//!
//! ESDA additionally checks, after each insertion has settled, whether the
//! inserted family could reach a better tuple by letting siblings pass their
//! seats to each other, and fails if so. That check is what makes its
//! successful outputs stable under seat transfer.

mod engine;
pub mod trace;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{ChildIx, DaycareIx, FamilyIx, Instance, Matching};
use crate::stability::{blocking_tuple, StabilityMode};

use engine::{Engine, Insertion};
pub use trace::{rejection_chains, Event, ExecutionTrace, RejectionChain, TraceError, TraceEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Da,
    Sc,
    Sda,
    Esda,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Da => "da",
            Algorithm::Sc => "sc",
            Algorithm::Sda => "sda",
            Algorithm::Esda => "esda",
        }
    }

    /// Runs the algorithm with its default inputs: DA over the single-child
    /// families, SC with the identity order.
    pub fn run(self, inst: &Instance) -> AlgorithmOutcome {
        match self {
            Algorithm::Da => {
                let mut engine = Engine::new(inst, StabilityMode::Abh);
                engine.deferred_acceptance(&inst.singleton_families());
                engine.events.push(Event::Success);
                AlgorithmOutcome {
                    status: Status::Success(engine.matching),
                    trace: ExecutionTrace { events: engine.events },
                }
            }
            Algorithm::Sc => run_sc(inst, &inst.sibling_families()).expect("identity order is a permutation"),
            Algorithm::Sda => run_sda(inst),
            Algorithm::Esda => run_esda(inst),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "da" => Ok(Algorithm::Da),
            "sc" => Ok(Algorithm::Sc),
            "sda" => Ok(Algorithm::Sda),
            "esda" => Ok(Algorithm::Esda),
            other => Err(format!("unknown algorithm {other:?} (expected da|sc|sda|esda)")),
        }
    }
}

/// Why a run gave up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// A displacement chain started by a child of the inserted family came
    /// back to that same child.
    Type1a { chain: Vec<ChildIx> },
    /// The chain came back to a sibling of the child that started it.
    Type1b { chain: Vec<ChildIx> },
    /// Reordering the sibling families produced an order already tried.
    Type2PermutationRepeat { permutation: Vec<FamilyIx> },
    /// The inserted family could improve by passing seats between siblings.
    ImprovementFailure { family: FamilyIx, tuple_index: usize },
    ScApplicationClash { child: ChildIx, daycare: DaycareIx },
    /// A family ran out of tuples. The procedures here leave such families
    /// unmatched instead, so none of them reports this.
    PreferenceExhaustion { family: FamilyIx },
}

impl FailureKind {
    pub fn label(&self) -> &'static str {
        match self {
            FailureKind::Type1a { .. } => "type1a",
            FailureKind::Type1b { .. } => "type1b",
            FailureKind::Type2PermutationRepeat { .. } => "type2",
            FailureKind::ImprovementFailure { .. } => "improvement",
            FailureKind::ScApplicationClash { .. } => "sc_clash",
            FailureKind::PreferenceExhaustion { .. } => "exhaustion",
        }
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let kids = |cs: &[ChildIx]| cs.iter().map(|&c| inst.child(c).id.clone()).collect::<Vec<_>>();
        let fams = |fs: &[FamilyIx]| fs.iter().map(|&f| inst.family(f).id.clone()).collect::<Vec<_>>();
        match self {
            FailureKind::Type1a { chain } | FailureKind::Type1b { chain } => {
                json!({"kind": self.label(), "chain": kids(chain)})
            }
            FailureKind::Type2PermutationRepeat { permutation } => {
                json!({"kind": self.label(), "permutation": fams(permutation)})
            }
            FailureKind::ImprovementFailure { family, tuple_index } => {
                json!({"kind": self.label(), "family": inst.family(*family).id, "tuple_index": tuple_index})
            }
            FailureKind::ScApplicationClash { child, daycare } => {
                json!({"kind": self.label(), "child": inst.child(*child).id, "daycare": inst.daycare(*daycare).id})
            }
            FailureKind::PreferenceExhaustion { family } => {
                json!({"kind": self.label(), "family": inst.family(*family).id})
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Success(Matching),
    Failure(FailureKind),
}

#[derive(Clone, Debug)]
pub struct AlgorithmOutcome {
    pub status: Status,
    pub trace: ExecutionTrace,
}

impl AlgorithmOutcome {
    pub fn matching(&self) -> Option<&Matching> {
        match &self.status {
            Status::Success(m) => Some(m),
            Status::Failure(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&FailureKind> {
        match &self.status {
            Status::Success(_) => None,
            Status::Failure(k) => Some(k),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self.status, Status::Success(_))
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let perms: Vec<Vec<String>> = self
            .trace
            .permutations()
            .iter()
            .map(|p| p.iter().map(|&f| inst.family(f).id.clone()).collect())
            .collect();
        match &self.status {
            Status::Success(m) => json!({
                "status": "success",
                "assignment": m.to_doc(inst).assignment,
                "permutations": perms,
            }),
            Status::Failure(kind) => json!({
                "status": "failure",
                "failure": kind.to_json(inst),
                "permutations": perms,
            }),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("family {0:?} has more than one child")]
    NotSingleton(String),
    #[error("order is not a permutation of the families with siblings")]
    InvalidPermutation,
    #[error("trace ends in success")]
    TraceSucceeded,
    #[error("trace has no terminal event")]
    Unterminated,
}

/// Children-proposing deferred acceptance restricted to `scope`, which must
/// only contain single-child families. Everyone else stays unmatched.
pub fn run_da(inst: &Instance, scope: &[FamilyIx]) -> Result<Matching, AlgorithmError> {
    if let Some(&f) = scope.iter().find(|&&f| !inst.family(f).is_singleton()) {
        return Err(AlgorithmError::NotSingleton(inst.family(f).id.clone()));
    }
    let mut engine = Engine::new(inst, StabilityMode::Abh);
    engine.deferred_acceptance(scope);
    Ok(engine.matching)
}

/// Sequential couples with insertion order `order`.
pub fn run_sc(inst: &Instance, order: &[FamilyIx]) -> Result<AlgorithmOutcome, AlgorithmError> {
    let siblings = inst.sibling_families();
    let given: HashSet<_> = order.iter().collect();
    if order.len() != siblings.len() || given.len() != order.len() || !siblings.iter().all(|f| given.contains(f)) {
        return Err(AlgorithmError::InvalidPermutation);
    }
    let mut engine = Engine::new(inst, StabilityMode::Abh);
    engine.track_sibling_applications();
    engine.events.push(Event::Segment { permutation: order.to_vec() });
    engine.deferred_acceptance(&inst.singleton_families());
    for &f in order {
        if let Insertion::Clash = engine.insert(f) {
            return Ok(finish_failure(engine.events));
        }
    }
    engine.events.push(Event::Success);
    Ok(AlgorithmOutcome { status: Status::Success(engine.matching), trace: ExecutionTrace { events: engine.events } })
}

/// Sorted deferred acceptance: daycares keep their current occupants when
/// choosing, and no improvement check is made.
pub fn run_sda(inst: &Instance) -> AlgorithmOutcome {
    sorted_deferred_acceptance(inst, StabilityMode::Abh, false)
}

/// Extended sorted deferred acceptance: seat-transfer choice plus the
/// improvement check after every insertion.
pub fn run_esda(inst: &Instance) -> AlgorithmOutcome {
    sorted_deferred_acceptance(inst, StabilityMode::Ours, true)
}

fn sorted_deferred_acceptance(inst: &Instance, mode: StabilityMode, check_improvement: bool) -> AlgorithmOutcome {
    let singles = inst.singleton_families();
    let mut order = inst.sibling_families();
    let mut tried: HashSet<Vec<FamilyIx>> = HashSet::from([order.clone()]);
    let mut events = Vec::new();

    'restart: loop {
        let mut engine = Engine::new(inst, mode);
        engine.events = std::mem::take(&mut events);
        engine.events.push(Event::Segment { permutation: order.clone() });
        engine.deferred_acceptance(&singles);

        for i in 0..order.len() {
            let f = order[i];
            match engine.insert(f) {
                Insertion::Settled => {}
                Insertion::Evicted(child) => {
                    let victim = inst.family_of(child);
                    let next = move_before(&order, f, victim);
                    let repeated = !tried.insert(next.clone());
                    engine.events.push(Event::Restart {
                        family: f,
                        evicted: child,
                        evicted_family: victim,
                        permutation: next.clone(),
                        repeated,
                    });
                    if repeated {
                        return finish_failure(engine.events);
                    }
                    order = next;
                    events = engine.events;
                    continue 'restart;
                }
                Insertion::Clash => unreachable!("clashes are only tracked for sequential couples"),
            }
            if check_improvement {
                if let Some(bc) = blocking_tuple(inst, &engine.matching, f, StabilityMode::Ours) {
                    engine.events.push(Event::Improvement { family: f, tuple_index: bc.tuple_index });
                    return finish_failure(engine.events);
                }
            }
        }
        engine.events.push(Event::Success);
        return AlgorithmOutcome {
            status: Status::Success(engine.matching),
            trace: ExecutionTrace { events: engine.events },
        };
    }
}

/// `order` with `f` taken out and put back immediately before `victim`.
fn move_before(order: &[FamilyIx], f: FamilyIx, victim: FamilyIx) -> Vec<FamilyIx> {
    if f == victim {
        return order.to_vec();
    }
    let mut next: Vec<FamilyIx> = order.iter().copied().filter(|&g| g != f).collect();
    let at = next.iter().position(|&g| g == victim).expect("victim is in the order");
    next.insert(at, f);
    next
}

fn finish_failure(events: Vec<TraceEvent>) -> AlgorithmOutcome {
    let trace = ExecutionTrace { events };
    let kind = classify_failure(&trace).expect("failed run ends in a failure event");
    AlgorithmOutcome { status: Status::Failure(kind), trace }
}

/// Reads the failure kind off the end of a trace.
pub fn classify_failure(trace: &ExecutionTrace) -> Result<FailureKind, AlgorithmError> {
    match trace.events.last() {
        Some(Event::Success) => Err(AlgorithmError::TraceSucceeded),
        Some(Event::Improvement { family, tuple_index }) => {
            Ok(FailureKind::ImprovementFailure { family: *family, tuple_index: *tuple_index })
        }
        Some(Event::Clash { child, daycare }) => {
            Ok(FailureKind::ScApplicationClash { child: *child, daycare: *daycare })
        }
        Some(Event::Restart { family, evicted, evicted_family, permutation, repeated: true }) => {
            if family != evicted_family {
                return Ok(FailureKind::Type2PermutationRepeat { permutation: permutation.clone() });
            }
            let chain = rejection_chains(&trace.events)
                .into_iter()
                .rev()
                .find(|ch| ch.children.last() == Some(evicted))
                .map(|ch| ch.children)
                .unwrap_or_else(|| vec![*evicted]);
            if chain.first() == Some(evicted) {
                Ok(FailureKind::Type1a { chain })
            } else {
                Ok(FailureKind::Type1b { chain })
            }
        }
        _ => Err(AlgorithmError::Unterminated),
    }
}
