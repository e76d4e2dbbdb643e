//! Exhaustive search for a stable matching.
//!
//! Any stable matching is individually rational, so every family holds either
//! one of its listed tuples or nothing. The search walks that product space.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DaycareIx, FamilyIx, Instance, Matching};
use crate::stability::{is_stable, StabilityMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_nodes: u64,
    pub max_millis: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("search budget limits must be positive")]
pub struct InvalidBudget;

impl SearchBudget {
    pub fn new(max_nodes: u64, max_millis: u64) -> Result<Self, InvalidBudget> {
        if max_nodes == 0 || max_millis == 0 {
            return Err(InvalidBudget);
        }
        Ok(SearchBudget { max_nodes, max_millis })
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_nodes: 10_000_000, max_millis: 60_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverResult {
    Found(Matching),
    NoneExists,
    BudgetExceeded { nodes: u64 },
}

impl SolverResult {
    pub fn label(&self) -> &'static str {
        match self {
            SolverResult::Found(_) => "found",
            SolverResult::NoneExists => "none",
            SolverResult::BudgetExceeded { .. } => "budget_exceeded",
        }
    }

    pub fn found(&self) -> Option<&Matching> {
        match self {
            SolverResult::Found(m) => Some(m),
            _ => None,
        }
    }
}

struct Search<'a> {
    inst: &'a Instance,
    mode: StabilityMode,
    order: Vec<FamilyIx>,
    load: Vec<usize>,
    matching: Matching,
    nodes: u64,
    budget: SearchBudget,
    deadline: Instant,
}

enum Step {
    Found,
    Exhausted,
    OutOfBudget,
}

pub fn find_stable(inst: &Instance, mode: StabilityMode, budget: SearchBudget) -> SolverResult {
    let mut order: Vec<FamilyIx> = inst.family_ixs().collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (inst.family(a), inst.family(b));
        fb.children.len().cmp(&fa.children.len()).then_with(|| fa.id.cmp(&fb.id))
    });
    let mut search = Search {
        inst,
        mode,
        order,
        load: vec![0; inst.daycares().len()],
        matching: Matching::unmatched(inst),
        nodes: 0,
        budget,
        deadline: Instant::now() + Duration::from_millis(budget.max_millis),
    };
    match search.descend(0) {
        Step::Found => SolverResult::Found(search.matching),
        Step::Exhausted => SolverResult::NoneExists,
        Step::OutOfBudget => SolverResult::BudgetExceeded { nodes: search.nodes },
    }
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) -> Step {
        self.nodes += 1;
        if self.nodes > self.budget.max_nodes || (self.nodes.is_multiple_of(1024) && Instant::now() >= self.deadline) {
            return Step::OutOfBudget;
        }
        if depth == self.order.len() {
            return if is_stable(self.inst, &self.matching, self.mode) { Step::Found } else { Step::Exhausted };
        }
        let f = self.order[depth];
        let family = self.inst.family(f);
        for j in 0..family.preferences.len() {
            let tuple = &family.preferences[j];
            if !self.fits(f, tuple) {
                continue;
            }
            self.place(f, tuple);
            match self.descend(depth + 1) {
                Step::Exhausted => {}
                other => return other,
            }
            self.unplace(f);
        }
        // all-d0 is the matching's default state
        self.descend(depth + 1)
    }

    fn fits(&self, f: FamilyIx, tuple: &[DaycareIx]) -> bool {
        let family = self.inst.family(f);
        family.children.iter().zip(tuple).all(|(&c, &d)| {
            let dc = self.inst.daycare(d);
            if !dc.accepts(c) {
                return false;
            }
            let extra = tuple.iter().filter(|&&e| e == d).count();
            dc.quota.admits(self.load[d.0] + extra)
        })
    }

    fn place(&mut self, f: FamilyIx, tuple: &[DaycareIx]) {
        for (&c, &d) in self.inst.family(f).children.iter().zip(tuple) {
            self.load[d.0] += 1;
            self.matching.assign(c, d);
        }
    }

    fn unplace(&mut self, f: FamilyIx) {
        let dummy = self.inst.dummy();
        for &c in &self.inst.family(f).children {
            let d = self.matching.daycare_of(c);
            self.load[d.0] -= 1;
            self.matching.assign(c, dummy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_instance;

    #[test]
    fn budget_must_be_positive() {
        assert_eq!(SearchBudget::new(0, 5), Err(InvalidBudget));
        assert_eq!(SearchBudget::new(5, 0), Err(InvalidBudget));
        assert!(SearchBudget::new(1, 1).is_ok());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let inst = load_instance(
            br#"{"families":[{"id":"f","children":["a","b"],"preferences":[["d1","d1"]]},
                 {"id":"g","children":["c"],"preferences":[["d1"]]}],
                "daycares":[{"id":"d0","quota":null},{"id":"d1","quota":1,"priority":["c","a","b"]}]}"#,
        )
        .unwrap();
        let r = find_stable(&inst, StabilityMode::Ours, SearchBudget { max_nodes: 2, max_millis: 1000 });
        assert!(matches!(r, SolverResult::BudgetExceeded { nodes: 3 }));
        // the pair can never fit in one seat, so g gets d1
        let r = find_stable(&inst, StabilityMode::Ours, SearchBudget::default());
        let m = r.found().unwrap();
        assert_eq!(m.daycare_of(inst.child_ix("c").unwrap()), inst.daycare_ix("d1").unwrap());
    }
}
