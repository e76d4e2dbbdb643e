//! Proposal machinery shared by DA, SC, SDA and ESDA.

use std::collections::{HashSet, VecDeque};

use crate::model::{ChildIx, DaycareIx, FamilyIx, Instance, Matching};
use crate::stability::{choice, StabilityMode};

use super::trace::{Displacement, Event, Placement, TraceEvent};

pub(crate) type Disp = Displacement<ChildIx, DaycareIx>;

/// How an insertion ended.
pub(crate) enum Insertion {
    Settled,
    /// A child with siblings lost its seat.
    Evicted(ChildIx),
    /// Sequential couples gave up; the trace ends in a `Clash` event.
    Clash,
}

pub(crate) struct Engine<'a> {
    pub inst: &'a Instance,
    pub mode: StabilityMode,
    pub matching: Matching,
    /// Next tuple each family will propose to.
    next: Vec<usize>,
    pub events: Vec<TraceEvent>,
    recording: bool,
    /// Daycares applied to by any child with siblings (sequential couples only).
    sibling_applications: Option<HashSet<DaycareIx>>,
}

impl<'a> Engine<'a> {
    pub fn new(inst: &'a Instance, mode: StabilityMode) -> Self {
        Engine {
            inst,
            mode,
            matching: Matching::unmatched(inst),
            next: vec![0; inst.families().len()],
            events: Vec::new(),
            recording: true,
            sibling_applications: None,
        }
    }

    pub fn track_sibling_applications(&mut self) {
        self.sibling_applications = Some(HashSet::new());
    }

    fn record(&mut self, ev: TraceEvent) {
        if self.recording {
            self.events.push(ev);
        }
    }

    /// Family `f` proposes tuple `j`. On acceptance the matching is updated
    /// and the displaced children (all now at the dummy) are returned in
    /// tuple order.
    pub fn propose(&mut self, f: FamilyIx, j: usize) -> Option<Vec<Disp>> {
        let inst = self.inst;
        let fam = inst.family(f);
        let tuple = &fam.preferences[j];

        // distinct daycares in order of first appearance in the tuple
        let mut order: Vec<DaycareIx> = Vec::with_capacity(tuple.len());
        for &d in tuple {
            if !order.contains(&d) {
                order.push(d);
            }
        }

        let mut chosen_sets = Vec::with_capacity(order.len());
        for &d in &order {
            let dc = inst.daycare(d);
            if dc.is_dummy() {
                chosen_sets.push(Vec::new());
                continue;
            }
            let applying: Vec<ChildIx> =
                fam.children.iter().zip(tuple).filter(|&(_, &t)| t == d).map(|(&c, _)| c).collect();
            let roster = self.matching.roster(d).iter().copied();
            let chosen = match self.mode {
                StabilityMode::Ours => {
                    choice(dc, roster.filter(|&c| inst.family_of(c) != f).chain(applying.iter().copied()))
                }
                StabilityMode::Abh => choice(dc, roster.chain(applying.iter().copied())),
            };
            if !applying.iter().all(|c| chosen.contains(c)) {
                self.record(Event::Rejected { family: f, tuple_index: j });
                return None;
            }
            chosen_sets.push(chosen);
        }

        let mut displaced = Vec::new();
        for (&d, chosen) in order.iter().zip(&chosen_sets) {
            if inst.daycare(d).is_dummy() {
                continue;
            }
            let dc = inst.daycare(d);
            let mut out: Vec<ChildIx> = self
                .matching
                .roster(d)
                .iter()
                .copied()
                .filter(|c| !chosen.contains(c) && inst.family_of(*c) != f)
                .collect();
            out.sort_by_key(|&c| dc.rank_of(c));
            let entrants: Vec<ChildIx> = fam
                .children
                .iter()
                .zip(tuple)
                .filter(|&(&c, &t)| t == d && self.matching.daycare_of(c) != d)
                .map(|(&c, _)| c)
                .collect();
            for (k, c) in out.into_iter().enumerate() {
                let by = entrants[k.min(entrants.len() - 1)];
                displaced.push(Displacement { child: c, daycare: d, by });
            }
        }

        for x in &displaced {
            self.matching.assign(x.child, inst.dummy());
        }
        let placements: Vec<Placement<ChildIx, DaycareIx>> =
            fam.children.iter().zip(tuple).map(|(&c, &d)| Placement { child: c, daycare: d }).collect();
        for p in &placements {
            self.matching.assign(p.child, p.daycare);
        }
        self.record(Event::Accepted { family: f, tuple_index: j, placements, displaced: displaced.clone() });
        Some(displaced)
    }

    /// Walks `f` down its list from where it stopped last until a tuple is
    /// accepted. `None` means the list ran out and the family stays unmatched.
    fn propose_next(&mut self, f: FamilyIx) -> Option<Vec<Disp>> {
        let len = self.inst.family(f).preferences.len();
        while self.next[f.0] < len {
            let j = self.next[f.0];
            self.next[f.0] += 1;
            if let Some(out) = self.propose(f, j) {
                return Some(out);
            }
        }
        self.record(Event::Exhausted { family: f });
        None
    }

    /// Children-proposing deferred acceptance over single-child families,
    /// logged as one `InitialMatching` event.
    pub fn deferred_acceptance(&mut self, families: &[FamilyIx]) {
        let was_recording = self.recording;
        self.recording = false;
        let mut queue: VecDeque<FamilyIx> = families.iter().copied().collect();
        while let Some(f) = queue.pop_front() {
            if let Some(out) = self.propose_next(f) {
                queue.extend(out.iter().map(|x| self.inst.family_of(x.child)));
            }
        }
        self.recording = was_recording;
        let dummy = self.inst.dummy();
        let placements = families
            .iter()
            .flat_map(|&f| self.inst.family(f).children.iter().copied())
            .filter(|&c| self.matching.daycare_of(c) != dummy)
            .map(|c| Placement { child: c, daycare: self.matching.daycare_of(c) })
            .collect();
        self.record(Event::InitialMatching { placements });
    }

    fn first_sibling_eviction(&self, out: &[Disp]) -> Option<ChildIx> {
        out.iter().map(|x| x.child).find(|&c| self.inst.has_siblings(c))
    }

    fn note_sibling_application(&mut self, f: FamilyIx, j: usize) {
        let dummy = self.inst.dummy();
        if let Some(applied) = self.sibling_applications.as_mut() {
            applied.extend(self.inst.family(f).preferences[j].iter().copied().filter(|&d| d != dummy));
        }
    }

    /// Inserts sibling family `f` and re-seats every single-child family it
    /// displaces, first-displaced first.
    pub fn insert(&mut self, f: FamilyIx) -> Insertion {
        self.record(Event::Insert { family: f });
        let len = self.inst.family(f).preferences.len();
        let mut accepted = None;
        while self.next[f.0] < len {
            let j = self.next[f.0];
            self.next[f.0] += 1;
            self.note_sibling_application(f, j);
            if let Some(out) = self.propose(f, j) {
                accepted = Some(out);
                break;
            }
        }
        let Some(out) = accepted else {
            self.record(Event::Exhausted { family: f });
            return Insertion::Settled;
        };
        if let Some(c) = self.first_sibling_eviction(&out) {
            return self.evicted(c, &out);
        }

        let mut displaced: VecDeque<ChildIx> = out.iter().map(|x| x.child).collect();
        while let Some(c) = displaced.pop_front() {
            let g = self.inst.family_of(c);
            let len = self.inst.family(g).preferences.len();
            let mut accepted = None;
            while self.next[g.0] < len {
                let j = self.next[g.0];
                if let Some(applied) = &self.sibling_applications {
                    if let Some(&d) = self.inst.family(g).preferences[j].iter().find(|d| applied.contains(d)) {
                        self.record(Event::Clash { child: c, daycare: d });
                        return Insertion::Clash;
                    }
                }
                self.next[g.0] += 1;
                if let Some(out) = self.propose(g, j) {
                    accepted = Some(out);
                    break;
                }
            }
            let Some(out) = accepted else {
                self.record(Event::Exhausted { family: g });
                continue;
            };
            if let Some(c) = self.first_sibling_eviction(&out) {
                return self.evicted(c, &out);
            }
            displaced.extend(out.iter().map(|x| x.child));
        }
        Insertion::Settled
    }

    fn evicted(&mut self, c: ChildIx, out: &[Disp]) -> Insertion {
        if self.sibling_applications.is_some() {
            let x = out.iter().find(|x| x.child == c).expect("evicted child is in the displacement list");
            self.record(Event::Clash { child: x.by, daycare: x.daycare });
            return Insertion::Clash;
        }
        Insertion::Evicted(c)
    }
}
