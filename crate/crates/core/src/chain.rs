// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! A chain: tuples in strictly increasing mask order, searched by binary
//! branching. A hit sends the search to the more specific half ("succ"), a
//! miss to the less specific half ("fail").
//!
//! The search tree is the implicit, perfectly balanced tree over the ordered
//! tuple array: the node for the index range `[lo, hi)` is `(lo + hi) / 2`,
//! its fail subtree is `[lo, mid)` and its succ subtree `[mid + 1, hi)`.
//! Its height is exactly `1 + floor(log2 m_c)`, so a lookup never probes more
//! tuples than that. Rebalancing after a tuple insert or removal is a splice
//! of the array; markers hang off the prev/next links, which the tree shape
//! never affects.

use crate::audit::{AuditResult, Violation, ViolationKind};
use crate::error::{Error, Result};
use crate::model::{better, FieldVector, Mask, MatchResult, RuleTag};
use crate::tuple::{Slot, TupleArena, TupleId, UpdateWork};

/// Height of the implicit search tree over `m` tuples: `1 + floor(log2 m)`,
/// zero for an empty chain.
pub fn search_depth(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        m.ilog2() as usize + 1
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chain {
    pub(crate) id: usize,
    order: Vec<TupleId>,
    rules: usize,
    work: UpdateWork,
}

impl Chain {
    pub fn new(id: usize) -> Self {
        Chain {
            id,
            ..Default::default()
        }
    }

    /// Tuples from head (least specific) to tail.
    pub fn order(&self) -> &[TupleId] {
        &self.order
    }

    /// m_c
    pub fn tuple_count(&self) -> usize {
        self.order.len()
    }

    /// n_c
    pub fn rule_count(&self) -> usize {
        self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Marker and hint work done on this chain since the last reset.
    pub fn work(&self) -> UpdateWork {
        self.work
    }

    pub fn reset_work(&mut self) {
        self.work = UpdateWork::default();
    }

    pub fn root(&self) -> Option<usize> {
        (!self.order.is_empty()).then_some(self.order.len() / 2)
    }

    /// `(fail, succ)` children of the node at chain position `pos`.
    pub fn children(&self, pos: usize) -> (Option<usize>, Option<usize>) {
        let (mut lo, mut hi) = (0, self.order.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match pos.cmp(&mid) {
                std::cmp::Ordering::Equal => {
                    let fail = (lo < mid).then(|| (lo + mid) / 2);
                    let succ = (mid + 1 < hi).then(|| (mid + 1 + hi) / 2);
                    return (fail, succ);
                }
                std::cmp::Ordering::Less => hi = mid,
                std::cmp::Ordering::Greater => lo = mid + 1,
            }
        }
        (None, None)
    }

    /// Binary-branching search: probe, record the hit entry's hint and go to
    /// the succ side, or go to the fail side on a miss.
    #[inline]
    pub fn lookup(&self, arena: &TupleArena, key: &FieldVector) -> MatchResult {
        let (mut lo, mut hi) = (0, self.order.len());
        let mut best = None;
        let mut probes = 0;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let tuple = arena.get(self.order[mid]);
            probes += 1;
            match tuple.probe(key) {
                Some(slot) => {
                    best = better(best, tuple.entry(slot).hint());
                    lo = mid + 1;
                }
                None => hi = mid,
            }
        }
        MatchResult { rule: best, probes }
    }

    /// Stores a rule in tuple `tid`, leaving markers toward the head and
    /// pushing the new hint toward the tail. Returns false if the same rule
    /// is already stored.
    pub fn insert_rule(
        &mut self,
        arena: &mut TupleArena,
        tid: TupleId,
        tag: RuleTag,
        fields: &FieldVector,
    ) -> bool {
        debug_assert_eq!(arena.get(tid).chain, self.id);
        let (slot, created) = match arena.get(tid).find(fields) {
            Some(s) => (s, false),
            None => (arena.get_mut(tid).insert_entry(fields.clone()), true),
        };
        if !arena.get_mut(tid).add_rule(slot, tag) {
            return false;
        }
        self.work.marker_touches += 1;
        if created {
            let prev = arena.get(tid).prev();
            arena.leave_marker(tid, slot, prev, &mut self.work);
        }
        if arena.refresh_hint(tid, slot) {
            arena.report_hint(tid, slot, &mut self.work);
        }
        self.rules += 1;
        true
    }

    /// Removes a rule from tuple `tid`. Returns `None` if it was not stored,
    /// otherwise the tuples whose tables became empty, tail first.
    pub fn delete_rule(
        &mut self,
        arena: &mut TupleArena,
        tid: TupleId,
        tag: RuleTag,
        fields: &FieldVector,
    ) -> Option<Vec<TupleId>> {
        let slot = arena.get(tid).find(fields)?;
        if !arena.get_mut(tid).remove_rule(slot, tag) {
            return None;
        }
        self.rules -= 1;
        self.work.marker_touches += 1;
        let mut emptied = Vec::new();
        let e = arena.get(tid).entry(slot);
        if e.rules().is_empty() && e.owners().is_empty() {
            arena.collect_garbage(tid, slot, &mut emptied, &mut self.work);
        } else if arena.refresh_hint(tid, slot) {
            arena.report_hint(tid, slot, &mut self.work);
        }
        Some(emptied)
    }

    /// Position at which a tuple with mask `m` keeps the chain strictly
    /// increasing, if there is one.
    pub fn can_host(&self, arena: &TupleArena, m: &Mask) -> Option<usize> {
        // Tuples below `m` form a prefix of the chain, since "<" is transitive.
        let pos = self
            .order
            .partition_point(|&t| arena.get(t).mask().less_than(m));
        match self.order.get(pos) {
            Some(&t) if !m.less_than(arena.get(t).mask()) => None,
            _ => Some(pos),
        }
    }

    /// Splices an empty tuple in at `pos`. Entries of its successor re-anchor
    /// their markers through it; old markers left without rules or owners
    /// are erased.
    pub fn insert_tuple(&mut self, arena: &mut TupleArena, tid: TupleId, pos: usize) -> Result<()> {
        if pos > self.order.len() {
            return Err(Error::Usage(format!(
                "position {pos} is past the end of a chain of {} tuples",
                self.order.len()
            )));
        }
        if !arena.get(tid).is_empty() {
            return Err(Error::Usage("only an empty tuple can be spliced into a chain".into()));
        }
        let mask = arena.get(tid).mask().clone();
        let prev = pos.checked_sub(1).map(|p| self.order[p]);
        let next = self.order.get(pos).copied();
        if prev.is_some_and(|p| !arena.get(p).mask().less_than(&mask))
            || next.is_some_and(|n| !mask.less_than(arena.get(n).mask()))
        {
            return Err(Error::Usage(format!(
                "position {pos} breaks the chain order"
            )));
        }

        // Detach successor entries while the old links are still in place.
        let mut successors = Vec::new();
        let mut stale = Vec::new();
        if let Some(n) = next {
            successors = arena.get(n).slots();
            for &s in &successors {
                if let Some(k) = arena.detach(n, s) {
                    stale.push(k);
                }
            }
        }

        self.order.insert(pos, tid);
        {
            let t = arena.get_mut(tid);
            t.chain = self.id;
            t.prev = prev;
            t.next = next;
        }
        if let Some(p) = prev {
            arena.get_mut(p).next = Some(tid);
        }
        if let Some(n) = next {
            arena.get_mut(n).prev = Some(tid);
            for &s in &successors {
                arena.leave_marker(n, s, Some(tid), &mut self.work);
            }
            if let Some(p) = prev {
                stale.sort_unstable();
                stale.dedup();
                let mut emptied = Vec::new();
                for k in stale {
                    arena.collect_garbage(p, k, &mut emptied, &mut self.work);
                }
                debug_assert!(emptied.is_empty(), "re-anchoring keeps the old trail alive");
            }
            for &s in &successors {
                if arena.refresh_hint(n, s) {
                    arena.report_hint(n, s, &mut self.work);
                }
            }
        }
        Ok(())
    }

    /// Unsplices an empty tuple.
    pub fn remove_tuple(&mut self, arena: &mut TupleArena, tid: TupleId) -> Result<()> {
        if !arena.get(tid).is_empty() {
            return Err(Error::Usage("cannot remove a tuple that still has entries".into()));
        }
        let pos = self
            .order
            .iter()
            .position(|&t| t == tid)
            .ok_or_else(|| Error::Usage(format!("tuple {tid} is not on chain {}", self.id)))?;
        self.order.remove(pos);
        let (prev, next) = {
            let t = arena.get_mut(tid);
            (t.prev.take(), t.next.take())
        };
        if let Some(p) = prev {
            arena.get_mut(p).next = next;
        }
        if let Some(n) = next {
            arena.get_mut(n).prev = prev;
            // Only reachable if successor entries had no markers in `tid`.
            for s in arena.get(n).slots() {
                if arena.get(n).entry(s).marker().is_none() {
                    arena.leave_marker(n, s, prev, &mut self.work);
                    if arena.refresh_hint(n, s) {
                        arena.report_hint(n, s, &mut self.work);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn entry_total(&self, arena: &TupleArena) -> usize {
        self.order.iter().map(|&t| arena.get(t).entry_count()).sum()
    }

    pub fn owner_links(&self, arena: &TupleArena) -> usize {
        self.order
            .iter()
            .map(|&t| arena.get(t).entries().map(|(_, e)| e.owners().len()).sum::<usize>())
            .sum()
    }

    /// Checks chain order, tree shape, links, the marker key law, owner
    /// symmetry, the hint law and the `n_c x m_c` entry bound.
    pub fn audit(&self, arena: &TupleArena) -> AuditResult {
        let here = |what: String| format!("chain {}{what}", self.id);
        let m = self.order.len();

        let mut in_order = Vec::with_capacity(m);
        let height = walk_in_order(self, self.root(), &mut in_order);
        if in_order != (0..m).collect::<Vec<_>>() {
            return Err(Violation::new(here(String::new()), ViolationKind::Links));
        }
        let limit = search_depth(m);
        if height > limit {
            return Err(Violation::new(
                here(String::new()),
                ViolationKind::TreeShape { height, limit },
            ));
        }

        let mut rules = 0usize;
        for (i, &tid) in self.order.iter().enumerate() {
            let t = arena.get(tid);
            let at = |what: &str| here(format!(" tuple {tid} (pos {i}){what}"));
            let prev = i.checked_sub(1).map(|p| self.order[p]);
            let next = self.order.get(i + 1).copied();
            if t.prev != prev || t.next != next || t.chain != self.id {
                return Err(Violation::new(at(""), ViolationKind::Links));
            }
            if let Some(p) = prev {
                if !arena.get(p).mask().less_than(t.mask()) {
                    return Err(Violation::new(at(""), ViolationKind::ChainOrder));
                }
            }

            let (mut entries, mut holders, mut stored) = (0, 0, 0);
            for (slot, e) in t.entries() {
                let at = |what: &str| at(&format!(" entry {slot}{what}"));
                entries += 1;
                if !e.rules().is_empty() {
                    holders += 1;
                    stored += e.rules().len();
                }
                if !e.key().is_canonical(t.mask()) {
                    return Err(Violation::new(at(""), ViolationKind::NonCanonicalKey));
                }
                if t.find(e.key()) != Some(slot) {
                    return Err(Violation::new(at(" (index)"), ViolationKind::Counters(
                        "entry not reachable through the tuple index".into(),
                    )));
                }
                if e.rules().is_empty() && e.owners().is_empty() {
                    return Err(Violation::new(at(""), ViolationKind::EmptyEntry));
                }
                if e.rules().windows(2).any(|w| !w[0].beats(&w[1])) {
                    return Err(Violation::new(at(""), ViolationKind::Counters(
                        "entry rules not sorted best first".into(),
                    )));
                }
                let inherited = match (prev, e.marker()) {
                    (None, None) => None,
                    (Some(p), Some(k)) => {
                        let pt = arena.get(p);
                        let Some(mk) = live_entry(arena, p, k) else {
                            return Err(Violation::new(at(""), ViolationKind::MissingMarker));
                        };
                        if *mk.key() != e.key().masked(pt.mask()) {
                            return Err(Violation::new(at(""), ViolationKind::MarkerKey));
                        }
                        if mk.owners().get(e.marker_pos as usize) != Some(&slot) {
                            return Err(Violation::new(at(""), ViolationKind::OwnerSymmetry));
                        }
                        mk.hint()
                    }
                    (Some(_), None) => {
                        return Err(Violation::new(at(""), ViolationKind::MissingMarker));
                    }
                    (None, Some(_)) => {
                        return Err(Violation::new(at(" (head)"), ViolationKind::OwnerSymmetry));
                    }
                };
                let expected = better(e.rule(), inherited);
                if e.hint() != expected {
                    return Err(Violation::new(
                        at(""),
                        ViolationKind::HintLaw {
                            expected,
                            found: e.hint(),
                        },
                    ));
                }
                for &o in e.owners() {
                    let ok = next
                        .and_then(|n| live_entry(arena, n, o))
                        .is_some_and(|oe| oe.marker() == Some(slot));
                    if !ok {
                        return Err(Violation::new(at(" (owners)"), ViolationKind::OwnerSymmetry));
                    }
                }
            }
            if entries != t.entry_count() || holders != t.rule_count() || stored != t.rules_stored() {
                return Err(Violation::new(
                    at(""),
                    ViolationKind::Counters(format!(
                        "tuple reports {}/{}/{} entries/holders/rules, found {entries}/{holders}/{stored}",
                        t.entry_count(),
                        t.rule_count(),
                        t.rules_stored()
                    )),
                ));
            }
            rules += stored;
        }
        if rules != self.rules {
            return Err(Violation::new(
                here(String::new()),
                ViolationKind::Counters(format!("chain counts {} rules, tuples hold {rules}", self.rules)),
            ));
        }
        let entries = self.entry_total(arena);
        let bound = self.rules * m;
        if entries > bound {
            return Err(Violation::new(
                here(String::new()),
                ViolationKind::SpaceBound { entries, bound },
            ));
        }
        Ok(())
    }
}

fn live_entry(arena: &TupleArena, tid: TupleId, slot: Slot) -> Option<&crate::tuple::Entry> {
    arena.get(tid).try_entry(slot)
}

/// In-order walk over the fail/succ links; returns the subtree height.
fn walk_in_order(chain: &Chain, node: Option<usize>, out: &mut Vec<usize>) -> usize {
    let Some(pos) = node else { return 0 };
    let (fail, succ) = chain.children(pos);
    let left = walk_in_order(chain, fail, out);
    out.push(pos);
    let right = walk_in_order(chain, succ, out);
    1 + left.max(right)
}
