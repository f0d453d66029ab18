// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Tuples, their entries, and the marker/hint primitives that link a tuple to
//! its neighbours on a chain.
//!
//! Every entry carries the best rule stored under its key, a hint (the best
//! rule along its marker-ancestor path), an owner list of entries in the next
//! tuple that use it as their marker, and a back-link to its own marker in the
//! previous tuple. Entries are addressed by `(TupleId, Slot)`; slots are
//! stable for the life of the entry.

use hashbrown::HashTable;
use smallvec::SmallVec;

use crate::model::{better, key_hash, masked_hash, FieldVector, Mask, RuleTag};

pub type TupleId = u32;
pub type Slot = u32;

/// One hash-table entry of a tuple.
#[derive(Debug, Clone)]
pub struct Entry {
    pub(crate) key: FieldVector,
    /// Rules stored under this exact key, best first. More than one only when
    /// distinct rules share `(fields, mask)`.
    pub(crate) rules: SmallVec<[RuleTag; 1]>,
    pub(crate) hint: Option<RuleTag>,
    pub(crate) owners: Vec<Slot>,
    pub(crate) marker: Option<Slot>,
    /// Index of this entry inside its marker's owner list.
    pub(crate) marker_pos: u32,
}

impl Entry {
    fn new(key: FieldVector) -> Self {
        Entry {
            key,
            rules: SmallVec::new(),
            hint: None,
            owners: Vec::new(),
            marker: None,
            marker_pos: 0,
        }
    }

    pub fn key(&self) -> &FieldVector {
        &self.key
    }

    /// The rule this entry contributes, if any.
    pub fn rule(&self) -> Option<RuleTag> {
        self.rules.first().copied()
    }

    pub fn rules(&self) -> &[RuleTag] {
        &self.rules
    }

    pub fn hint(&self) -> Option<RuleTag> {
        self.hint
    }

    pub fn owners(&self) -> &[Slot] {
        &self.owners
    }

    pub fn marker(&self) -> Option<Slot> {
        self.marker
    }

    /// An entry with owners serves as somebody's marker.
    pub fn is_marker(&self) -> bool {
        !self.owners.is_empty()
    }

    fn is_garbage(&self) -> bool {
        self.rules.is_empty() && self.owners.is_empty()
    }

    pub(crate) fn add_rule(&mut self, tag: RuleTag) -> bool {
        if self.rules.contains(&tag) {
            return false;
        }
        let at = self
            .rules
            .iter()
            .position(|r| tag.beats(r))
            .unwrap_or(self.rules.len());
        self.rules.insert(at, tag);
        true
    }

    pub(crate) fn remove_rule(&mut self, tag: RuleTag) -> bool {
        match self.rules.iter().position(|r| *r == tag) {
            Some(i) => {
                self.rules.remove(i);
                true
            }
            None => false,
        }
    }

    fn heap_bytes(&self) -> usize {
        let rules = if self.rules.spilled() {
            self.rules.capacity() * std::mem::size_of::<RuleTag>()
        } else {
            0
        };
        self.key.heap_bytes() + rules + self.owners.capacity() * std::mem::size_of::<Slot>()
    }
}

/// All rules sharing one mask, in a hash table keyed by masked field vectors.
#[derive(Debug, Clone)]
pub struct Tuple {
    mask: Mask,
    index: HashTable<Slot>,
    slots: Vec<Option<Entry>>,
    free: Vec<Slot>,
    entry_count: usize,
    rule_count: usize,
    rules_stored: usize,
    pub(crate) chain: usize,
    pub(crate) prev: Option<TupleId>,
    pub(crate) next: Option<TupleId>,
}

impl Tuple {
    pub fn new(mask: Mask) -> Self {
        Tuple {
            mask,
            index: HashTable::new(),
            slots: Vec::new(),
            free: Vec::new(),
            entry_count: 0,
            rule_count: 0,
            rules_stored: 0,
            chain: 0,
            prev: None,
            next: None,
        }
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn prev(&self) -> Option<TupleId> {
        self.prev
    }

    pub fn next(&self) -> Option<TupleId> {
        self.next
    }

    /// Number of entries (rule holders and pure markers).
    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    /// Number of entries holding at least one rule.
    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Number of rules stored, counting rules that share an entry.
    pub fn rules_stored(&self) -> usize {
        self.rules_stored
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count == 0
    }

    /// One hash probe with the full (unmasked) packet key.
    #[inline]
    pub fn probe(&self, key: &FieldVector) -> Option<Slot> {
        let hash = masked_hash(&key.words, &self.mask.0.words);
        self.index
            .find(hash, |&s| {
                let e = self.slots[s as usize].as_ref().expect("indexed slot is live");
                key.masked_eq(&self.mask, &e.key.words)
            })
            .copied()
    }

    /// Lookup by an already mask-canonical key.
    pub fn find(&self, key: &FieldVector) -> Option<Slot> {
        let hash = key_hash(&key.words);
        self.index
            .find(hash, |&s| {
                self.slots[s as usize].as_ref().expect("indexed slot is live").key == *key
            })
            .copied()
    }

    pub fn entry(&self, slot: Slot) -> &Entry {
        self.slots[slot as usize].as_ref().expect("live slot")
    }

    pub fn try_entry(&self, slot: Slot) -> Option<&Entry> {
        self.slots.get(slot as usize).and_then(|e| e.as_ref())
    }

    pub(crate) fn entry_mut(&mut self, slot: Slot) -> &mut Entry {
        self.slots[slot as usize].as_mut().expect("live slot")
    }

    pub fn entries(&self) -> impl Iterator<Item = (Slot, &Entry)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (i as Slot, e)))
    }

    pub(crate) fn slots(&self) -> Vec<Slot> {
        self.entries().map(|(s, _)| s).collect()
    }

    pub(crate) fn insert_entry(&mut self, key: FieldVector) -> Slot {
        debug_assert!(key.is_canonical(&self.mask));
        debug_assert!(self.find(&key).is_none());
        let hash = key_hash(&key.words);
        let slot = match self.free.pop() {
            Some(s) => {
                self.slots[s as usize] = Some(Entry::new(key));
                s
            }
            None => {
                self.slots.push(Some(Entry::new(key)));
                (self.slots.len() - 1) as Slot
            }
        };
        let slots = &self.slots;
        self.index.insert_unique(hash, slot, |&s| {
            key_hash(&slots[s as usize].as_ref().expect("live slot").key.words)
        });
        self.entry_count += 1;
        slot
    }

    pub(crate) fn erase(&mut self, slot: Slot) -> Entry {
        let entry = self.slots[slot as usize].take().expect("live slot");
        let hash = key_hash(&entry.key.words);
        match self.index.find_entry(hash, |&s| s == slot) {
            Ok(found) => {
                found.remove();
            }
            Err(_) => unreachable!("entry missing from its tuple index"),
        }
        self.free.push(slot);
        self.entry_count -= 1;
        if !entry.rules.is_empty() {
            self.rule_count -= 1;
            self.rules_stored -= entry.rules.len();
        }
        entry
    }

    /// Adds `tag` to the entry, keeping the rule counters in step.
    pub(crate) fn add_rule(&mut self, slot: Slot, tag: RuleTag) -> bool {
        let e = self.entry_mut(slot);
        let was_empty = e.rules.is_empty();
        if !e.add_rule(tag) {
            return false;
        }
        if was_empty {
            self.rule_count += 1;
        }
        self.rules_stored += 1;
        true
    }

    pub(crate) fn remove_rule(&mut self, slot: Slot, tag: RuleTag) -> bool {
        let e = self.entry_mut(slot);
        if !e.remove_rule(tag) {
            return false;
        }
        let now_empty = e.rules.is_empty();
        if now_empty {
            self.rule_count -= 1;
        }
        self.rules_stored -= 1;
        true
    }

    /// Structural bytes: table control, slot array, per-entry heap storage.
    pub fn memory_bytes(&self) -> usize {
        let index = self.index.capacity() * (std::mem::size_of::<Slot>() + 1);
        let slots = self.slots.capacity() * std::mem::size_of::<Option<Entry>>()
            + self.free.capacity() * std::mem::size_of::<Slot>();
        let heap: usize = self.entries().map(|(_, e)| e.heap_bytes()).sum();
        std::mem::size_of::<Tuple>() + index + slots + heap
    }

    /// Overwrites an entry's hint. Test hook for audit checks.
    #[doc(hidden)]
    pub fn corrupt_hint(&mut self, slot: Slot, hint: Option<RuleTag>) {
        self.entry_mut(slot).hint = hint;
    }
}

/// Work done by marker and hint maintenance, in entries touched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct UpdateWork {
    pub marker_touches: u64,
    pub hint_touches: u64,
}

impl UpdateWork {
    pub fn total(&self) -> u64 {
        self.marker_touches + self.hint_touches
    }
}

/// Storage for every tuple of one classifier.
#[derive(Debug, Clone, Default)]
pub struct TupleArena {
    tuples: Vec<Option<Tuple>>,
    free: Vec<TupleId>,
}

impl TupleArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, tuple: Tuple) -> TupleId {
        match self.free.pop() {
            Some(id) => {
                self.tuples[id as usize] = Some(tuple);
                id
            }
            None => {
                self.tuples.push(Some(tuple));
                (self.tuples.len() - 1) as TupleId
            }
        }
    }

    pub fn release(&mut self, id: TupleId) -> Tuple {
        let t = self.tuples[id as usize].take().expect("live tuple");
        self.free.push(id);
        t
    }

    #[inline]
    pub fn get(&self, id: TupleId) -> &Tuple {
        self.tuples[id as usize].as_ref().expect("live tuple")
    }

    #[inline]
    pub fn get_mut(&mut self, id: TupleId) -> &mut Tuple {
        self.tuples[id as usize].as_mut().expect("live tuple")
    }

    pub fn iter(&self) -> impl Iterator<Item = (TupleId, &Tuple)> {
        self.tuples
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().map(|t| (i as TupleId, t)))
    }

    pub fn len(&self) -> usize {
        self.tuples.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn memory_bytes(&self) -> usize {
        self.tuples.capacity() * std::mem::size_of::<Option<Tuple>>()
            + self.iter().map(|(_, t)| t.memory_bytes() - std::mem::size_of::<Tuple>()).sum::<usize>()
    }

    /// Finds or creates the marker of `(tid, slot)` in `target` (the
    /// preceding tuple), recursing toward the chain head for new markers.
    /// Records the owner link on both sides and returns the marker's slot.
    pub fn leave_marker(
        &mut self,
        tid: TupleId,
        slot: Slot,
        target: Option<TupleId>,
        work: &mut UpdateWork,
    ) -> Option<Slot> {
        let target = target?;
        debug_assert_eq!(self.get(tid).prev, Some(target));
        let masked = self.get(tid).entry(slot).key.masked(self.get(target).mask());
        work.marker_touches += 1;
        let marker = match self.get(target).find(&masked) {
            Some(k) => k,
            None => {
                let k = self.get_mut(target).insert_entry(masked);
                let upstream = self.get(target).prev;
                let hint = self
                    .leave_marker(target, k, upstream, work)
                    .and_then(|kp| self.get(upstream.expect("marker has a tuple")).entry(kp).hint);
                self.get_mut(target).entry_mut(k).hint = hint;
                k
            }
        };
        let m = self.get_mut(target).entry_mut(marker);
        m.owners.push(slot);
        let pos = (m.owners.len() - 1) as u32;
        let e = self.get_mut(tid).entry_mut(slot);
        e.marker = Some(marker);
        e.marker_pos = pos;
        Some(marker)
    }

    /// Existing marker of an entry, without creating anything.
    pub fn obtain_marker(&self, tid: TupleId, slot: Slot) -> Option<Slot> {
        self.get(tid).entry(slot).marker
    }

    /// Recomputes `hint = better(rule, marker.hint)`; returns whether it changed.
    pub fn refresh_hint(&mut self, tid: TupleId, slot: Slot) -> bool {
        let t = self.get(tid);
        let e = t.entry(slot);
        let inherited = match (t.prev, e.marker) {
            (Some(p), Some(k)) => self.get(p).entry(k).hint,
            _ => None,
        };
        let hint = better(e.rule(), inherited);
        let e = self.get_mut(tid).entry_mut(slot);
        let changed = e.hint != hint;
        e.hint = hint;
        changed
    }

    /// Pushes the hint of `(tid, slot)` to its owners, and theirs, stopping
    /// wherever a recomputed hint does not change.
    pub fn report_hint(&mut self, tid: TupleId, slot: Slot, work: &mut UpdateWork) {
        let mut stack = vec![(tid, slot)];
        while let Some((t, s)) = stack.pop() {
            let Some(next) = self.get(t).next else {
                continue;
            };
            let hint = self.get(t).entry(s).hint;
            let count = self.get(t).entry(s).owners.len();
            for i in 0..count {
                let o = self.get(t).entry(s).owners[i];
                work.hint_touches += 1;
                let owner = self.get_mut(next).entry_mut(o);
                let updated = better(owner.rule(), hint);
                if updated != owner.hint {
                    owner.hint = updated;
                    stack.push((next, o));
                }
            }
        }
    }

    /// Unlinks an entry from its marker's owner list, returning the marker.
    pub(crate) fn detach(&mut self, tid: TupleId, slot: Slot) -> Option<Slot> {
        let e = self.get_mut(tid).entry_mut(slot);
        let marker = e.marker.take()?;
        let pos = e.marker_pos as usize;
        let prev = self.get(tid).prev.expect("an entry with a marker has a predecessor");
        let m = self.get_mut(prev).entry_mut(marker);
        debug_assert_eq!(m.owners[pos], slot);
        m.owners.swap_remove(pos);
        if let Some(&moved) = m.owners.get(pos) {
            self.get_mut(tid).entry_mut(moved).marker_pos = pos as u32;
        }
        Some(marker)
    }

    /// Erases `(tid, slot)` if it holds no rule and has no owners, then does
    /// the same for its marker, walking toward the chain head. Tuples whose
    /// tables become empty are appended to `emptied`.
    pub(crate) fn collect_garbage(
        &mut self,
        mut tid: TupleId,
        mut slot: Slot,
        emptied: &mut Vec<TupleId>,
        work: &mut UpdateWork,
    ) {
        loop {
            if !self.get(tid).entry(slot).is_garbage() {
                return;
            }
            let marker = self.detach(tid, slot);
            self.get_mut(tid).erase(slot);
            work.marker_touches += 1;
            if self.get(tid).is_empty() {
                emptied.push(tid);
            }
            match (marker, self.get(tid).prev) {
                (Some(k), Some(p)) => {
                    tid = p;
                    slot = k;
                }
                _ => return,
            }
        }
    }

    /// Removes an ownerless entry's claim on its marker and erases any marker
    /// trail left without rules or owners.
    pub fn delete_marker(
        &mut self,
        tid: TupleId,
        slot: Slot,
        emptied: &mut Vec<TupleId>,
        work: &mut UpdateWork,
    ) {
        debug_assert!(self.get(tid).entry(slot).owners.is_empty());
        if let (Some(k), Some(p)) = (self.detach(tid, slot), self.get(tid).prev) {
            work.marker_touches += 1;
            self.collect_garbage(p, k, emptied, work);
        }
    }
}
