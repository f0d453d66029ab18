// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! The TupleChain classifier: a mask registry, a set of chains, and full
//! table lookup and update on top of them.

use std::collections::HashMap;

use serde::Serialize;

use crate::audit::{AuditResult, Violation, ViolationKind};
use crate::chain::{search_depth, Chain};
use crate::error::{Error, Result};
use crate::graph::{self, TupleGraph};
use crate::model::{FieldSchema, FieldVector, Mask, MatchResult, Rule};
use crate::tuple::{Tuple, TupleArena, TupleId, UpdateWork};

/// Common surface of every classifier in the crate.
pub trait Classifier {
    fn name(&self) -> &'static str;
    fn schema(&self) -> &FieldSchema;
    fn lookup(&self, key: &FieldVector) -> MatchResult;
    fn insert(&mut self, rule: Rule) -> Result<()>;
    /// Removes a rule equal to `rule` (same id, priority, fields and mask).
    fn remove(&mut self, rule: &Rule) -> bool;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Structural byte estimate of the lookup structure.
    fn memory_bytes(&self) -> usize;
    fn audit(&self) -> AuditResult {
        Ok(())
    }
}

/// Lookup-cost bounds for a chain layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeBound {
    /// Σ_i (1 + floor(log2 m_i)).
    pub per_chain: usize,
    /// l · (1 + log2(m / l)).
    pub closed_form: f64,
}

impl ProbeBound {
    pub fn from_lengths(lengths: &[usize]) -> Self {
        let per_chain = lengths.iter().map(|&m| search_depth(m)).sum();
        let l = lengths.iter().filter(|&&m| m > 0).count();
        let m: usize = lengths.iter().sum();
        ProbeBound {
            per_chain,
            closed_form: closed_form_bound(m, l),
        }
    }

    /// True if `probes` respects both bounds.
    pub fn admits(&self, probes: u32) -> bool {
        probes as usize <= self.per_chain && probes as f64 <= self.closed_form + 1e-9
    }
}

/// `l · (1 + log2(m / l))`, zero when there are no chains.
pub fn closed_form_bound(m: usize, l: usize) -> f64 {
    if l == 0 {
        return 0.0;
    }
    l as f64 * (1.0 + (m as f64 / l as f64).log2())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StructureStats {
    /// n
    pub rule_count: usize,
    /// m
    pub tuple_count: usize,
    /// l
    pub chain_count: usize,
    /// n'
    pub max_chain_rules: usize,
    /// m'
    pub max_chain_tuples: usize,
    /// m_i for each chain
    pub chain_tuples: Vec<usize>,
    pub chain_rules: Vec<usize>,
    pub chain_entries: Vec<usize>,
    pub entry_total: usize,
    pub owner_link_total: usize,
    pub memory_bytes: usize,
}

impl StructureStats {
    pub fn probe_bound(&self) -> ProbeBound {
        ProbeBound::from_lengths(&self.chain_tuples)
    }

    /// Whether the layout sits in the `l < m/2` regime where the closed-form
    /// bound is below a full tuple scan.
    pub fn beats_tuple_scan(&self) -> bool {
        2 * self.chain_count < self.tuple_count
    }
}

/// TupleChain classifier.
#[derive(Debug, Clone)]
pub struct TupleChain {
    schema: FieldSchema,
    arena: TupleArena,
    registry: HashMap<Mask, TupleId>,
    chains: Vec<Chain>,
    rules: HashMap<u64, Rule>,
}

impl TupleChain {
    pub fn new(schema: FieldSchema) -> Self {
        TupleChain {
            schema,
            arena: TupleArena::new(),
            registry: HashMap::new(),
            chains: Vec::new(),
            rules: HashMap::new(),
        }
    }

    /// Builds a classifier whose chains are a minimum path cover of the
    /// tuple graph, then fills tuples head to tail.
    pub fn build(schema: FieldSchema, rules: Vec<Rule>) -> Result<Self> {
        Self::validate(&schema, &rules)?;
        let mut masks: Vec<Mask> = rules.iter().map(|r| r.mask.clone()).collect();
        masks.sort();
        masks.dedup();
        let g = TupleGraph::build(masks)?;
        let cover = graph::min_path_cover(&g)?;
        let layout = cover
            .chains
            .iter()
            .map(|p| p.iter().map(|&v| g.vertices()[v].clone()).collect())
            .collect();
        Self::with_layout(schema, layout, rules)
    }

    /// Builds with a caller-chosen chain layout. Every chain must be ordered
    /// by strict mask containment, and every rule mask must appear exactly
    /// once in the layout.
    pub fn with_layout(schema: FieldSchema, layout: Vec<Vec<Mask>>, rules: Vec<Rule>) -> Result<Self> {
        Self::validate(&schema, &rules)?;
        let mut by_mask: HashMap<Mask, Vec<Rule>> = HashMap::new();
        for rule in rules {
            by_mask.entry(rule.mask.clone()).or_default().push(rule);
        }

        let mut tc = TupleChain::new(schema);
        for path in &layout {
            let cid = tc.chains.len();
            tc.chains.push(Chain::new(cid));
            for (pos, mask) in path.iter().enumerate() {
                if !by_mask.contains_key(mask) || tc.registry.contains_key(mask) {
                    return Err(Error::Usage(format!(
                        "layout mask {} is unused or repeated",
                        tc.schema.display(&mask.0)
                    )));
                }
                let tid = tc.arena.alloc(Tuple::new(mask.clone()));
                tc.chains[cid].insert_tuple(&mut tc.arena, tid, pos)?;
                tc.registry.insert(mask.clone(), tid);
            }
        }
        if tc.registry.len() != by_mask.len() {
            return Err(Error::Usage("layout does not cover every rule mask".into()));
        }
        for path in &layout {
            for mask in path {
                let tid = tc.registry[mask];
                let cid = tc.arena.get(tid).chain;
                for rule in by_mask.remove(mask).expect("every tuple has rules") {
                    let inserted =
                        tc.chains[cid].insert_rule(&mut tc.arena, tid, rule.tag(), &rule.fields);
                    debug_assert!(inserted);
                    tc.rules.insert(rule.id, rule);
                }
            }
        }
        Ok(tc)
    }

    fn validate(schema: &FieldSchema, rules: &[Rule]) -> Result<()> {
        let mut ids = std::collections::HashSet::with_capacity(rules.len());
        for (index, rule) in rules.iter().enumerate() {
            schema
                .check_rule(rule)
                .map_err(|e| Error::Malformed { index, msg: e.to_string() })?;
            if !ids.insert(rule.id) {
                return Err(Error::Malformed {
                    index,
                    msg: format!("duplicate rule id {}", rule.id),
                });
            }
        }
        Ok(())
    }

    /// Re-derives the chain layout from scratch.
    pub fn rebuild(&mut self) -> Result<()> {
        let rules: Vec<Rule> = self.rules.values().cloned().collect();
        *self = TupleChain::build(self.schema.clone(), rules)?;
        Ok(())
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn arena(&self) -> &TupleArena {
        &self.arena
    }

    pub fn tuple_of(&self, mask: &Mask) -> Option<TupleId> {
        self.registry.get(mask).copied()
    }

    pub fn rule(&self, id: u64) -> Option<&Rule> {
        self.rules.get(&id)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    /// Σ_i (1 + floor(log2 m_i)) and the closed form for the current layout.
    pub fn probe_bound(&self) -> ProbeBound {
        let lengths: Vec<usize> = self.chains.iter().map(Chain::tuple_count).collect();
        ProbeBound::from_lengths(&lengths)
    }

    /// Marker/hint work summed over all chains.
    pub fn work(&self) -> UpdateWork {
        self.chains.iter().fold(UpdateWork::default(), |acc, c| UpdateWork {
            marker_touches: acc.marker_touches + c.work().marker_touches,
            hint_touches: acc.hint_touches + c.work().hint_touches,
        })
    }

    pub fn reset_work(&mut self) {
        for c in &mut self.chains {
            c.reset_work();
        }
    }

    /// Picks the chain for a new tuple: the shortest chain that can host it,
    /// then the one with fewer rules; a fresh chain if none can.
    pub fn place_tuple(&self, mask: &Mask) -> (usize, usize) {
        let best = self
            .chains
            .iter()
            .enumerate()
            .filter_map(|(cid, c)| c.can_host(&self.arena, mask).map(|pos| (cid, pos, c)))
            .min_by_key(|(cid, _, c)| (c.tuple_count(), c.rule_count(), *cid));
        match best {
            Some((cid, pos, _)) => (cid, pos),
            None => (self.chains.len(), 0),
        }
    }

    fn find_or_insert_tuple(&mut self, mask: &Mask) -> Result<TupleId> {
        if let Some(&tid) = self.registry.get(mask) {
            return Ok(tid);
        }
        let (cid, pos) = self.place_tuple(mask);
        if cid == self.chains.len() {
            self.chains.push(Chain::new(cid));
        }
        let tid = self.arena.alloc(Tuple::new(mask.clone()));
        self.chains[cid].insert_tuple(&mut self.arena, tid, pos)?;
        self.registry.insert(mask.clone(), tid);
        Ok(tid)
    }

    fn drop_tuple(&mut self, tid: TupleId) {
        let cid = self.arena.get(tid).chain;
        self.chains[cid]
            .remove_tuple(&mut self.arena, tid)
            .expect("emptied tuples are removable");
        let t = self.arena.release(tid);
        self.registry.remove(t.mask());
        if self.chains[cid].is_empty() {
            self.chains.swap_remove(cid);
            if cid < self.chains.len() {
                self.chains[cid].id = cid;
                for &t in self.chains[cid].order() {
                    self.arena.get_mut(t).chain = cid;
                }
            }
        }
    }

    pub fn stats(&self) -> StructureStats {
        let chain_tuples: Vec<usize> = self.chains.iter().map(Chain::tuple_count).collect();
        let chain_rules: Vec<usize> = self.chains.iter().map(Chain::rule_count).collect();
        let chain_entries: Vec<usize> =
            self.chains.iter().map(|c| c.entry_total(&self.arena)).collect();
        StructureStats {
            rule_count: self.rules.len(),
            tuple_count: self.arena.len(),
            chain_count: self.chains.len(),
            max_chain_rules: chain_rules.iter().copied().max().unwrap_or(0),
            max_chain_tuples: chain_tuples.iter().copied().max().unwrap_or(0),
            entry_total: chain_entries.iter().sum(),
            owner_link_total: self.chains.iter().map(|c| c.owner_links(&self.arena)).sum(),
            memory_bytes: self.memory_bytes(),
            chain_tuples,
            chain_rules,
            chain_entries,
        }
    }

    /// Test hook: overwrites the hint of some stored entry.
    #[doc(hidden)]
    pub fn inject_hint_fault(&mut self) -> bool {
        let target = self
            .arena
            .iter()
            .find_map(|(tid, t)| t.entries().next().map(|(s, e)| (tid, s, e.hint())));
        match target {
            Some((tid, slot, hint)) => {
                let wrong = match hint {
                    Some(h) => Some(crate::model::RuleTag { priority: h.priority.wrapping_add(1), id: h.id }),
                    None => Some(crate::model::RuleTag { priority: 0, id: u64::MAX }),
                };
                self.arena.get_mut(tid).corrupt_hint(slot, wrong);
                true
            }
            None => false,
        }
    }
}

impl Classifier for TupleChain {
    fn name(&self) -> &'static str {
        "tc"
    }

    fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    fn lookup(&self, key: &FieldVector) -> MatchResult {
        self.chains
            .iter()
            .fold(MatchResult::miss(), |acc, c| acc.merge(c.lookup(&self.arena, key)))
    }

    fn insert(&mut self, rule: Rule) -> Result<()> {
        self.schema.check_rule(&rule)?;
        if self.rules.contains_key(&rule.id) {
            return Err(Error::DuplicateRule(rule.id));
        }
        let tid = self.find_or_insert_tuple(&rule.mask)?;
        let cid = self.arena.get(tid).chain;
        let inserted = self.chains[cid].insert_rule(&mut self.arena, tid, rule.tag(), &rule.fields);
        debug_assert!(inserted);
        self.rules.insert(rule.id, rule);
        Ok(())
    }

    fn remove(&mut self, rule: &Rule) -> bool {
        match self.rules.get(&rule.id) {
            Some(stored) if stored == rule => {}
            _ => return false,
        }
        let Some(&tid) = self.registry.get(&rule.mask) else {
            return false;
        };
        let cid = self.arena.get(tid).chain;
        let Some(emptied) =
            self.chains[cid].delete_rule(&mut self.arena, tid, rule.tag(), &rule.fields)
        else {
            return false;
        };
        self.rules.remove(&rule.id);
        for t in emptied {
            self.drop_tuple(t);
        }
        true
    }

    fn len(&self) -> usize {
        self.rules.len()
    }

    fn memory_bytes(&self) -> usize {
        let registry = self.registry.capacity()
            * (std::mem::size_of::<(Mask, TupleId)>() + 1)
            + self.registry.keys().map(|m| m.0.heap_bytes()).sum::<usize>();
        let chains: usize = self
            .chains
            .iter()
            .map(|c| std::mem::size_of::<Chain>() + c.order().len() * std::mem::size_of::<TupleId>())
            .sum();
        let rules = self.rules.capacity() * (std::mem::size_of::<(u64, Rule)>() + 1)
            + self
                .rules
                .values()
                .map(|r| r.fields.heap_bytes() + r.mask.0.heap_bytes())
                .sum::<usize>();
        std::mem::size_of::<Self>() + self.arena.memory_bytes() + registry + chains + rules
    }

    fn audit(&self) -> AuditResult {
        let mut on_chains = 0;
        for (cid, c) in self.chains.iter().enumerate() {
            if c.id != cid {
                return Err(Violation::new(format!("chain {cid}"), ViolationKind::Registry(
                    format!("chain records id {}", c.id),
                )));
            }
            if c.is_empty() {
                return Err(Violation::new(format!("chain {cid}"), ViolationKind::Registry(
                    "empty chain kept alive".into(),
                )));
            }
            c.audit(&self.arena)?;
            on_chains += c.tuple_count();
        }
        if on_chains != self.arena.len() || self.registry.len() != self.arena.len() {
            return Err(Violation::new("registry", ViolationKind::Registry(format!(
                "{} tuples live, {} on chains, {} registered",
                self.arena.len(),
                on_chains,
                self.registry.len()
            ))));
        }
        for (mask, &tid) in &self.registry {
            if self.arena.get(tid).mask() != mask {
                return Err(Violation::new(
                    format!("registry tuple {tid}"),
                    ViolationKind::Registry("registered under a different mask".into()),
                ));
            }
        }
        let stored: usize = self.chains.iter().map(Chain::rule_count).sum();
        if stored != self.rules.len() {
            return Err(Violation::new("registry", ViolationKind::Registry(format!(
                "{} rules indexed, {stored} stored in chains",
                self.rules.len()
            ))));
        }
        for rule in self.rules.values() {
            let held = self.registry.get(&rule.mask).is_some_and(|&tid| {
                let t = self.arena.get(tid);
                t.find(&rule.fields)
                    .is_some_and(|s| t.entry(s).rules().contains(&rule.tag()))
            });
            if !held {
                return Err(Violation::new(
                    format!("rule {}", rule.id),
                    ViolationKind::Registry("indexed rule not found in its tuple".into()),
                ));
            }
        }
        Ok(())
    }
}
