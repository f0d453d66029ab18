// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Extended TupleChain: chains merged into groups behind a head tuple.
//!
//! A group's head mask is the AND of its member masks, so any rule of the
//! group that matches a key also puts the key in the rule's head entry. A
//! lookup probes each head once and searches only the local TupleChain
//! behind the entry it hits.

use std::collections::HashMap;

use serde::Serialize;

use crate::audit::{AuditResult, Violation, ViolationKind};
use crate::classifier::{Classifier, TupleChain};
use crate::error::{Error, Result};
use crate::graph::{self, PathCover, TupleGraph};
use crate::model::{FieldSchema, FieldVector, Mask, MatchResult, Rule};

/// Default minimum number of set bits in a merged head mask.
pub const DEFAULT_MIN_HEAD_BITS: u32 = 4;

/// Output of [`group_chains`]: a head mask and the masks routed behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPlan {
    pub head_mask: Mask,
    pub members: Vec<Mask>,
}

/// Greedy pairwise merging of the chains of `pc`.
///
/// Candidate pairs are ranked by how many tuple-graph edges cross between
/// them, then by the popcount of the merged head mask. A merge is taken only
/// if the merged head keeps at least `min_head_bits` bits.
pub fn group_chains(pc: &PathCover, masks: &[Mask], min_head_bits: u32) -> Vec<GroupPlan> {
    let n = pc.chains.len();
    let mut heads: Vec<Option<Mask>> = pc
        .chains
        .iter()
        .map(|c| {
            let mut it = c.iter().map(|&v| masks[v].clone());
            let first = it.next().expect("paths are non-empty");
            Some(it.fold(first, |acc, m| acc.intersect(&m)))
        })
        .collect();
    let mut members: Vec<Vec<Mask>> = pc
        .chains
        .iter()
        .map(|c| c.iter().map(|&v| masks[v].clone()).collect())
        .collect();

    let mut cross = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let count = members[i]
                .iter()
                .map(|a| members[j].iter().filter(|b| a.comparable(b)).count())
                .sum();
            cross[i][j] = count;
            cross[j][i] = count;
        }
    }

    loop {
        let mut best: Option<(usize, u32, usize, usize)> = None;
        for i in 0..n {
            let Some(hi) = &heads[i] else { continue };
            for j in i + 1..n {
                let Some(hj) = &heads[j] else { continue };
                let bits = hi.intersect(hj).popcount();
                if bits < min_head_bits {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((c, b, _, _)) => (cross[i][j], bits) > (c, b),
                };
                if better {
                    best = Some((cross[i][j], bits, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else { break };
        let hj = heads[j].take().expect("live group");
        heads[i] = heads[i].take().map(|hi| hi.intersect(&hj));
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        for k in 0..n {
            cross[i][k] += cross[j][k];
            cross[k][i] = cross[i][k];
        }
        cross[i][i] = 0;
    }

    heads
        .into_iter()
        .zip(members)
        .filter_map(|(h, m)| h.map(|head_mask| GroupPlan { head_mask, members: m }))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Group {
    head_mask: Mask,
    members: HashMap<Mask, usize>,
    head: HashMap<FieldVector, TupleChain, ahash::RandomState>,
    rule_count: usize,
}

impl Group {
    fn new(head_mask: Mask) -> Self {
        Group {
            head_mask,
            members: HashMap::new(),
            head: HashMap::default(),
            rule_count: 0,
        }
    }

    pub fn head_mask(&self) -> &Mask {
        &self.head_mask
    }

    pub fn member_masks(&self) -> impl Iterator<Item = &Mask> {
        self.members.keys()
    }

    pub fn head_entries(&self) -> usize {
        self.head.len()
    }

    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Local classifiers, one per head entry.
    pub fn locals(&self) -> impl Iterator<Item = (&FieldVector, &TupleChain)> {
        self.head.iter()
    }

    #[inline]
    fn lookup(&self, key: &FieldVector) -> MatchResult {
        let probe = MatchResult {
            rule: None,
            probes: 1,
        };
        match self.head.get(&key.masked(&self.head_mask)) {
            Some(local) => probe.merge(local.lookup(key)),
            None => probe,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EtcStats {
    pub rule_count: usize,
    pub group_count: usize,
    pub head_entries: usize,
    pub max_local_rules: usize,
    pub max_local_chains: usize,
    pub max_local_tuples: usize,
    pub local_entry_total: usize,
    pub memory_bytes: usize,
}

/// Extended TupleChain classifier.
#[derive(Debug, Clone)]
pub struct ExtendedTupleChain {
    schema: FieldSchema,
    min_head_bits: u32,
    groups: Vec<Group>,
    routes: HashMap<Mask, usize>,
    rules: HashMap<u64, Rule>,
}

impl ExtendedTupleChain {
    pub fn new(schema: FieldSchema, min_head_bits: u32) -> Self {
        ExtendedTupleChain {
            schema,
            min_head_bits,
            groups: Vec::new(),
            routes: HashMap::new(),
            rules: HashMap::new(),
        }
    }

    /// Min path cover over all masks, greedy grouping, then one local
    /// TupleChain per head entry.
    pub fn build(schema: FieldSchema, rules: Vec<Rule>, min_head_bits: u32) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(rules.len());
        let mut masks = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (index, rule) in rules.iter().enumerate() {
            schema
                .check_rule(rule)
                .map_err(|e| Error::Malformed { index, msg: e.to_string() })?;
            if by_id.insert(rule.id, ()).is_some() {
                return Err(Error::Malformed {
                    index,
                    msg: format!("duplicate rule id {}", rule.id),
                });
            }
            if seen.insert(rule.mask.clone()) {
                masks.push(rule.mask.clone());
            }
        }
        masks.sort();
        let g = TupleGraph::build(masks)?;
        let cover = graph::min_path_cover(&g)?;
        let plans = group_chains(&cover, g.vertices(), min_head_bits);

        let mut etc = ExtendedTupleChain::new(schema.clone(), min_head_bits);
        for plan in plans {
            let gid = etc.groups.len();
            for m in &plan.members {
                etc.routes.insert(m.clone(), gid);
            }
            etc.groups.push(Group::new(plan.head_mask));
        }
        let mut buckets: Vec<HashMap<FieldVector, Vec<Rule>>> = vec![HashMap::new(); etc.groups.len()];
        for rule in rules {
            let gid = etc.routes[&rule.mask];
            let group = &mut etc.groups[gid];
            *group.members.entry(rule.mask.clone()).or_default() += 1;
            group.rule_count += 1;
            let key = rule.fields.masked(&group.head_mask);
            buckets[gid].entry(key).or_default().push(rule.clone());
            etc.rules.insert(rule.id, rule);
        }
        for (group, bucket) in etc.groups.iter_mut().zip(buckets) {
            for (key, local_rules) in bucket {
                group.head.insert(key, TupleChain::build(schema.clone(), local_rules)?);
            }
        }
        Ok(etc)
    }

    pub fn min_head_bits(&self) -> u32 {
        self.min_head_bits
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn rule(&self, id: u64) -> Option<&Rule> {
        self.rules.get(&id)
    }

    /// Group a rule with mask `mask` is routed to, if any can take it.
    fn route(&self, mask: &Mask) -> Option<usize> {
        if let Some(&gid) = self.routes.get(mask) {
            return Some(gid);
        }
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.head_mask.is_subset_of(mask))
            .max_by_key(|(gid, g)| (g.head_mask.popcount(), std::cmp::Reverse(*gid)))
            .map(|(gid, _)| gid)
    }

    pub fn stats(&self) -> EtcStats {
        let locals = || self.groups.iter().flat_map(|g| g.head.values());
        EtcStats {
            rule_count: self.rules.len(),
            group_count: self.groups.len(),
            head_entries: self.groups.iter().map(|g| g.head.len()).sum(),
            max_local_rules: locals().map(|l| l.len()).max().unwrap_or(0),
            max_local_chains: locals().map(|l| l.chains().len()).max().unwrap_or(0),
            max_local_tuples: locals().map(|l| l.arena().len()).max().unwrap_or(0),
            local_entry_total: locals().map(|l| l.stats().entry_total).sum(),
            memory_bytes: self.memory_bytes(),
        }
    }

    /// Test hook: corrupts one hint inside some local classifier.
    #[doc(hidden)]
    pub fn inject_hint_fault(&mut self) -> bool {
        self.groups
            .iter_mut()
            .flat_map(|g| g.head.values_mut())
            .any(|l| l.inject_hint_fault())
    }
}

impl Classifier for ExtendedTupleChain {
    fn name(&self) -> &'static str {
        "etc"
    }

    fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    fn lookup(&self, key: &FieldVector) -> MatchResult {
        self.groups
            .iter()
            .fold(MatchResult::miss(), |acc, g| acc.merge(g.lookup(key)))
    }

    fn insert(&mut self, rule: Rule) -> Result<()> {
        self.schema.check_rule(&rule)?;
        if self.rules.contains_key(&rule.id) {
            return Err(Error::DuplicateRule(rule.id));
        }
        let gid = match self.route(&rule.mask) {
            Some(gid) => gid,
            None => {
                self.groups.push(Group::new(rule.mask.clone()));
                self.groups.len() - 1
            }
        };
        self.routes.insert(rule.mask.clone(), gid);
        let group = &mut self.groups[gid];
        let key = rule.fields.masked(&group.head_mask);
        group
            .head
            .entry(key)
            .or_insert_with(|| TupleChain::new(self.schema.clone()))
            .insert(rule.clone())?;
        *group.members.entry(rule.mask.clone()).or_default() += 1;
        group.rule_count += 1;
        self.rules.insert(rule.id, rule);
        Ok(())
    }

    fn remove(&mut self, rule: &Rule) -> bool {
        match self.rules.get(&rule.id) {
            Some(stored) if stored == rule => {}
            _ => return false,
        }
        let gid = self.routes[&rule.mask];
        let group = &mut self.groups[gid];
        let key = rule.fields.masked(&group.head_mask);
        let Some(local) = group.head.get_mut(&key) else {
            return false;
        };
        if !local.remove(rule) {
            return false;
        }
        if local.is_empty() {
            group.head.remove(&key);
        }
        let count = group.members.get_mut(&rule.mask).expect("member mask");
        *count -= 1;
        if *count == 0 {
            group.members.remove(&rule.mask);
            self.routes.remove(&rule.mask);
        }
        group.rule_count -= 1;
        self.rules.remove(&rule.id);

        if self.groups[gid].rule_count == 0 {
            self.groups.swap_remove(gid);
            if gid < self.groups.len() {
                for m in self.groups[gid].members.keys() {
                    self.routes.insert(m.clone(), gid);
                }
            }
        }
        true
    }

    fn len(&self) -> usize {
        self.rules.len()
    }

    fn memory_bytes(&self) -> usize {
        let groups: usize = self
            .groups
            .iter()
            .map(|g| {
                std::mem::size_of::<Group>()
                    + g.members.capacity() * (std::mem::size_of::<(Mask, usize)>() + 1)
                    + g.head.capacity() * (std::mem::size_of::<(FieldVector, TupleChain)>() + 1)
                    + g
                        .head
                        .iter()
                        .map(|(k, l)| k.heap_bytes() + l.memory_bytes() - std::mem::size_of::<TupleChain>())
                        .sum::<usize>()
            })
            .sum();
        let rules = self.rules.capacity() * (std::mem::size_of::<(u64, Rule)>() + 1)
            + self
                .rules
                .values()
                .map(|r| r.fields.heap_bytes() + r.mask.0.heap_bytes())
                .sum::<usize>();
        let routes = self.routes.capacity() * (std::mem::size_of::<(Mask, usize)>() + 1);
        std::mem::size_of::<Self>() + groups + rules + routes
    }

    fn audit(&self) -> AuditResult {
        let mut total = 0;
        for (gid, g) in self.groups.iter().enumerate() {
            let here = format!("group {gid}");
            for (m, &count) in &g.members {
                if !g.head_mask.is_subset_of(m) {
                    return Err(Violation::new(&here, ViolationKind::Group(
                        "head mask is not contained in a member mask".into(),
                    )));
                }
                if count == 0 || self.routes.get(m) != Some(&gid) {
                    return Err(Violation::new(&here, ViolationKind::Group(
                        "member mask not routed to its group".into(),
                    )));
                }
            }
            let mut rules = 0;
            for (key, local) in &g.head {
                let at = format!("{here} head {key:?}");
                if !key.is_canonical(&g.head_mask) {
                    return Err(Violation::new(at, ViolationKind::NonCanonicalKey));
                }
                if local.is_empty() {
                    return Err(Violation::new(at, ViolationKind::EmptyEntry));
                }
                local
                    .audit()
                    .map_err(|v| Violation::new(format!("{at} / {}", v.location), v.kind))?;
                for r in local.rules() {
                    if r.fields.masked(&g.head_mask) != *key || !g.members.contains_key(&r.mask) {
                        return Err(Violation::new(at, ViolationKind::Group(format!(
                            "rule {} filed under the wrong head entry",
                            r.id
                        ))));
                    }
                }
                rules += local.len();
            }
            if rules != g.rule_count || g.members.values().sum::<usize>() != rules {
                return Err(Violation::new(here, ViolationKind::Counters(format!(
                    "group counts {} rules, locals hold {rules}",
                    g.rule_count
                ))));
            }
            total += rules;
        }
        if total != self.rules.len() {
            return Err(Violation::new("etc", ViolationKind::Counters(format!(
                "{} rules indexed, {total} stored",
                self.rules.len()
            ))));
        }
        Ok(())
    }
}
