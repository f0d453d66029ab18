// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Reference classifiers: an exhaustive linear scan (the ground-truth oracle)
//! and plain tuple space search.

use std::collections::{BTreeMap, HashMap};

use smallvec::SmallVec;

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::model::{better, FieldSchema, FieldVector, Mask, MatchResult, Rule, RuleTag};

/// Best match over `rules` by brute force. `probes` is the rule count.
pub fn linear_lookup<'a>(rules: impl IntoIterator<Item = &'a Rule>, key: &FieldVector) -> MatchResult {
    let mut probes = 0;
    let mut best = None;
    for r in rules {
        probes += 1;
        if r.matches(key) {
            best = better(best, Some(r.tag()));
        }
    }
    MatchResult { rule: best, probes }
}

#[derive(Debug, Clone)]
pub struct LinearScan {
    schema: FieldSchema,
    rules: Vec<Rule>,
    index: HashMap<u64, usize>,
}

impl LinearScan {
    pub fn new(schema: FieldSchema) -> Self {
        LinearScan {
            schema,
            rules: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn build(schema: FieldSchema, rules: Vec<Rule>) -> Result<Self> {
        let mut c = LinearScan::new(schema);
        for (index, r) in rules.into_iter().enumerate() {
            c.insert(r).map_err(|e| Error::Malformed { index, msg: e.to_string() })?;
        }
        Ok(c)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }
}

impl Classifier for LinearScan {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    fn lookup(&self, key: &FieldVector) -> MatchResult {
        linear_lookup(&self.rules, key)
    }

    fn insert(&mut self, rule: Rule) -> Result<()> {
        self.schema.check_rule(&rule)?;
        if self.index.contains_key(&rule.id) {
            return Err(Error::DuplicateRule(rule.id));
        }
        self.index.insert(rule.id, self.rules.len());
        self.rules.push(rule);
        Ok(())
    }

    fn remove(&mut self, rule: &Rule) -> bool {
        match self.index.get(&rule.id) {
            Some(&i) if self.rules[i] == *rule => {
                self.index.remove(&rule.id);
                self.rules.swap_remove(i);
                if let Some(moved) = self.rules.get(i) {
                    self.index.insert(moved.id, i);
                }
                true
            }
            _ => false,
        }
    }

    fn len(&self) -> usize {
        self.rules.len()
    }

    fn memory_bytes(&self) -> usize {
        self.rules.capacity() * std::mem::size_of::<Rule>()
            + self
                .rules
                .iter()
                .map(|r| r.fields.heap_bytes() + r.mask.0.heap_bytes())
                .sum::<usize>()
            + self.index.capacity() * (std::mem::size_of::<(u64, usize)>() + 1)
    }
}

type Bucket = SmallVec<[RuleTag; 1]>;
type Table = HashMap<FieldVector, Bucket, ahash::RandomState>;

/// Tuple space search: one hash table per mask, every table probed on
/// every lookup, in mask order.
#[derive(Debug, Clone)]
pub struct TupleSpace {
    schema: FieldSchema,
    tuples: BTreeMap<Mask, Table>,
    rules: HashMap<u64, Rule>,
}

impl TupleSpace {
    pub fn new(schema: FieldSchema) -> Self {
        TupleSpace {
            schema,
            tuples: BTreeMap::new(),
            rules: HashMap::new(),
        }
    }

    pub fn build(schema: FieldSchema, rules: Vec<Rule>) -> Result<Self> {
        let mut c = TupleSpace::new(schema);
        for (index, r) in rules.into_iter().enumerate() {
            c.insert(r).map_err(|e| Error::Malformed { index, msg: e.to_string() })?;
        }
        Ok(c)
    }

    pub fn tuple_count(&self) -> usize {
        self.tuples.len()
    }

    pub fn masks(&self) -> impl Iterator<Item = &Mask> {
        self.tuples.keys()
    }
}

/// One probe per tuple, no pruning.
pub fn tss_lookup<'a>(
    tuples: impl IntoIterator<Item = (&'a Mask, &'a Table)>,
    key: &FieldVector,
) -> MatchResult {
    let mut out = MatchResult::miss();
    for (mask, table) in tuples {
        out.probes += 1;
        if let Some(bucket) = table.get(&key.masked(mask)) {
            out.rule = better(out.rule, bucket.first().copied());
        }
    }
    out
}

impl Classifier for TupleSpace {
    fn name(&self) -> &'static str {
        "tss"
    }

    fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    fn lookup(&self, key: &FieldVector) -> MatchResult {
        tss_lookup(&self.tuples, key)
    }

    fn insert(&mut self, rule: Rule) -> Result<()> {
        self.schema.check_rule(&rule)?;
        if self.rules.contains_key(&rule.id) {
            return Err(Error::DuplicateRule(rule.id));
        }
        let bucket = self
            .tuples
            .entry(rule.mask.clone())
            .or_default()
            .entry(rule.fields.clone())
            .or_default();
        let tag = rule.tag();
        let at = bucket.iter().position(|r| tag.beats(r)).unwrap_or(bucket.len());
        bucket.insert(at, tag);
        self.rules.insert(rule.id, rule);
        Ok(())
    }

    fn remove(&mut self, rule: &Rule) -> bool {
        match self.rules.get(&rule.id) {
            Some(stored) if stored == rule => {}
            _ => return false,
        }
        self.rules.remove(&rule.id);
        let table = self.tuples.get_mut(&rule.mask).expect("mask registered");
        let bucket = table.get_mut(&rule.fields).expect("fields registered");
        bucket.retain(|t| *t != rule.tag());
        if bucket.is_empty() {
            table.remove(&rule.fields);
            if table.is_empty() {
                self.tuples.remove(&rule.mask);
            }
        }
        true
    }

    fn len(&self) -> usize {
        self.rules.len()
    }

    fn memory_bytes(&self) -> usize {
        let tables: usize = self
            .tuples
            .iter()
            .map(|(m, t)| {
                m.0.heap_bytes()
                    + t.capacity() * (std::mem::size_of::<(FieldVector, Bucket)>() + 1)
                    + t.keys().map(FieldVector::heap_bytes).sum::<usize>()
            })
            .sum();
        tables + self.rules.capacity() * (std::mem::size_of::<(u64, Rule)>() + 1)
    }
}
