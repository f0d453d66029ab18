// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

mod common;

use std::collections::HashMap;

use rand::Rng;
use tuplechain::baseline::linear_lookup;
use tuplechain::etc::group_chains;
use tuplechain::graph::{min_path_cover, TupleGraph};
use tuplechain::{Classifier, ExtendedTupleChain, FieldSchema, Rule, TupleChain};

#[test]
fn running_example_shares_one_head_entry() {
    let s = FieldSchema::uniform(2, 8).unwrap();
    let rules = common::example_rules(&s);
    let etc = ExtendedTupleChain::build(s.clone(), rules.clone(), 2).unwrap();
    etc.audit().unwrap();
    let key = s.vector(&[0x20, 0xA8]).unwrap();
    let got = etc.lookup(&key);
    assert_eq!(got.rule, linear_lookup(&rules, &key).rule);
    // Only the head entries that match were searched.
    let searched: usize = etc
        .groups()
        .iter()
        .filter(|g| g.locals().any(|(k, _)| *k == key.masked(g.head_mask())))
        .count();
    assert!(searched >= 1);
    assert!(got.probes as usize >= etc.group_count());
}

#[test]
fn grouping_keeps_heads_inside_members() {
    for seed in 0..30 {
        let mut rng = common::rng(seed);
        let s = FieldSchema::uniform(3, 8).unwrap();
        let rules = common::prefix_rules(&mut rng, &s, 200, 0);
        let mut masks: Vec<_> = rules.iter().map(|r| r.mask.clone()).collect();
        masks.sort();
        masks.dedup();
        let g = TupleGraph::build(masks).unwrap();
        let pc = min_path_cover(&g).unwrap();
        let bits = rng.gen_range(0..=24);
        let plans = group_chains(&pc, g.vertices(), bits);
        assert!(plans.len() <= pc.len());
        let members: usize = plans.iter().map(|p| p.members.len()).sum();
        assert_eq!(members, g.vertex_count());
        for p in &plans {
            let and = p.members.iter().skip(1).fold(p.members[0].clone(), |a, m| a.intersect(m));
            assert_eq!(p.head_mask, and);
            let chains: std::collections::HashSet<usize> = p
                .members
                .iter()
                .map(|m| pc.chains.iter().position(|c| c.iter().any(|&v| g.vertices()[v] == *m)).unwrap())
                .collect();
            assert!(chains.len() == 1 || p.head_mask.popcount() >= bits);
        }
        if bits == 24 {
            assert_eq!(plans.len(), pc.len());
        }
    }
}

#[test]
fn equivalent_to_flat_chain_and_oracle() {
    for (seed, bits) in [(1u64, 0u32), (2, 2), (3, 4), (4, 8), (5, 16)] {
        let mut rng = common::rng(seed);
        let s = FieldSchema::uniform(2, 8).unwrap();
        let rules = common::prefix_rules(&mut rng, &s, 500, 0);
        let tc = TupleChain::build(s.clone(), rules.clone()).unwrap();
        let etc = ExtendedTupleChain::build(s.clone(), rules.clone(), bits).unwrap();
        etc.audit().unwrap();
        assert!(etc.group_count() <= tc.chains().len());
        for k in common::all_keys(&s).iter().step_by(7) {
            let want = linear_lookup(&rules, k).rule;
            assert_eq!(tc.lookup(k).rule, want);
            assert_eq!(etc.lookup(k).rule, want);
        }
    }
}

#[test]
fn update_fuzz_parity_with_flat_chain() {
    let s = FieldSchema::uniform(3, 5).unwrap();
    let mut rng = common::rng(77);
    let pool = common::prefix_rules(&mut rng, &s, 300, 0);
    let base: Vec<Rule> = pool[..100].to_vec();
    let mut etc = ExtendedTupleChain::build(s.clone(), base.clone(), 3).unwrap();
    let mut tc = TupleChain::build(s.clone(), base.clone()).unwrap();
    let mut live: HashMap<u64, Rule> = base.into_iter().map(|r| (r.id, r)).collect();
    for step in 0..3000 {
        let r = &pool[rng.gen_range(0..pool.len())];
        if live.remove(&r.id).is_some() {
            assert!(etc.remove(r) && tc.remove(r));
        } else {
            etc.insert(r.clone()).unwrap();
            tc.insert(r.clone()).unwrap();
            live.insert(r.id, r.clone());
        }
        if step % 150 == 0 {
            etc.audit().unwrap_or_else(|v| panic!("step {step}: {v}"));
            for _ in 0..100 {
                let k = common::random_key(&mut rng, &s);
                let want = linear_lookup(live.values(), &k).rule;
                assert_eq!(etc.lookup(&k).rule, want);
                assert_eq!(tc.lookup(&k).rule, want);
            }
        }
    }
    for r in live.values() {
        assert!(etc.remove(r));
    }
    assert_eq!(etc.group_count(), 0);
    assert!(etc.is_empty());
}
