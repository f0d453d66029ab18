// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tuplechain::{FieldSchema, FieldVector, Rule};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random prefix-mask rules on a small schema, ids from `first_id`.
pub fn prefix_rules(rng: &mut ChaCha8Rng, s: &FieldSchema, n: usize, first_id: u64) -> Vec<Rule> {
    (0..n)
        .map(|i| {
            let lens: Vec<u32> = s.widths().iter().map(|&w| rng.gen_range(0..=w)).collect();
            let mask = s.prefix_mask(&lens).unwrap();
            let fields = random_key(rng, s).masked(&mask);
            Rule { id: first_id + i as u64, priority: rng.gen_range(0..40), fields, mask }
        })
        .collect()
}

/// Random arbitrary-bit masks, for layouts prefix masks never produce.
pub fn bitmask_rules(rng: &mut ChaCha8Rng, s: &FieldSchema, n: usize, first_id: u64) -> Vec<Rule> {
    (0..n)
        .map(|i| {
            let mask = tuplechain::Mask(random_key(rng, s));
            let fields = random_key(rng, s).masked(&mask);
            Rule { id: first_id + i as u64, priority: rng.gen_range(0..40), fields, mask }
        })
        .collect()
}

pub fn random_key(rng: &mut ChaCha8Rng, s: &FieldSchema) -> FieldVector {
    let vals: Vec<u128> = s
        .widths()
        .iter()
        .map(|&w| rng.gen::<u128>() & if w == 128 { u128::MAX } else { (1 << w) - 1 })
        .collect();
    s.vector(&vals).unwrap()
}

/// Every key of a schema with at most 16 total bits.
pub fn all_keys(s: &FieldSchema) -> Vec<FieldVector> {
    assert!(s.total_bits() <= 16);
    let mut keys = vec![vec![]];
    for &w in s.widths() {
        keys = keys
            .into_iter()
            .flat_map(|k: Vec<u128>| (0..1u128 << w).map(move |v| [k.clone(), vec![v]].concat()))
            .collect();
    }
    keys.iter().map(|k| s.vector(k).unwrap()).collect()
}

/// The six two-field rules of the running example, ids and priorities 1..=6.
pub fn example_rules(s: &FieldSchema) -> Vec<Rule> {
    let rows: [((u128, u128), (u128, u128)); 6] = [
        ((0x00, 0x80), (0x80, 0xC0)),
        ((0x00, 0xC0), (0xA0, 0xF0)),
        ((0x40, 0xC0), (0xA8, 0xFC)),
        ((0x20, 0xE0), (0xA8, 0xF8)),
        ((0x48, 0xF8), (0xA8, 0xFC)),
        ((0x21, 0xFF), (0xA8, 0xFF)),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(a, b))| Rule::from_pairs(s, i as u64 + 1, i as i64 + 1, &[a, b]).unwrap())
        .collect()
}
