// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Synthetic rule sets, traces and update streams. Everything here is a pure
//! function of its seed and parameters.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::TupleSpace;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::model::{prefix_bits, FieldSchema, FieldVector, Mask, Rule};
use crate::workload::classbench::RangeRule;
use crate::workload::generic::trace_of;
use crate::workload::{Format, RuleSetFile, Trace, UpdateOp, UpdateStream};

/// Shape of a synthetic rule set.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleProfile {
    /// Distinct masks (tuples) to produce; capped at the rule count.
    pub masks: usize,
    /// Target fraction of mask pairs related by containment. `None` draws
    /// independent random prefix masks instead.
    pub density: Option<f64>,
    /// Zipf exponent of the rules-per-mask distribution; 0 is uniform.
    pub skew: f64,
}

impl TupleProfile {
    pub fn new(masks: usize) -> Self {
        TupleProfile { masks, density: None, skew: 0.0 }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = Some(density);
        self
    }

    pub fn with_skew(mut self, skew: f64) -> Self {
        self.skew = skew;
        self
    }
}

fn field_limit(width: u32) -> u128 {
    if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

pub(crate) fn random_vector(rng: &mut impl Rng, schema: &FieldSchema) -> FieldVector {
    let vals: Vec<u128> = schema.widths().iter().map(|&w| rng.gen::<u128>() & field_limit(w)).collect();
    schema.vector(&vals).expect("values fit their widths")
}

fn random_masks(rng: &mut impl Rng, schema: &FieldSchema, want: usize) -> Vec<Mask> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(want);
    let mut push = |m: Mask, out: &mut Vec<Mask>| {
        if seen.insert(m.clone()) {
            out.push(m);
        }
    };
    // Prefix masks first; arbitrary bit masks once prefixes run dry.
    for _ in 0..want.saturating_mul(50) {
        if out.len() == want {
            break;
        }
        let lens: Vec<u32> = schema.widths().iter().map(|&w| rng.gen_range(0..=w)).collect();
        push(schema.prefix_mask(&lens).expect("lengths fit"), &mut out);
    }
    while out.len() < want {
        push(Mask(random_vector(rng, schema)), &mut out);
    }
    out
}

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Smallest `b` whose middle binomial coefficient reaches `c`.
fn antichain_bits(c: usize) -> u32 {
    let mut b = 0u32;
    while binomial(b, b / 2) < c as u128 {
        b += 1;
    }
    b
}

fn binomial(n: u32, k: u32) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn even_sizes(m: usize, c: usize) -> Vec<usize> {
    (0..c).map(|i| m / c + usize::from(i < m % c)).collect()
}

/// Masks split into columns: nested within a column, incomparable across
/// columns. The column count is picked so the fraction of comparable pairs
/// lands as close to `density` as the schema width allows.
fn column_masks(rng: &mut impl Rng, schema: &FieldSchema, m: usize, density: f64) -> Option<Vec<Mask>> {
    let total = schema.total_bits() as usize;
    let pairs = choose2(m);
    let best = (1..=m)
        .filter_map(|c| {
            let sizes = even_sizes(m, c);
            let b = antichain_bits(c) as usize;
            let longest = sizes[0];
            (b + longest <= total + 1).then(|| {
                let d = if pairs == 0 { 0.0 } else {
                    sizes.iter().map(|&s| choose2(s)).sum::<usize>() as f64 / pairs as f64
                };
                ((d - density).abs(), c, b, sizes)
            })
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))?;
    let (_, c, b, sizes) = best;

    // Bit positions, most significant bit of field 0 first.
    let positions: Vec<(usize, u32)> = schema
        .widths()
        .iter()
        .enumerate()
        .flat_map(|(f, &w)| (0..w).rev().map(move |k| (f, k)))
        .collect();
    let (growth, private) = positions.split_at(total - b);

    let half = b / 2;
    let mut patterns: Vec<Vec<usize>> = subsets(b, half);
    patterns.shuffle(rng);

    let mut out = Vec::with_capacity(m);
    for (col, &s) in sizes.iter().enumerate().take(c) {
        // s strictly increasing growth lengths out of 0..=growth.len().
        let mut lens: Vec<usize> = rand::seq::index::sample(rng, growth.len() + 1, s).into_vec();
        lens.sort_unstable();
        for len in lens {
            let mut vals = vec![0u128; schema.field_count()];
            for &(f, k) in growth[..len].iter().chain(patterns[col].iter().map(|&i| &private[i])) {
                vals[f] |= 1u128 << k;
            }
            out.push(schema.mask(&vals).expect("bits within widths"));
        }
    }
    Some(out)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// At least one rule per mask; the rest follow 1/(rank+1)^skew.
fn skewed_counts(count: usize, m: usize, skew: f64) -> Vec<usize> {
    let weights: Vec<f64> = (0..m).map(|k| 1.0 / ((k + 1) as f64).powf(skew)).collect();
    let total: f64 = weights.iter().sum();
    let extra = count - m;
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| 1 + (extra as f64 * w / total).floor() as usize)
        .collect();
    let mut left = count - counts.iter().sum::<usize>();
    let mut k = 0;
    while left > 0 {
        counts[k % m] += 1;
        left -= 1;
        k += 1;
    }
    counts
}

/// Deterministic synthetic rule set with exactly `min(profile.masks, count)`
/// distinct masks (fewer only if the schema cannot hold that many).
pub fn gen_rules(seed: u64, count: usize, schema: &FieldSchema, profile: &TupleProfile) -> RuleSetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = profile.masks.min(count);
    if count > 0 {
        m = m.max(1);
    }
    if schema.total_bits() < 24 {
        m = m.min(1usize << schema.total_bits());
    }
    let masks = match profile.density {
        Some(d) => column_masks(&mut rng, schema, m, d).unwrap_or_else(|| random_masks(&mut rng, schema, m)),
        None => random_masks(&mut rng, schema, m),
    };
    let mut counts = if m == 0 { Vec::new() } else { skewed_counts(count, m, profile.skew) };
    counts.shuffle(&mut rng);

    let spread = (count as i64).saturating_mul(4).max(1);
    let mut rules = Vec::with_capacity(count);
    for (mask, &c) in masks.iter().zip(&counts) {
        for _ in 0..c {
            let fields = random_vector(&mut rng, schema).masked(mask);
            rules.push(Rule { id: 0, priority: rng.gen_range(0..spread), fields, mask: mask.clone() });
        }
    }
    rules.shuffle(&mut rng);
    for (i, r) in rules.iter_mut().enumerate() {
        r.id = i as u64;
    }
    RuleSetFile::unexpanded(schema.clone(), rules, Format::Synthetic, None)
}

fn check_ratio(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Usage(format!("{name} must lie in [0, 1], got {r}")))
    }
}

/// `hit_ratio` of the keys are copies of a sampled rule with the wildcard
/// bits filled at random; the rest are random keys re-drawn (a bounded
/// number of times) until they match no rule.
pub fn gen_trace(
    schema: &FieldSchema,
    rules: &[Rule],
    seed: u64,
    count: usize,
    hit_ratio: f64,
) -> Result<Trace> {
    check_ratio("hit_ratio", hit_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filter = if hit_ratio < 1.0 && !rules.is_empty() {
        Some(TupleSpace::build(schema.clone(), rules.to_vec())?)
    } else {
        None
    };
    let mut keys = Vec::with_capacity(count);
    for _ in 0..count {
        let hit = !rules.is_empty() && rng.gen_bool(hit_ratio);
        let key = if hit {
            let r = &rules[rng.gen_range(0..rules.len())];
            let noise = random_vector(&mut rng, schema);
            let words: Vec<u64> = r
                .fields
                .words()
                .iter()
                .zip(noise.words())
                .zip(r.mask.words())
                .map(|((&f, &n), &m)| f | (n & !m))
                .collect();
            FieldVector::from_words(&words)
        } else {
            let mut k = random_vector(&mut rng, schema);
            if let Some(tss) = &filter {
                for _ in 0..64 {
                    if !tss.lookup(&k).is_hit() {
                        break;
                    }
                    k = random_vector(&mut rng, schema);
                }
            }
            k
        };
        keys.push(key);
    }
    Ok(trace_of(keys))
}

/// Consistent update stream over `rules`: deletes pick a live rule, inserts
/// add a fresh id with a mask already in use (or a random prefix mask if
/// there is none).
pub fn gen_updates(
    schema: &FieldSchema,
    rules: &[Rule],
    seed: u64,
    count: usize,
    insert_ratio: f64,
) -> Result<UpdateStream> {
    check_ratio("insert_ratio", insert_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks: Vec<Mask> = rules.iter().map(|r| r.mask.clone()).collect::<HashSet<_>>().into_iter().collect();
    masks.sort();
    if masks.is_empty() {
        masks = random_masks(&mut rng, schema, 8);
    }
    let mut live: Vec<Rule> = rules.to_vec();
    let mut next_id = rules.iter().map(|r| r.id + 1).max().unwrap_or(0);
    let spread = ((rules.len() + count) as i64).saturating_mul(4).max(1);
    let mut ops = Vec::with_capacity(count);
    for _ in 0..count {
        if live.is_empty() || rng.gen_bool(insert_ratio) {
            let mask = masks[rng.gen_range(0..masks.len())].clone();
            let fields = random_vector(&mut rng, schema).masked(&mask);
            let rule = Rule { id: next_id, priority: rng.gen_range(0..spread), fields, mask };
            next_id += 1;
            live.push(rule.clone());
            ops.push(UpdateOp::Insert(rule));
        } else {
            let i = rng.gen_range(0..live.len());
            ops.push(UpdateOp::Delete(live.swap_remove(i)));
        }
    }
    Ok(UpdateStream { ops, rate: None })
}

/// ACL-flavoured ClassBench rules: a handful of common prefix lengths, mostly
/// wildcard or exact ports with some ranges, TCP/UDP/any protocols.
pub fn gen_classbench(seed: u64, count: usize) -> Vec<RangeRule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lens = [0u8, 8, 16, 20, 24, 28, 32];
    let prefix = |rng: &mut ChaCha8Rng| {
        let len = lens[rng.gen_range(0..lens.len())];
        let v = rng.gen::<u32>() & prefix_bits(32, len as u32) as u32;
        (v, len)
    };
    // Typical ACL port columns: mostly wildcard or a single service, plus a
    // few recurring ranges.
    let ranges: [(u16, u16); 6] = [(1024, 65535), (0, 1023), (6000, 6063), (1521, 1522), (49152, 65535), (135, 139)];
    let port = |rng: &mut ChaCha8Rng| -> (u16, u16) {
        match rng.gen_range(0..20) {
            0..=10 => (0, 65535),
            11..=16 => {
                let p = rng.gen();
                (p, p)
            }
            _ => ranges[rng.gen_range(0..ranges.len())],
        }
    };
    (0..count)
        .map(|_| {
            let proto = match rng.gen_range(0..4) {
                0 => (0, 0),
                1 => (17, 0xFF),
                _ => (6, 0xFF),
            };
            RangeRule { src: prefix(&mut rng), dst: prefix(&mut rng), sport: port(&mut rng), dport: port(&mut rng), proto }
        })
        .collect()
}
