// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Field schemas, packed field vectors, masks, rules and the match predicate.
//!
//! A [`FieldVector`] stores all `d` fields of a key back to back in a packed
//! little-endian bit string, chunked into 64-bit words. Field `i` occupies
//! bits `offset(i) .. offset(i) + width(i)`. Because masks are plain bit
//! vectors with the same layout, every per-field operation (`&`, containment,
//! equality) reduces to word-wise operations over the packed representation,
//! whatever the individual field widths are.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{BuildHasher, Hash, Hasher};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Widest supported single field, in bits.
pub const MAX_FIELD_WIDTH: u32 = 128;

pub(crate) type Words = SmallVec<[u64; 2]>;

/// Layout of the `d` fields every rule and key of a classifier carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    widths: Vec<u32>,
    offsets: Vec<u32>,
    total_bits: u32,
}

impl FieldSchema {
    pub fn new(widths: Vec<u32>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Schema("a schema needs at least one field".into()));
        }
        let mut offsets = Vec::with_capacity(widths.len());
        let mut total = 0u32;
        for (i, &w) in widths.iter().enumerate() {
            if w == 0 || w > MAX_FIELD_WIDTH {
                return Err(Error::Schema(format!(
                    "field {i} has width {w}, expected 1..={MAX_FIELD_WIDTH}"
                )));
            }
            offsets.push(total);
            total += w;
        }
        Ok(FieldSchema {
            widths,
            offsets,
            total_bits: total,
        })
    }

    /// `count` fields of `width` bits each.
    pub fn uniform(count: usize, width: u32) -> Result<Self> {
        Self::new(vec![width; count])
    }

    /// The ClassBench 5-tuple: source/destination IPv4, source/destination
    /// port and protocol.
    pub fn classbench() -> Self {
        Self::new(vec![32, 32, 16, 16, 8]).expect("static schema")
    }

    pub fn field_count(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[u32] {
        &self.widths
    }

    pub fn width(&self, field: usize) -> u32 {
        self.widths[field]
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    /// Number of 64-bit words in a packed vector.
    pub fn words(&self) -> usize {
        (self.total_bits as usize).div_ceil(64)
    }

    /// All-zero vector (also the all-wildcard mask).
    pub fn zero(&self) -> FieldVector {
        FieldVector {
            words: smallvec::smallvec![0; self.words()],
        }
    }

    /// Builds a vector from one value per field.
    pub fn vector(&self, values: &[u128]) -> Result<FieldVector> {
        if values.len() != self.field_count() {
            return Err(Error::Schema(format!(
                "expected {} fields, got {}",
                self.field_count(),
                values.len()
            )));
        }
        let mut v = self.zero();
        for (i, &value) in values.iter().enumerate() {
            let w = self.widths[i];
            if w < 128 && value >> w != 0 {
                return Err(Error::Schema(format!(
                    "value {value:#x} does not fit field {i} of width {w}"
                )));
            }
            write_bits(&mut v.words, self.offsets[i], w, value);
        }
        Ok(v)
    }

    pub fn mask(&self, values: &[u128]) -> Result<Mask> {
        self.vector(values).map(Mask)
    }

    /// Mask with a prefix of `lens[i]` leading (most significant) bits set in
    /// field `i`.
    pub fn prefix_mask(&self, lens: &[u32]) -> Result<Mask> {
        if lens.len() != self.field_count() {
            return Err(Error::Schema(format!(
                "expected {} prefix lengths, got {}",
                self.field_count(),
                lens.len()
            )));
        }
        let mut vals = Vec::with_capacity(lens.len());
        for (i, &len) in lens.iter().enumerate() {
            let w = self.widths[i];
            if len > w {
                return Err(Error::Schema(format!(
                    "prefix length {len} exceeds width {w} of field {i}"
                )));
            }
            vals.push(prefix_bits(w, len));
        }
        self.mask(&vals)
    }

    pub fn full_mask(&self) -> Mask {
        let lens = self.widths.clone();
        self.prefix_mask(&lens).expect("widths are valid prefix lengths")
    }

    pub fn field(&self, v: &FieldVector, field: usize) -> u128 {
        read_bits(&v.words, self.offsets[field], self.widths[field])
    }

    pub fn fields(&self, v: &FieldVector) -> Vec<u128> {
        (0..self.field_count()).map(|i| self.field(v, i)).collect()
    }

    /// True if `v` has the word count of this schema and no bit set past the
    /// last field.
    pub fn fits(&self, v: &FieldVector) -> bool {
        if v.words.len() != self.words() {
            return false;
        }
        let tail = self.total_bits % 64;
        tail == 0 || v.words.last().is_none_or(|&w| w >> tail == 0)
    }

    pub fn check(&self, v: &FieldVector) -> Result<()> {
        if self.fits(v) {
            Ok(())
        } else {
            Err(Error::Schema(format!(
                "vector of {} words does not fit a {}-bit schema",
                v.words.len(),
                self.total_bits
            )))
        }
    }

    /// Validates that `rule` belongs to this schema and is mask-canonical.
    pub fn check_rule(&self, rule: &Rule) -> Result<()> {
        if !self.fits(&rule.fields) || !self.fits(&rule.mask.0) {
            return Err(Error::InvalidRule(format!(
                "rule {} does not fit the {}-field schema",
                rule.id,
                self.field_count()
            )));
        }
        if !rule.fields.is_canonical(&rule.mask) {
            return Err(Error::InvalidRule(format!(
                "rule {} has value bits outside its mask",
                rule.id
            )));
        }
        if rule.priority == i64::MIN {
            return Err(Error::InvalidRule(format!(
                "rule {} uses the reserved miss priority",
                rule.id
            )));
        }
        Ok(())
    }

    /// Renders a vector as `(0x20, 0xa8)`.
    pub fn display(&self, v: &FieldVector) -> String {
        let parts: Vec<String> = (0..self.field_count())
            .map(|i| format!("{:#x}", self.field(v, i)))
            .collect();
        format!("({})", parts.join(", "))
    }
}

/// Value with the `len` most significant bits of a `width`-bit field set.
pub fn prefix_bits(width: u32, len: u32) -> u128 {
    debug_assert!(len <= width && width <= 128);
    if len == 0 {
        return 0;
    }
    let ones = if len == 128 { u128::MAX } else { (1u128 << len) - 1 };
    ones << (width - len)
}

fn read_bits(words: &[u64], offset: u32, width: u32) -> u128 {
    let mut out = 0u128;
    let mut done = 0u32;
    while done < width {
        let pos = offset + done;
        let wi = (pos / 64) as usize;
        let bi = pos % 64;
        let take = (64 - bi).min(width - done);
        let chunk = (words[wi] >> bi) & low_ones(take);
        out |= (chunk as u128) << done;
        done += take;
    }
    out
}

fn write_bits(words: &mut [u64], offset: u32, width: u32, value: u128) {
    let mut done = 0u32;
    while done < width {
        let pos = offset + done;
        let wi = (pos / 64) as usize;
        let bi = pos % 64;
        let take = (64 - bi).min(width - done);
        let m = low_ones(take);
        let chunk = ((value >> done) as u64) & m;
        words[wi] = (words[wi] & !(m << bi)) | (chunk << bi);
        done += take;
    }
}

#[inline]
fn low_ones(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Hasher shared by every tuple table. Seeded, so runs are reproducible.
fn hasher() -> &'static ahash::RandomState {
    static STATE: OnceLock<ahash::RandomState> = OnceLock::new();
    STATE.get_or_init(|| {
        ahash::RandomState::with_seeds(
            0x243f_6a88_85a3_08d3,
            0x1319_8a2e_0370_7344,
            0xa409_3822_299f_31d0,
            0x082e_fa98_ec4e_6c89,
        )
    })
}

/// Hash of the packed key `words & mask` without materializing it.
#[inline]
pub(crate) fn masked_hash(words: &[u64], mask: &[u64]) -> u64 {
    let mut h = hasher().build_hasher();
    for (w, m) in words.iter().zip(mask) {
        h.write_u64(w & m);
    }
    h.finish()
}

#[inline]
pub(crate) fn key_hash(words: &[u64]) -> u64 {
    let mut h = hasher().build_hasher();
    for &w in words {
        h.write_u64(w);
    }
    h.finish()
}

/// A `d`-field value vector: rule fields, packet keys and table keys.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FieldVector {
    pub(crate) words: Words,
}

impl Hash for FieldVector {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.words.as_slice().hash(state)
    }
}

impl fmt::Debug for FieldVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldVector[")?;
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{w:016x}")?;
        }
        write!(f, "]")
    }
}

impl FieldVector {
    pub fn from_words(words: &[u64]) -> Self {
        FieldVector {
            words: Words::from_slice(words),
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn masked(&self, mask: &Mask) -> FieldVector {
        apply_mask(self, mask)
    }

    /// `self & mask == self`.
    pub fn is_canonical(&self, mask: &Mask) -> bool {
        self.words
            .iter()
            .zip(mask.0.words.iter())
            .all(|(v, m)| v & m == *v)
    }

    /// `self & mask == other`, word by word.
    #[inline]
    pub(crate) fn masked_eq(&self, mask: &Mask, other: &[u64]) -> bool {
        self.words
            .iter()
            .zip(mask.0.words.iter())
            .zip(other)
            .all(|((k, m), f)| k & m == *f)
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        if self.words.spilled() {
            self.words.capacity() * 8
        } else {
            0
        }
    }
}

/// A per-field bitmask. Two masks are equal iff they are bitwise equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mask(pub FieldVector);

impl Mask {
    pub fn words(&self) -> &[u64] {
        &self.0.words
    }

    /// Number of set bits over all fields.
    pub fn popcount(&self) -> u32 {
        self.0.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Fieldwise AND.
    pub fn intersect(&self, other: &Mask) -> Mask {
        Mask(apply_mask(&self.0, other))
    }

    /// Every set bit of `self` is set in `other` (non-strict containment).
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.0.is_canonical(other)
    }

    pub fn less_than(&self, other: &Mask) -> bool {
        mask_less_than(self, other)
    }

    pub fn comparable(&self, other: &Mask) -> bool {
        self.less_than(other) || other.less_than(self)
    }
}

/// Strict tuple order: `a != b` and every set bit of `a` is set in `b`.
pub fn mask_less_than(a: &Mask, b: &Mask) -> bool {
    debug_assert_eq!(a.0.words.len(), b.0.words.len());
    a != b && a.is_subset_of(b)
}

/// `v & m`, field by field.
pub fn apply_mask(v: &FieldVector, m: &Mask) -> FieldVector {
    debug_assert_eq!(v.words.len(), m.0.words.len());
    FieldVector {
        words: v
            .words
            .iter()
            .zip(m.0.words.iter())
            .map(|(a, b)| a & b)
            .collect(),
    }
}

/// Identity and rank of a rule, as stored in entries and reported by lookups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleTag {
    pub priority: i64,
    pub id: u64,
}

impl RuleTag {
    /// Higher priority wins; equal priorities go to the smaller id.
    #[inline]
    pub fn beats(&self, other: &RuleTag) -> bool {
        self.cmp_rank(other) == Ordering::Greater
    }

    #[inline]
    pub fn cmp_rank(&self, other: &RuleTag) -> Ordering {
        self.priority
            .cmp(&other.priority)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// The preferred of two optional candidates; an absent candidate is a miss
/// and loses to any hit.
#[inline]
pub fn better(a: Option<RuleTag>, b: Option<RuleTag>) -> Option<RuleTag> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.beats(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// A `d`-field wildcard rule `(fields, mask, priority)` with a unique id.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub id: u64,
    pub priority: i64,
    pub fields: FieldVector,
    pub mask: Mask,
}

impl Rule {
    /// Builds a rule from `(value, mask)` pairs, canonicalizing the value.
    pub fn from_pairs(
        schema: &FieldSchema,
        id: u64,
        priority: i64,
        pairs: &[(u128, u128)],
    ) -> Result<Rule> {
        let values: Vec<u128> = pairs.iter().map(|&(v, m)| v & m).collect();
        let masks: Vec<u128> = pairs.iter().map(|&(_, m)| m).collect();
        let rule = Rule {
            id,
            priority,
            fields: schema.vector(&values)?,
            mask: schema.mask(&masks)?,
        };
        schema.check_rule(&rule)?;
        Ok(rule)
    }

    pub fn tag(&self) -> RuleTag {
        RuleTag {
            priority: self.priority,
            id: self.id,
        }
    }

    /// `key & mask == fields`.
    #[inline]
    pub fn matches(&self, key: &FieldVector) -> bool {
        key.masked_eq(&self.mask, &self.fields.words)
    }
}

/// Checked form of [`Rule::matches`] that rejects keys from another schema.
pub fn matches(schema: &FieldSchema, key: &FieldVector, rule: &Rule) -> Result<bool> {
    schema.check(key)?;
    schema.check(&rule.fields)?;
    schema.check(&rule.mask.0)?;
    Ok(rule.matches(key))
}

/// Outcome of one lookup: the winning rule, if any, and the number of tuple
/// hash probes spent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub rule: Option<RuleTag>,
    pub probes: u32,
}

impl MatchResult {
    /// Priority reported for a miss.
    pub const MISS_PRIORITY: i64 = i64::MIN;

    pub fn miss() -> Self {
        MatchResult::default()
    }

    pub fn is_hit(&self) -> bool {
        self.rule.is_some()
    }

    pub fn priority(&self) -> i64 {
        self.rule.map_or(Self::MISS_PRIORITY, |r| r.priority)
    }

    pub fn rule_id(&self) -> Option<u64> {
        self.rule.map(|r| r.id)
    }

    /// Better-fold of two partial results; probes add up.
    pub fn merge(self, other: MatchResult) -> MatchResult {
        MatchResult {
            rule: better(self.rule, other.rule),
            probes: self.probes + other.probes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s88() -> FieldSchema {
        FieldSchema::uniform(2, 8).unwrap()
    }

    /// Bit-by-bit reimplementation of the match predicate.
    fn matches_per_bit(schema: &FieldSchema, key: &FieldVector, rule: &Rule) -> bool {
        (0..schema.field_count()).all(|i| {
            let (k, m, f) = (
                schema.field(key, i),
                schema.field(&rule.mask.0, i),
                schema.field(&rule.fields, i),
            );
            (0..schema.width(i)).all(|b| {
                let bit = |x: u128| (x >> b) & 1;
                bit(m) == 0 || bit(k) == bit(f)
            })
        })
    }

    #[test]
    fn marker_key_matches_its_source_packet() {
        let s = s88();
        let key = s.vector(&[0x20, 0xA8]).unwrap();
        let rule = Rule::from_pairs(&s, 0, 1, &[(0x00, 0xC0), (0xA8, 0xFC)]).unwrap();
        assert!(rule.matches(&key));
        assert!(matches(&s, &key, &rule).unwrap());
    }

    #[test]
    fn wildcard_rule_matches_everything() {
        let s = s88();
        let rule = Rule::from_pairs(&s, 0, 1, &[(0, 0), (0, 0)]).unwrap();
        for a in (0..=255u128).step_by(17) {
            for b in (0..=255u128).step_by(13) {
                assert!(rule.matches(&s.vector(&[a, b]).unwrap()));
            }
        }
    }

    #[test]
    fn matches_agrees_with_per_bit_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = FieldSchema::new(vec![13, 70]).unwrap();
        let rand_field = |rng: &mut rand_chacha::ChaCha8Rng, w: u32| -> u128 {
            rng.gen::<u128>() & ((1u128 << w) - 1)
        };
        let key = s
            .vector(&[rand_field(&mut rng, 13), rand_field(&mut rng, 70)])
            .unwrap();
        for id in 0..1000 {
            // Bias toward sparse masks so a good share of rules actually match.
            let m0 = rand_field(&mut rng, 13) & rand_field(&mut rng, 13) & rand_field(&mut rng, 13);
            let m1 = rand_field(&mut rng, 70) & rand_field(&mut rng, 70) & rand_field(&mut rng, 70);
            let (f0, f1) = if rng.gen_bool(0.5) {
                (s.field(&key, 0) & m0, s.field(&key, 1) & m1)
            } else {
                (rand_field(&mut rng, 13), rand_field(&mut rng, 70))
            };
            let rule = Rule::from_pairs(&s, id, 0, &[(f0, m0), (f1, m1)]).unwrap();
            assert_eq!(rule.matches(&key), matches_per_bit(&s, &key, &rule));
        }
    }

    #[test]
    fn schema_mismatch_is_a_usage_error() {
        let s = s88();
        let wide = FieldSchema::uniform(3, 64).unwrap();
        let key = wide.zero();
        let rule = Rule::from_pairs(&s, 0, 1, &[(0, 0), (0, 0)]).unwrap();
        assert!(matches(&s, &key, &rule).is_err());
    }

    #[test]
    fn tuple_order_examples() {
        let s = s88();
        let t1 = s.mask(&[0x80, 0xC0]).unwrap();
        let t2 = s.mask(&[0xC0, 0xF0]).unwrap();
        assert!(mask_less_than(&t1, &t2));
        assert!(!mask_less_than(&t2, &t1));
        assert!(!mask_less_than(&t1, &t1));
    }

    #[test]
    fn tuple_order_exhaustive_4bit() {
        let s = FieldSchema::uniform(1, 4).unwrap();
        for a in 0..16u128 {
            for b in 0..16u128 {
                let (ma, mb) = (s.mask(&[a]).unwrap(), s.mask(&[b]).unwrap());
                assert_eq!(mask_less_than(&ma, &mb), a & b == a && a != b);
            }
        }
    }

    #[test]
    fn tuple_order_is_strict_partial_order() {
        let s = FieldSchema::new(vec![2, 2]).unwrap();
        let all: Vec<Mask> = (0..16u128)
            .map(|x| s.mask(&[x & 3, x >> 2]).unwrap())
            .collect();
        for a in &all {
            assert!(!a.less_than(a));
            for b in &all {
                if a.less_than(b) {
                    assert!(!b.less_than(a));
                }
                for c in &all {
                    if a.less_than(b) && b.less_than(c) {
                        assert!(a.less_than(c));
                    }
                }
            }
        }
    }

    #[test]
    fn apply_mask_examples() {
        let s = s88();
        let v = s.vector(&[0x20, 0xA8]).unwrap();
        let m3 = s.mask(&[0xC0, 0xFC]).unwrap();
        let mh = s.mask(&[0x80, 0x80]).unwrap();
        assert_eq!(apply_mask(&v, &m3), s.vector(&[0x00, 0xA8]).unwrap());
        assert_eq!(apply_mask(&v, &mh), s.vector(&[0x00, 0x80]).unwrap());
        assert_eq!(apply_mask(&v, &s.full_mask()), v);
    }

    #[test]
    fn better_prefers_priority_then_smaller_id() {
        let t = |priority, id| Some(RuleTag { priority, id });
        assert_eq!(better(t(10, 9), t(3, 1)), t(10, 9));
        assert_eq!(better(t(3, 1), t(10, 9)), t(10, 9));
        assert_eq!(better(t(5, 2), t(5, 7)), t(5, 2));
        assert_eq!(better(t(5, 7), t(5, 2)), t(5, 2));
        assert_eq!(better(None, t(-4, 0)), t(-4, 0));
        assert_eq!(better(None, None), None);
    }

    #[test]
    fn better_fold_is_permutation_invariant() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut tags: Vec<RuleTag> = (0..50)
            .map(|id| RuleTag {
                priority: rng.gen_range(0..5),
                id,
            })
            .collect();
        let first = tags.iter().fold(None, |acc, &t| better(acc, Some(t)));
        for _ in 0..20 {
            tags.shuffle(&mut rng);
            assert_eq!(tags.iter().fold(None, |acc, &t| better(acc, Some(t))), first);
        }
    }

    #[test]
    fn field_roundtrip_across_word_boundaries() {
        let s = FieldSchema::new(vec![60, 128, 5, 33]).unwrap();
        let vals = [
            (1u128 << 60) - 3,
            u128::MAX - 12345,
            0b10110,
            (1u128 << 33) - 1,
        ];
        let v = s.vector(&vals).unwrap();
        assert_eq!(s.fields(&v), vals.to_vec());
        assert!(s.fits(&v));
        assert!(s.vector(&[1 << 60, 0, 0, 0]).is_err());
    }

    #[test]
    fn prefix_masks() {
        let s = FieldSchema::new(vec![8, 128]).unwrap();
        let m = s.prefix_mask(&[3, 128]).unwrap();
        assert_eq!(s.field(&m.0, 0), 0xE0);
        assert_eq!(s.field(&m.0, 1), u128::MAX);
        assert_eq!(s.full_mask(), s.prefix_mask(&[8, 128]).unwrap());
        assert!(m.is_subset_of(&s.full_mask()));
        assert_eq!(s.prefix_mask(&[0, 0]).unwrap().popcount(), 0);
    }

    #[test]
    fn non_canonical_rule_rejected() {
        let s = s88();
        let rule = Rule {
            id: 0,
            priority: 0,
            fields: s.vector(&[0xFF, 0]).unwrap(),
            mask: s.mask(&[0xF0, 0]).unwrap(),
        };
        assert!(s.check_rule(&rule).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn apply_mask_idempotent(v0 in 0u128..256, v1 in 0u128..256, m0 in 0u128..256, m1 in 0u128..256) {
                let s = s88();
                let v = s.vector(&[v0, v1]).unwrap();
                let m = s.mask(&[m0, m1]).unwrap();
                let once = apply_mask(&v, &m);
                prop_assert_eq!(apply_mask(&once, &m), once);
            }

            #[test]
            fn matching_is_monotone_under_containment(
                k0 in 0u128..256, k1 in 0u128..256,
                ma0 in 0u128..256, ma1 in 0u128..256,
                extra0 in 0u128..256, extra1 in 0u128..256,
            ) {
                let s = s88();
                let key = s.vector(&[k0, k1]).unwrap();
                let ma = s.mask(&[ma0, ma1]).unwrap();
                let mb = s.mask(&[ma0 | extra0, ma1 | extra1]).unwrap();
                // Rule under the finer mask that the key matches.
                let fine = Rule { id: 0, priority: 0, fields: apply_mask(&key, &mb), mask: mb.clone() };
                prop_assert!(fine.matches(&key));
                let coarse = Rule { id: 1, priority: 0, fields: apply_mask(&fine.fields, &ma), mask: ma.clone() };
                prop_assert!(coarse.matches(&key));
            }
        }
    }
}
