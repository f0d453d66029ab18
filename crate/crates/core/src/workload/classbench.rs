// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! ClassBench filter files.
//!
//! ```text
//! @192.168.0.0/16    10.0.0.0/8    0 : 65535    1024 : 2047    0x06/0xFF    0x0000/0x0200
//! ```
//!
//! Port ranges are split into maximal prefix blocks and each rule is
//! replicated over the cross product of its source and destination blocks.
//! Trailing columns after the protocol (flags) are ignored.

use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{prefix_bits, FieldSchema, Rule};
use crate::workload::{parse_err, parse_hex, read_text, Format, Provenance, RuleSetFile};

/// One ClassBench rule before expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeRule {
    pub src: (u32, u8),
    pub dst: (u32, u8),
    pub sport: (u16, u16),
    pub dport: (u16, u16),
    pub proto: (u8, u8),
}

impl RangeRule {
    /// Range-aware match on a (src, dst, sport, dport, proto) key.
    pub fn matches(&self, key: [u128; 5]) -> bool {
        let pre = |(v, len): (u32, u8), k: u128| {
            let m = prefix_bits(32, len as u32);
            (k & m) == (v as u128 & m)
        };
        pre(self.src, key[0])
            && pre(self.dst, key[1])
            && (self.sport.0 as u128..=self.sport.1 as u128).contains(&key[2])
            && (self.dport.0 as u128..=self.dport.1 as u128).contains(&key[3])
            && (key[4] & self.proto.1 as u128) == (self.proto.0 & self.proto.1) as u128
    }

    pub fn to_line(&self) -> String {
        format!(
            "@{}/{}\t{}/{}\t{} : {}\t{} : {}\t0x{:02X}/0x{:02X}\t0x0000/0x0000",
            Ipv4Addr::from(self.src.0),
            self.src.1,
            Ipv4Addr::from(self.dst.0),
            self.dst.1,
            self.sport.0,
            self.sport.1,
            self.dport.0,
            self.dport.1,
            self.proto.0,
            self.proto.1,
        )
    }
}

/// Maximal aligned prefix blocks covering `lo..=hi` in a `width`-bit field,
/// as (value, prefix length) pairs in ascending order.
pub fn range_to_prefixes(lo: u64, hi: u64, width: u32) -> Vec<(u64, u32)> {
    assert!(width <= 64 && lo <= hi);
    let (lo, hi) = (lo as u128, hi as u128);
    let mut out = Vec::new();
    let mut at = lo;
    while at <= hi {
        let mut k = if at == 0 { width } else { at.trailing_zeros().min(width) };
        while at + (1u128 << k) - 1 > hi {
            k -= 1;
        }
        out.push((at as u64, width - k));
        at += 1u128 << k;
    }
    out
}

fn parse_prefix(tok: &str) -> Option<(u32, u8)> {
    let (addr, len) = tok.split_once('/')?;
    let addr: Ipv4Addr = addr.parse().ok()?;
    let len: u8 = len.parse().ok()?;
    (len <= 32).then_some((u32::from(addr), len))
}

/// Accepts `lo : hi` spread over three tokens or `lo:hi` in one.
fn parse_range<'a>(toks: &mut impl Iterator<Item = &'a str>) -> Option<(u16, u16)> {
    let first = toks.next()?;
    let (lo, hi) = match first.split_once(':') {
        Some((lo, hi)) if !hi.is_empty() => (lo.to_string(), hi.to_string()),
        Some((lo, _)) => (lo.to_string(), toks.next()?.to_string()),
        None => {
            let sep = toks.next()?;
            match sep.strip_prefix(':') {
                Some("") => (first.to_string(), toks.next()?.to_string()),
                Some(hi) => (first.to_string(), hi.to_string()),
                None => return None,
            }
        }
    };
    let (lo, hi): (u16, u16) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
    (lo <= hi).then_some((lo, hi))
}

fn parse_proto(tok: &str) -> Option<(u8, u8)> {
    let (v, m) = tok.split_once('/')?;
    Some((u8::try_from(parse_hex(v)?).ok()?, u8::try_from(parse_hex(m)?).ok()?))
}

pub(crate) fn parse_line(line: &str) -> std::result::Result<RangeRule, String> {
    let body = line.strip_prefix('@').ok_or("rule lines start with '@'")?;
    let mut toks = body.split_whitespace();
    let src = toks.next().and_then(parse_prefix).ok_or("bad source prefix")?;
    let dst = toks.next().and_then(parse_prefix).ok_or("bad destination prefix")?;
    let sport = parse_range(&mut toks).ok_or("bad source port range")?;
    let dport = parse_range(&mut toks).ok_or("bad destination port range")?;
    let proto = toks.next().and_then(parse_proto).ok_or("bad protocol value/mask")?;
    Ok(RangeRule { src, dst, sport, dport, proto })
}

/// Prefix rules for one range rule; ids start at `first_id`.
pub fn expand(schema: &FieldSchema, rule: &RangeRule, priority: i64, first_id: u64) -> Result<Vec<Rule>> {
    let sports = range_to_prefixes(rule.sport.0 as u64, rule.sport.1 as u64, 16);
    let dports = range_to_prefixes(rule.dport.0 as u64, rule.dport.1 as u64, 16);
    let mut out = Vec::with_capacity(sports.len() * dports.len());
    for &(sp, sl) in &sports {
        for &(dp, dl) in &dports {
            let pairs = [
                (rule.src.0 as u128, prefix_bits(32, rule.src.1 as u32)),
                (rule.dst.0 as u128, prefix_bits(32, rule.dst.1 as u32)),
                (sp as u128, prefix_bits(16, sl)),
                (dp as u128, prefix_bits(16, dl)),
                (rule.proto.0 as u128, rule.proto.1 as u128),
            ];
            let id = first_id + out.len() as u64;
            out.push(Rule::from_pairs(schema, id, priority, &pairs)?);
        }
    }
    Ok(out)
}

pub fn parse_classbench(path: impl AsRef<Path>) -> Result<RuleSetFile> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut parsed = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rule = parse_line(line).map_err(|msg| parse_err(path, i + 1, msg))?;
        parsed.push((i + 1, rule));
    }

    let schema = FieldSchema::classbench();
    let n = parsed.len();
    let mut rules = Vec::with_capacity(n);
    for (index, (line, rule)) in parsed.iter().enumerate() {
        let priority = (n - index) as i64;
        let expanded = expand(&schema, rule, priority, rules.len() as u64)
            .map_err(|e| parse_err(path, *line, e.to_string()))?;
        rules.extend(expanded);
    }
    let expansion_factor = if n == 0 { 1.0 } else { rules.len() as f64 / n as f64 };
    Ok(RuleSetFile {
        schema,
        rules,
        provenance: Provenance {
            format: Format::ClassBench,
            path: Some(path.to_path_buf()),
            source_rules: n,
            expansion_factor,
        },
    })
}

pub fn write_classbench(path: impl AsRef<Path>, rules: &[RangeRule]) -> Result<()> {
    let mut out = String::new();
    for r in rules {
        let _ = writeln!(out, "{}", r.to_line());
    }
    std::fs::write(path, out).map_err(Error::from)
}
