// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Line-oriented text formats for d-field data.
//!
//! Rules:
//! ```text
//! fields: 2
//! widths: 8 8
//! 0x00/0x80 0x80/0xc0 1
//! ```
//! one rule per line, `value/mask` per field then a decimal priority; rule
//! ids are line order starting at 0.
//!
//! Traces: one key per line, one hex token per field, optionally followed by
//! `# expected=<priority>` or `# expected=miss`.
//!
//! Updates: an optional `rate: <ops/sec>` header, then
//! `insert|delete <id> <priority> value/mask ...` per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::model::{FieldSchema, FieldVector, Rule};
use crate::workload::{
    parse_err, parse_hex, read_text, Expected, Format, RuleSetFile, Trace, UpdateOp, UpdateStream,
};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field_limit(width: u32) -> u128 {
    if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

fn parse_pairs<'a>(
    schema: &FieldSchema,
    toks: &mut impl Iterator<Item = &'a str>,
) -> std::result::Result<Vec<(u128, u128)>, String> {
    (0..schema.field_count())
        .map(|f| {
            let tok = toks.next().ok_or_else(|| format!("expected {} fields", schema.field_count()))?;
            let (v, m) = tok.split_once('/').ok_or_else(|| format!("field {f}: expected value/mask"))?;
            let v = parse_hex(v).ok_or_else(|| format!("field {f}: bad hex value {v:?}"))?;
            let m = parse_hex(m).ok_or_else(|| format!("field {f}: bad hex mask {m:?}"))?;
            let lim = field_limit(schema.width(f));
            if v > lim || m > lim {
                return Err(format!("field {f}: exceeds {} bits", schema.width(f)));
            }
            if v & !m != 0 {
                return Err(format!("field {f}: value 0x{v:x} has bits outside mask 0x{m:x}"));
            }
            Ok((v, m))
        })
        .collect()
}

fn write_pairs(out: &mut String, schema: &FieldSchema, rule: &Rule) {
    for f in 0..schema.field_count() {
        let _ = write!(
            out,
            "0x{:x}/0x{:x} ",
            schema.field(&rule.fields, f),
            schema.field(&rule.mask.0, f)
        );
    }
}

fn header_value<'a>(line: Option<(usize, &'a str)>, key: &str, path: &Path) -> Result<(usize, &'a str)> {
    let (no, l) = line.ok_or_else(|| parse_err(path, 0, format!("missing `{key}:` header")))?;
    l.strip_prefix(key)
        .and_then(|r| r.strip_prefix(':'))
        .map(|r| (no, r.trim()))
        .ok_or_else(|| parse_err(path, no, format!("expected `{key}:` header")))
}

pub fn parse_generic(path: impl AsRef<Path>) -> Result<RuleSetFile> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = content_lines(&text);

    let (no, d) = header_value(lines.next(), "fields", path)?;
    let d: usize = d.parse().map_err(|_| parse_err(path, no, "bad field count"))?;
    let (no, w) = header_value(lines.next(), "widths", path)?;
    let widths: Vec<u32> = w
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, no, "bad width list"))?;
    if widths.len() != d {
        return Err(parse_err(path, no, format!("{} widths for {d} fields", widths.len())));
    }
    let schema = FieldSchema::new(widths).map_err(|e| parse_err(path, no, e.to_string()))?;

    let mut rules = Vec::new();
    for (no, line) in lines {
        let mut toks = line.split_whitespace();
        let pairs = parse_pairs(&schema, &mut toks).map_err(|m| parse_err(path, no, m))?;
        let priority: i64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, no, "missing or bad priority"))?;
        if toks.next().is_some() {
            return Err(parse_err(path, no, "trailing tokens"));
        }
        let rule = Rule::from_pairs(&schema, rules.len() as u64, priority, &pairs)
            .map_err(|e| parse_err(path, no, e.to_string()))?;
        schema.check_rule(&rule).map_err(|e| parse_err(path, no, e.to_string()))?;
        rules.push(rule);
    }
    Ok(RuleSetFile::unexpanded(schema, rules, Format::Generic, Some(path)))
}

/// Writes rules in order; ids are not stored and come back as line order.
pub fn write_generic(path: impl AsRef<Path>, schema: &FieldSchema, rules: &[Rule]) -> Result<()> {
    let mut out = format!("fields: {}\nwidths:", schema.field_count());
    for w in schema.widths() {
        let _ = write!(out, " {w}");
    }
    out.push('\n');
    for r in rules {
        write_pairs(&mut out, schema, r);
        let _ = writeln!(out, "{}", r.priority);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn parse_trace(path: impl AsRef<Path>, schema: &FieldSchema) -> Result<Trace> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut trace = Trace::default();
    for (no, line) in content_lines(&text) {
        let (body, comment) = match line.split_once('#') {
            Some((b, c)) => (b, Some(c.trim())),
            None => (line, None),
        };
        let values: Vec<u128> = body
            .split_whitespace()
            .map(|t| parse_hex(t).ok_or_else(|| parse_err(path, no, format!("bad hex token {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != schema.field_count() {
            return Err(parse_err(
                path,
                no,
                format!("{} tokens for {} fields", values.len(), schema.field_count()),
            ));
        }
        let key = schema.vector(&values).map_err(|e| parse_err(path, no, e.to_string()))?;
        let expected = match comment.and_then(|c| c.strip_prefix("expected=")) {
            None => None,
            Some("miss") => Some(Expected::Miss),
            Some(p) => Some(Expected::Priority(
                p.trim().parse().map_err(|_| parse_err(path, no, "bad expected priority"))?,
            )),
        };
        trace.keys.push(key);
        trace.expected.push(expected);
    }
    Ok(trace)
}

pub fn write_trace(path: impl AsRef<Path>, schema: &FieldSchema, trace: &Trace) -> Result<()> {
    let mut out = String::new();
    for (i, key) in trace.keys.iter().enumerate() {
        let vals: Vec<String> = schema.fields(key).iter().map(|v| format!("0x{v:x}")).collect();
        out.push_str(&vals.join(" "));
        match trace.expected.get(i).copied().flatten() {
            Some(Expected::Miss) => out.push_str(" # expected=miss"),
            Some(Expected::Priority(p)) => {
                let _ = write!(out, " # expected={p}");
            }
            None => {}
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Trace keys with no annotations.
pub fn trace_of(keys: Vec<FieldVector>) -> Trace {
    let expected = vec![None; keys.len()];
    Trace { keys, expected }
}

pub fn parse_updates(path: impl AsRef<Path>, schema: &FieldSchema) -> Result<UpdateStream> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut stream = UpdateStream::default();
    for (no, line) in content_lines(&text) {
        if let Some(rate) = line.strip_prefix("rate:") {
            let r: f64 = rate.trim().parse().map_err(|_| parse_err(path, no, "bad rate"))?;
            stream.rate = Some(r);
            continue;
        }
        let mut toks = line.split_whitespace();
        let op = toks.next().unwrap_or_default();
        let id: u64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, no, "missing or bad rule id"))?;
        let priority: i64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, no, "missing or bad priority"))?;
        let pairs = parse_pairs(schema, &mut toks).map_err(|m| parse_err(path, no, m))?;
        let rule = Rule::from_pairs(schema, id, priority, &pairs)
            .map_err(|e| parse_err(path, no, e.to_string()))?;
        stream.ops.push(match op {
            "insert" => UpdateOp::Insert(rule),
            "delete" => UpdateOp::Delete(rule),
            other => return Err(parse_err(path, no, format!("unknown op {other:?}"))),
        });
    }
    Ok(stream)
}

pub fn write_updates(path: impl AsRef<Path>, schema: &FieldSchema, stream: &UpdateStream) -> Result<()> {
    let mut out = String::new();
    if let Some(rate) = stream.rate {
        let _ = writeln!(out, "rate: {rate}");
    }
    for op in &stream.ops {
        let r = op.rule();
        let verb = if op.is_insert() { "insert" } else { "delete" };
        let _ = write!(out, "{verb} {} {} ", r.id, r.priority);
        write_pairs(&mut out, schema, r);
        out.pop();
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
