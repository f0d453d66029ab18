// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Rule sets, traces and update streams: file formats and generators.
//!
//! Every reader accepts plain or gzip-compressed input; compression is
//! detected from the magic bytes.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FieldSchema, FieldVector, Rule};

pub mod classbench;
pub mod generic;
pub mod gen;

pub use classbench::{parse_classbench, range_to_prefixes, write_classbench, RangeRule};
pub use generic::{
    parse_generic, parse_trace, parse_updates, write_generic, write_trace, write_updates,
};
pub use gen::{gen_classbench, gen_rules, gen_trace, gen_updates, TupleProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    ClassBench,
    Generic,
    Synthetic,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::ClassBench => "classbench",
            Format::Generic => "generic",
            Format::Synthetic => "synthetic",
        })
    }
}

/// Where a rule set came from and how much it grew on the way in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub format: Format,
    pub path: Option<PathBuf>,
    /// Rules in the source before range expansion.
    pub source_rules: usize,
    /// Expanded rules per source rule.
    pub expansion_factor: f64,
}

#[derive(Debug, Clone)]
pub struct RuleSetFile {
    pub schema: FieldSchema,
    pub rules: Vec<Rule>,
    pub provenance: Provenance,
}

impl RuleSetFile {
    pub(crate) fn unexpanded(schema: FieldSchema, rules: Vec<Rule>, format: Format, path: Option<&Path>) -> Self {
        let n = rules.len();
        RuleSetFile {
            schema,
            rules,
            provenance: Provenance {
                format,
                path: path.map(Path::to_path_buf),
                source_rules: n,
                expansion_factor: 1.0,
            },
        }
    }
}

/// Loads a rule file in either on-disk format.
pub fn parse_rules(path: impl AsRef<Path>, format: Format) -> Result<RuleSetFile> {
    match format {
        Format::ClassBench => parse_classbench(path),
        Format::Generic => parse_generic(path),
        Format::Synthetic => Err(Error::Usage("synthetic rule sets have no file format".into())),
    }
}

/// Lookup keys with optional expected priorities (`None` = not annotated).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub keys: Vec<FieldVector>,
    pub expected: Vec<Option<Expected>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Miss,
    Priority(i64),
}

impl Trace {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateOp {
    Insert(Rule),
    Delete(Rule),
}

impl UpdateOp {
    pub fn rule(&self) -> &Rule {
        match self {
            UpdateOp::Insert(r) | UpdateOp::Delete(r) => r,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self, UpdateOp::Insert(_))
    }
}

/// Ordered updates with an optional rate annotation in ops/sec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStream {
    pub ops: Vec<UpdateOp>,
    pub rate: Option<f64>,
}

impl UpdateStream {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Reads a whole file, inflating it first if it starts with the gzip magic.
pub fn read_text(path: &Path) -> Result<String> {
    let raw = std::fs::read(path)?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        out
    } else {
        raw
    };
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: format!("not UTF-8: {e}"),
    })
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses `0x..`-prefixed or bare hex.
pub(crate) fn parse_hex(tok: &str) -> Option<u128> {
    let digits = tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")).unwrap_or(tok);
    if digits.is_empty() {
        return None;
    }
    u128::from_str_radix(digits, 16).ok()
}
