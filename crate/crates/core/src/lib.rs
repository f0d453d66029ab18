// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Multi-field wildcard rule matching with TupleChain and Extended
//! TupleChain.
//!
//! Rules are grouped into tuples by mask, as in tuple space search. Tuples
//! whose masks nest are linked into chains; entries leave *markers* in the
//! preceding tuple of their chain and receive *hints* from them, so a lookup
//! can binary-search each chain instead of probing every tuple. The extended
//! variant merges chains into groups behind a coarse head tuple and keeps a
//! small TupleChain per head entry.
//!
//! The crate also carries a linear-scan oracle and plain tuple space search
//! for comparison, workload readers and generators, and a rate-controlled
//! benchmark harness.

pub mod audit;
pub mod baseline;
pub mod chain;
pub mod classifier;
pub mod error;
pub mod etc;
pub mod graph;
pub mod harness;
pub mod model;
pub mod tuple;
pub mod workload;

pub use audit::{AuditResult, Violation, ViolationKind};
pub use baseline::{LinearScan, TupleSpace};
pub use classifier::{Classifier, ProbeBound, StructureStats, TupleChain};
pub use error::{Error, Result};
pub use etc::{ExtendedTupleChain, DEFAULT_MIN_HEAD_BITS};
pub use model::{
    apply_mask, better, mask_less_than, matches, FieldSchema, FieldVector, Mask, MatchResult, Rule,
    RuleTag,
};
