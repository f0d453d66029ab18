// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Structural audit results.

use std::fmt;

use crate::model::RuleTag;

/// The first broken invariant an audit found, with where it was found.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{location}: {kind}")]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn new(location: impl Into<String>, kind: ViolationKind) -> Self {
        Violation {
            location: location.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    ChainOrder,
    TreeShape { height: usize, limit: usize },
    Links,
    NonCanonicalKey,
    EmptyEntry,
    MissingMarker,
    MarkerKey,
    OwnerSymmetry,
    HintLaw { expected: Option<RuleTag>, found: Option<RuleTag> },
    Counters(String),
    SpaceBound { entries: usize, bound: usize },
    Registry(String),
    Group(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::ChainOrder => write!(f, "adjacent tuples are not strictly ordered"),
            ViolationKind::TreeShape { height, limit } => {
                write!(f, "search tree height {height} exceeds {limit}")
            }
            ViolationKind::Links => write!(f, "prev/next links disagree with chain order"),
            ViolationKind::NonCanonicalKey => write!(f, "entry key has bits outside the tuple mask"),
            ViolationKind::EmptyEntry => write!(f, "entry holds no rule and has no owners"),
            ViolationKind::MissingMarker => write!(f, "entry has no marker in the preceding tuple"),
            ViolationKind::MarkerKey => write!(f, "marker key is not the owner key masked down"),
            ViolationKind::OwnerSymmetry => write!(f, "owner list and marker link disagree"),
            ViolationKind::HintLaw { expected, found } => {
                write!(f, "hint {found:?} should be {expected:?}")
            }
            ViolationKind::Counters(s) => write!(f, "counter mismatch: {s}"),
            ViolationKind::SpaceBound { entries, bound } => {
                write!(f, "{entries} entries exceed the n_c x m_c bound {bound}")
            }
            ViolationKind::Registry(s) => write!(f, "registry: {s}"),
            ViolationKind::Group(s) => write!(f, "group: {s}"),
        }
    }
}

pub type AuditResult = Result<(), Violation>;
