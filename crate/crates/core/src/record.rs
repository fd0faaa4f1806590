//! Class records: one class of a scheme, held as the seven blocks of an
//! authority record (notation, broader class, caption, notes, references,
//! class id, index terms).

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

/// Notation-independent identifier of a class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(String);

impl ClassId {
    pub fn new(id: impl Into<String>) -> Self {
        ClassId(id.into())
    }

    /// Identifier derived from the canonical notation, used when a record
    /// arrives without one.
    pub fn from_notation(canonical: &str) -> Self {
        let digest = Sha256::digest(canonical.as_bytes());
        ClassId(format!("h{}", hex::encode(&digest[..8])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NotationKind {
    #[default]
    Simple,
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChangeKind {
    Replaces,
    ReplacedBy,
    Cancelled,
}

impl ChangeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Replaces => "replaces",
            ChangeKind::ReplacedBy => "replaced_by",
            ChangeKind::Cancelled => "cancelled",
        }
    }
}

impl FromStr for ChangeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replaces" => Ok(ChangeKind::Replaces),
            "replaced_by" => Ok(ChangeKind::ReplacedBy),
            "cancelled" => Ok(ChangeKind::Cancelled),
            other => Err(format!("unknown change kind `{other}`")),
        }
    }
}

/// One line of notation history (replaces / replaced by / cancelled).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeEntry {
    pub kind: ChangeKind,
    pub other_class: ClassId,
    pub effective_date: NaiveDate,
}

/// Licenses combining a host class with partners through one relator.
/// An empty relator stands for direct facet attachment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationConstraint {
    pub host_class: String,
    /// Notation prefix or table id.
    pub allowed_partner: String,
    pub relator: String,
}

/// Parallel division: subdivisions borrowed from another place in the
/// schedules by transplanting the notational remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelDivisionRule {
    pub host_class: String,
    /// Table id or notation prefix the source must come from.
    pub source_table: String,
    pub strip_prefix: String,
    pub host_affix: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NoteSet {
    pub scope: Option<String>,
    pub application: Option<String>,
    pub combination_rules: Vec<CombinationConstraint>,
    pub parallel_rules: Vec<ParallelDivisionRule>,
    pub combination_examples: Vec<(String, String)>,
    pub history: Vec<ChangeEntry>,
    pub content_note: Option<String>,
    pub editorial_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRecord {
    pub class_id: ClassId,
    pub notation: String,
    /// Filled in from the parse when the record is loaded.
    pub notation_kind: NotationKind,
    /// Filled in from the parse when the record is loaded.
    pub source_tables: Vec<String>,
    /// Manual correction of the broader link: a class id or a notation.
    pub broader_override: Option<String>,
    pub caption: String,
    pub notes: NoteSet,
    /// See-also targets, class ids or notations.
    pub references: Vec<String>,
    pub index_terms: Vec<String>,
}

impl ClassRecord {
    pub fn new(class_id: impl Into<ClassId>, notation: impl Into<String>, caption: impl Into<String>) -> Self {
        ClassRecord {
            class_id: class_id.into(),
            notation: notation.into(),
            notation_kind: NotationKind::Simple,
            source_tables: Vec::new(),
            broader_override: None,
            caption: caption.into(),
            notes: NoteSet::default(),
            references: Vec::new(),
            index_terms: Vec::new(),
        }
    }

    pub fn with_override(mut self, broader: impl Into<String>) -> Self {
        self.broader_override = Some(broader.into());
        self
    }

    pub fn with_reference(mut self, target: impl Into<String>) -> Self {
        self.references.push(target.into());
        self
    }

    pub fn with_index_term(mut self, term: impl Into<String>) -> Self {
        self.index_terms.push(term.into());
        self
    }

    /// Cancelled records stay resolvable but are no longer live classes.
    pub fn is_cancelled(&self) -> bool {
        self.notes
            .history
            .iter()
            .any(|h| matches!(h.kind, ChangeKind::ReplacedBy | ChangeKind::Cancelled))
    }

    /// Most recent `replaced_by` target, if any.
    pub fn replaced_by(&self) -> Option<&ClassId> {
        self.notes
            .history
            .iter()
            .rev()
            .find(|h| h.kind == ChangeKind::ReplacedBy)
            .map(|h| &h.other_class)
    }
}

impl From<String> for ClassId {
    fn from(s: String) -> Self {
        ClassId(s)
    }
}
