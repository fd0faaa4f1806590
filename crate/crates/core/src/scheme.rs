//! Loaded, validated schemes and their validation reports.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::collation::{Collator, SortKey};
use crate::grammar::{GrammarError, NotationGrammar};
use crate::hierarchy::{self, Diagnostic, Hierarchy, HierarchyError, HierarchyLink, Tree};
use crate::index::{record_matches, TermIndex};
use crate::notation::{parse_canonical, NotationError, ParsedNotation};
use crate::record::{ChangeKind, ClassId, ClassRecord, NotationKind};
use crate::synthesis::{check_constraints, ConstraintViolation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("ambiguous grammar: {0}")]
    AmbiguousGrammar(#[from] GrammarError),
    #[error("class `{class_id}`: cannot parse `{notation}`: {error}")]
    UnparsableNotation {
        class_id: ClassId,
        notation: String,
        error: NotationError,
    },
    #[error("class `{class_id}`: constraint uses unknown relator `{relator}`")]
    UnknownRelator { class_id: ClassId, relator: String },
    #[error("duplicate class id `{0}`")]
    DuplicateClassId(ClassId),
    #[error("classes `{first}` and `{second}` share notation `{notation}`")]
    DuplicateNotation {
        notation: String,
        first: ClassId,
        second: ClassId,
    },
    #[error("class `{class_id}` refers to missing `{target}`")]
    DanglingReference { class_id: ClassId, target: String },
    #[error("broader links form a cycle: {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<ClassId>),
}

impl From<HierarchyError> for LoadError {
    fn from(e: HierarchyError) -> Self {
        match e {
            HierarchyError::OverrideTargetMissing { class_id, target } => {
                LoadError::DanglingReference { class_id, target }
            }
            HierarchyError::CycleDetected(ids) => LoadError::Cycle(ids),
            HierarchyError::UnknownClass(id) => LoadError::DanglingReference {
                class_id: ClassId::new(id.clone()),
                target: id,
            },
            HierarchyError::Notation(error) => LoadError::UnparsableNotation {
                class_id: ClassId::new(""),
                notation: String::new(),
                error,
            },
        }
    }
}

/// Immutable snapshot of a scheme: records in collation order, parses,
/// indexes and the resolved hierarchy.
#[derive(Debug, Clone)]
pub struct Scheme {
    grammar: NotationGrammar,
    collator: Collator,
    records: Vec<ClassRecord>,
    parsed: Vec<ParsedNotation>,
    keys: Vec<SortKey>,
    by_id: HashMap<ClassId, usize>,
    by_notation: HashMap<String, usize>,
    terms: TermIndex,
    hierarchy: Hierarchy,
}

impl PartialEq for Scheme {
    fn eq(&self, other: &Self) -> bool {
        self.grammar == other.grammar && self.records == other.records
    }
}

impl Eq for Scheme {}

/// Parses and loads; fails atomically on the first inconsistency.
pub fn load_scheme(grammar: NotationGrammar, records: Vec<ClassRecord>) -> Result<Scheme, LoadError> {
    grammar.validate()?;
    let collator = Collator::new(&grammar);

    let mut entries = Vec::with_capacity(records.len());
    for mut record in records {
        let parsed =
            parse_canonical(&record.notation, &grammar, &collator).map_err(|error| LoadError::UnparsableNotation {
                class_id: record.class_id.clone(),
                notation: record.notation.clone(),
                error,
            })?;
        record.notation = parsed.render(&grammar);
        record.notation_kind = if parsed.components().count() == 1 {
            NotationKind::Simple
        } else {
            NotationKind::Composite
        };
        record.source_tables = parsed.source_tables();

        for (example, _) in &record.notes.combination_examples {
            parse_canonical(example, &grammar, &collator).map_err(|error| LoadError::UnparsableNotation {
                class_id: record.class_id.clone(),
                notation: example.clone(),
                error,
            })?;
        }
        for rule in &record.notes.combination_rules {
            if !rule.relator.is_empty() && grammar.relator(&rule.relator).is_none() {
                return Err(LoadError::UnknownRelator {
                    class_id: record.class_id.clone(),
                    relator: rule.relator.clone(),
                });
            }
        }
        let key = collator.sort_key(&parsed);
        entries.push((key, record, parsed));
    }

    entries.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.class_id.cmp(&b.1.class_id)));

    let mut by_id = HashMap::new();
    let mut by_notation: HashMap<String, usize> = HashMap::new();
    for (i, (_, record, _)) in entries.iter().enumerate() {
        if by_id.insert(record.class_id.clone(), i).is_some() {
            return Err(LoadError::DuplicateClassId(record.class_id.clone()));
        }
        if let Some(&j) = by_notation.get(&record.notation) {
            return Err(LoadError::DuplicateNotation {
                notation: record.notation.clone(),
                first: entries[j].1.class_id.clone(),
                second: record.class_id.clone(),
            });
        }
        by_notation.insert(record.notation.clone(), i);
    }

    let mut keys = Vec::with_capacity(entries.len());
    let mut records = Vec::with_capacity(entries.len());
    let mut parsed = Vec::with_capacity(entries.len());
    let mut terms = TermIndex::default();
    for (key, record, p) in entries {
        if !record.is_cancelled() {
            terms.insert(&record);
        }
        keys.push(key);
        records.push(record);
        parsed.push(p);
    }

    let mut scheme = Scheme {
        grammar,
        collator,
        records,
        parsed,
        keys,
        by_id,
        by_notation,
        terms,
        hierarchy: Hierarchy::default(),
    };

    for record in &scheme.records {
        for entry in &record.notes.history {
            if !scheme.by_id.contains_key(&entry.other_class) {
                return Err(LoadError::DanglingReference {
                    class_id: record.class_id.clone(),
                    target: entry.other_class.to_string(),
                });
            }
        }
    }

    scheme.hierarchy = hierarchy::build_tree(&scheme)?;
    Ok(scheme)
}

impl Scheme {
    pub fn empty(grammar: NotationGrammar) -> Result<Scheme, LoadError> {
        load_scheme(grammar, Vec::new())
    }

    pub fn grammar(&self) -> &NotationGrammar {
        &self.grammar
    }

    pub fn collator(&self) -> &Collator {
        &self.collator
    }

    /// Records in collation order.
    pub fn records(&self) -> &[ClassRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_parts(self) -> (NotationGrammar, Vec<ClassRecord>) {
        (self.grammar, self.records)
    }

    pub fn record(&self, id: &ClassId) -> Option<&ClassRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn index_of(&self, id: &ClassId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Record with this canonical notation.
    pub fn by_notation(&self, notation: &str) -> Option<&ClassRecord> {
        self.by_notation.get(notation).map(|&i| &self.records[i])
    }

    /// Looks a key up as a class id, then as a notation in any written form.
    pub fn lookup(&self, key: &str) -> Option<&ClassRecord> {
        if let Some(r) = self.record(&ClassId::new(key)) {
            return Some(r);
        }
        if let Some(r) = self.by_notation(key) {
            return Some(r);
        }
        let canonical = self.parse(key).ok()?.render(&self.grammar);
        self.by_notation(&canonical)
    }

    /// Canonical parse under this scheme's grammar.
    pub fn parse(&self, notation: &str) -> Result<ParsedNotation, NotationError> {
        parse_canonical(notation, &self.grammar, &self.collator)
    }

    pub fn canonical(&self, notation: &str) -> Result<String, NotationError> {
        Ok(self.parse(notation)?.render(&self.grammar))
    }

    pub(crate) fn parsed_at(&self, index: usize) -> &ParsedNotation {
        &self.parsed[index]
    }

    pub(crate) fn key_at(&self, index: usize) -> &SortKey {
        &self.keys[index]
    }

    pub fn sort_key(&self, notation: &str) -> Result<SortKey, NotationError> {
        Ok(self.collator.sort_key(&self.parse(notation)?))
    }

    pub fn compare(&self, a: &str, b: &str) -> Result<Ordering, NotationError> {
        self.collator.compare(a, b, &self.grammar)
    }

    pub fn sort_schedule<S: AsRef<str>>(&self, notations: &[S]) -> Result<Vec<String>, NotationError> {
        self.collator.sort_schedule(notations, &self.grammar)
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn tree(&self) -> &Tree {
        &self.hierarchy.tree
    }

    pub fn link(&self, id: &ClassId) -> Option<&HierarchyLink> {
        self.index_of(id).map(|i| &self.hierarchy.links[i])
    }

    /// Broader record of a class, if any.
    pub fn broader(&self, key: &str) -> Option<&ClassRecord> {
        let record = self.lookup(key)?;
        let broader = self.link(&record.class_id)?.broader.as_ref()?;
        self.record(broader)
    }

    /// Whole-word search over captions and index terms of live classes, in
    /// collation order.
    pub fn search(&self, query: &str) -> Vec<&ClassRecord> {
        let ids = self.terms.candidates(query);
        let mut hits: Vec<usize> = ids.iter().filter_map(|id| self.index_of(id)).collect();
        hits.sort_unstable();
        hits.into_iter()
            .map(|i| &self.records[i])
            .filter(|r| record_matches(r, query))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    ConstraintViolation(ConstraintViolation),
    DanglingReference {
        target: String,
    },
    /// One finding per skipped level; `notation` is the absent class.
    MissingLevel {
        notation: String,
    },
    Telescoped {
        broader: ClassId,
    },
    FalseHierarchySuspect {
        broader: ClassId,
    },
    Orphan,
    /// A replaces/replaced_by entry without its counterpart.
    AsymmetricHistory {
        other: ClassId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub class_id: ClassId,
    pub notation: String,
    pub kind: FindingKind,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t", self.class_id, self.notation)?;
        match &self.kind {
            FindingKind::ConstraintViolation(v) => write!(f, "constraint_violation\t{v}"),
            FindingKind::DanglingReference { target } => write!(f, "dangling_reference\t{target}"),
            FindingKind::MissingLevel { notation } => write!(f, "missing_level\t{notation}"),
            FindingKind::Telescoped { broader } => write!(f, "telescoped\t{broader}"),
            FindingKind::FalseHierarchySuspect { broader } => write!(f, "false_hierarchy_suspect\t{broader}"),
            FindingKind::Orphan => write!(f, "orphan\t"),
            FindingKind::AsymmetricHistory { other } => write!(f, "asymmetric_history\t{other}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn for_class<'a>(&'a self, id: &'a ClassId) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| &f.class_id == id)
    }

    pub fn missing_levels(&self, id: &ClassId) -> usize {
        self.for_class(id)
            .filter(|f| matches!(f.kind, FindingKind::MissingLevel { .. }))
            .count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Collects every diagnostic, record by record in collation order.
pub fn validate_scheme(scheme: &Scheme) -> ValidationReport {
    let mut findings = Vec::new();
    for (record, link) in scheme.records().iter().zip(&scheme.hierarchy().links) {
        let mut push = |kind| {
            findings.push(Finding {
                class_id: record.class_id.clone(),
                notation: record.notation.clone(),
                kind,
            })
        };

        for (example, _) in &record.notes.combination_examples {
            if let Ok(parsed) = scheme.parse(example) {
                if let Err(v) = check_constraints(&parsed, scheme) {
                    push(FindingKind::ConstraintViolation(v));
                }
            }
        }
        for target in &record.references {
            if scheme.lookup(target).is_none() {
                push(FindingKind::DanglingReference { target: target.clone() });
            }
        }
        for notation in &link.skipped {
            push(FindingKind::MissingLevel {
                notation: notation.clone(),
            });
        }
        for d in &link.diagnostics {
            let broader = link.broader.clone().unwrap_or_else(|| ClassId::new(""));
            match d {
                Diagnostic::Telescoped => push(FindingKind::Telescoped { broader }),
                Diagnostic::FalseHierarchySuspect => push(FindingKind::FalseHierarchySuspect { broader }),
                Diagnostic::Orphan => push(FindingKind::Orphan),
                Diagnostic::MissingLevel(_) => {}
            }
        }
        for entry in &record.notes.history {
            let counterpart = match entry.kind {
                ChangeKind::Replaces => ChangeKind::ReplacedBy,
                ChangeKind::ReplacedBy => ChangeKind::Replaces,
                ChangeKind::Cancelled => continue,
            };
            let symmetric = scheme.record(&entry.other_class).is_some_and(|other| {
                other
                    .notes
                    .history
                    .iter()
                    .any(|e| e.kind == counterpart && e.other_class == record.class_id)
            });
            if !symmetric {
                push(FindingKind::AsymmetricHistory {
                    other: entry.other_class.clone(),
                });
            }
        }
    }
    ValidationReport { findings }
}
