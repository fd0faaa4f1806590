//! History-aware authority store.
//!
//! State is a snapshot plus an append-only journal of primitive operations
//! (`record`, `replace`). Opening a store directory loads `scheme.fcs` and
//! replays `journal.log`; [`Store::checkpoint`] folds the journal into a
//! new snapshot. Every higher-level operation, including global change
//! propagation, is journalled as the primitives it performed, so replaying
//! the journal reproduces the state exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use thiserror::Error;

use crate::collation::Collator;
use crate::exchange::fcs::{escape, unescape, write_parts};
use crate::exchange::{import_canonical, ExchangeError};
use crate::grammar::NotationGrammar;
use crate::index::{record_matches, TermIndex};
use crate::notation::{parse_canonical, Component, NotationError, ParsedNotation};
use crate::record::{ChangeEntry, ChangeKind, ClassId, ClassRecord};
use crate::scheme::{load_scheme, LoadError, Scheme};

pub const SNAPSHOT_FILE: &str = "scheme.fcs";
pub const JOURNAL_FILE: &str = "journal.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Notation(#[from] NotationError),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` cannot replace itself")]
    SelfReplacement(ClassId),
    #[error("replacement chain loops: {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" -> "))]
    HistoryCycle(Vec<ClassId>),
    #[error("`{old}` is not recorded as replaced by `{new}`")]
    NotReplaced { old: ClassId, new: ClassId },
    #[error("rewriting `{class_id}` gives `{notation}`, which already belongs to `{existing}`")]
    RewriteConflict {
        class_id: ClassId,
        notation: String,
        existing: ClassId,
    },
    #[error("`{notation}` cannot stand in a component of `{class_id}`")]
    IncompatibleReplacement { class_id: ClassId, notation: String },
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A journalled primitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    Record {
        class_id: ClassId,
        notation: String,
        caption: String,
        index_terms: Vec<String>,
    },
    Replace {
        old: ClassId,
        new: ClassId,
        date: NaiveDate,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub timestamp: DateTime<Utc>,
    pub operation: Operation,
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        let ts = self.timestamp.to_rfc3339_opts(SecondsFormat::Micros, true);
        let fields: Vec<String> = match &self.operation {
            Operation::Record {
                class_id,
                notation,
                caption,
                index_terms,
            } => ["record", class_id.as_str(), notation, caption]
                .into_iter()
                .map(str::to_string)
                .chain(index_terms.iter().cloned())
                .collect(),
            Operation::Replace { old, new, date } => vec![
                "replace".to_string(),
                old.to_string(),
                new.to_string(),
                date.format("%Y-%m-%d").to_string(),
            ],
        };
        let mut line = ts;
        for f in fields {
            line.push('\t');
            line.push_str(&escape(&f));
        }
        line
    }

    pub fn parse_line(text: &str, number: usize) -> Result<LogEntry, StoreError> {
        let bad = |message: String| StoreError::Journal { line: number, message };
        let mut fields = Vec::new();
        for raw in text.split('\t') {
            fields.push(unescape(raw, number, 1).map_err(|e| bad(e.to_string()))?);
        }
        let timestamp = DateTime::parse_from_rfc3339(&fields[0])
            .map_err(|e| bad(format!("timestamp: {e}")))?
            .with_timezone(&Utc);
        let operation = match fields.get(1).map(String::as_str) {
            Some("record") if fields.len() >= 5 => Operation::Record {
                class_id: ClassId::new(fields[2].clone()),
                notation: fields[3].clone(),
                caption: fields[4].clone(),
                index_terms: fields[5..].to_vec(),
            },
            Some("replace") if fields.len() == 5 => Operation::Replace {
                old: ClassId::new(fields[2].clone()),
                new: ClassId::new(fields[3].clone()),
                date: NaiveDate::parse_from_str(&fields[4], "%Y-%m-%d").map_err(|e| bad(format!("date: {e}")))?,
            },
            other => return Err(bad(format!("malformed operation {other:?}"))),
        };
        Ok(LogEntry { timestamp, operation })
    }
}

/// Outcome of following a replacement chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub record: ClassRecord,
    pub chain_length: usize,
}

/// One composite rewritten by change propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub affected: ClassId,
    pub replacement: ClassId,
    pub notation: String,
}

#[derive(Debug)]
pub struct Store {
    grammar: NotationGrammar,
    collator: Collator,
    records: BTreeMap<ClassId, ClassRecord>,
    notation_index: BTreeMap<String, ClassId>,
    term_index: TermIndex,
    change_log: Vec<LogEntry>,
    dir: Option<PathBuf>,
    journal: Option<File>,
}

impl PartialEq for Store {
    /// Equal grammar and records; indexes are derived, the log is history.
    fn eq(&self, other: &Self) -> bool {
        self.grammar == other.grammar && self.records == other.records
    }
}

impl Store {
    /// Store held only in memory, seeded from a scheme.
    pub fn in_memory(scheme: &Scheme) -> Store {
        let mut store = Store {
            grammar: scheme.grammar().clone(),
            collator: scheme.collator().clone(),
            records: BTreeMap::new(),
            notation_index: BTreeMap::new(),
            term_index: TermIndex::default(),
            change_log: Vec::new(),
            dir: None,
            journal: None,
        };
        for record in scheme.records() {
            store.insert(record.clone());
        }
        store
    }

    /// Creates a store directory holding `scheme` and an empty journal.
    pub fn create(dir: &Path, scheme: &Scheme) -> Result<Store, StoreError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SNAPSHOT_FILE), write_parts(scheme.grammar(), scheme.records()))?;
        File::create(dir.join(JOURNAL_FILE))?;
        Store::open(dir)
    }

    /// Loads the snapshot and replays the journal.
    pub fn open(dir: &Path) -> Result<Store, StoreError> {
        let text = fs::read_to_string(dir.join(SNAPSHOT_FILE))?;
        let (grammar, records) = import_canonical(&text).map_err(ExchangeError::from)?;
        let scheme = load_scheme(grammar, records)?;
        let mut store = Store::in_memory(&scheme);
        let journal_path = dir.join(JOURNAL_FILE);
        if journal_path.exists() {
            let entries = fs::read_to_string(&journal_path)?
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.is_empty())
                .map(|(i, l)| LogEntry::parse_line(l, i + 1))
                .collect::<Result<Vec<_>, _>>()?;
            store.replay(&entries)?;
        }
        store.dir = Some(dir.to_path_buf());
        store.journal = Some(OpenOptions::new().create(true).append(true).open(journal_path)?);
        Ok(store)
    }

    /// Re-applies journalled operations without journalling them again.
    pub fn replay(&mut self, entries: &[LogEntry]) -> Result<(), StoreError> {
        for entry in entries {
            self.apply(&entry.operation)?;
            self.change_log.push(entry.clone());
        }
        Ok(())
    }

    /// Writes the current state as the snapshot and empties the journal.
    pub fn checkpoint(&mut self) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, write_parts(&self.grammar, &self.sorted_records()))?;
        fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        self.journal = Some(File::create(dir.join(JOURNAL_FILE))?);
        Ok(())
    }

    pub fn grammar(&self) -> &NotationGrammar {
        &self.grammar
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &ClassId) -> Option<&ClassRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ClassRecord> {
        self.records.values()
    }

    pub fn change_log(&self) -> &[LogEntry] {
        &self.change_log
    }

    pub fn notation_index(&self) -> &BTreeMap<String, ClassId> {
        &self.notation_index
    }

    pub fn term_index(&self) -> &TermIndex {
        &self.term_index
    }

    pub fn canonical(&self, notation: &str) -> Result<String, NotationError> {
        Ok(self.parse(notation)?.render(&self.grammar))
    }

    fn parse(&self, notation: &str) -> Result<ParsedNotation, NotationError> {
        parse_canonical(notation, &self.grammar, &self.collator)
    }

    /// Records in collation order of notation.
    pub fn sorted_records(&self) -> Vec<ClassRecord> {
        let mut keyed: Vec<_> = self
            .records
            .values()
            .map(|r| {
                let key = self.parse(&r.notation).map(|p| self.collator.sort_key(&p)).ok();
                (key, r.class_id.clone(), r)
            })
            .collect();
        keyed.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        keyed.into_iter().map(|(_, _, r)| r.clone()).collect()
    }

    /// Loads the current state as an immutable scheme.
    pub fn to_scheme(&self) -> Result<Scheme, LoadError> {
        load_scheme(self.grammar.clone(), self.records.values().cloned().collect())
    }

    /// Class id for a key given as an id or as a notation in any form.
    pub fn find(&self, key: &str) -> Option<&ClassId> {
        let id = ClassId::new(key);
        if let Some((id, _)) = self.records.get_key_value(&id) {
            return Some(id);
        }
        let canonical = self.canonical(key).ok()?;
        self.notation_index.get(&canonical)
    }

    // -- primitives ---------------------------------------------------------

    fn insert(&mut self, record: ClassRecord) {
        if !record.is_cancelled() {
            self.term_index.insert(&record);
        }
        self.notation_index
            .insert(record.notation.clone(), record.class_id.clone());
        self.records.insert(record.class_id.clone(), record);
    }

    fn apply(&mut self, op: &Operation) -> Result<(), StoreError> {
        match op {
            Operation::Record {
                class_id,
                notation,
                caption,
                index_terms,
            } => {
                if self.records.contains_key(class_id) {
                    return Err(StoreError::Journal {
                        line: self.change_log.len() + 1,
                        message: format!("class `{class_id}` recorded twice"),
                    });
                }
                let parsed = self.parse(notation)?;
                let mut record = ClassRecord::new(class_id.clone(), parsed.render(&self.grammar), caption.clone());
                record.index_terms = index_terms.clone();
                record.source_tables = parsed.source_tables();
                if parsed.components().count() > 1 {
                    record.notation_kind = crate::record::NotationKind::Composite;
                }
                self.insert(record);
            }
            Operation::Replace { old, new, date } => {
                if old == new {
                    return Err(StoreError::SelfReplacement(old.clone()));
                }
                for id in [old, new] {
                    if !self.records.contains_key(id) {
                        return Err(StoreError::UnknownClass(id.to_string()));
                    }
                }
                let old_record = self.records.get_mut(old).expect("checked");
                let was_live = !old_record.is_cancelled();
                old_record.notes.history.push(ChangeEntry {
                    kind: ChangeKind::ReplacedBy,
                    other_class: new.clone(),
                    effective_date: *date,
                });
                if was_live {
                    let snapshot = old_record.clone();
                    self.term_index.remove(&snapshot);
                }
                self.records
                    .get_mut(new)
                    .expect("checked")
                    .notes
                    .history
                    .push(ChangeEntry {
                        kind: ChangeKind::Replaces,
                        other_class: old.clone(),
                        effective_date: *date,
                    });
            }
        }
        Ok(())
    }

    fn commit(&mut self, op: Operation) -> Result<(), StoreError> {
        self.apply(&op)?;
        let entry = LogEntry {
            timestamp: Utc::now(),
            operation: op,
        };
        if let Some(journal) = &mut self.journal {
            writeln!(journal, "{}", entry.to_line())?;
            journal.flush()?;
        }
        self.change_log.push(entry);
        Ok(())
    }

    fn fresh_id(&self, canonical: &str) -> ClassId {
        let base = ClassId::from_notation(canonical);
        let mut id = base.clone();
        let mut n = 1;
        while self.records.contains_key(&id) {
            id = ClassId::new(format!("{base}-{n}"));
            n += 1;
        }
        id
    }

    // -- operations ---------------------------------------------------------

    /// Records a composed notation for reuse. Idempotent on canonical form:
    /// a notation already in the store returns its existing class id.
    pub fn record_composite(&mut self, notation: &str, caption: Option<&str>) -> Result<ClassId, StoreError> {
        self.record_with_terms(notation, caption.unwrap_or(""), Vec::new())
    }

    fn record_with_terms(
        &mut self,
        notation: &str,
        caption: &str,
        index_terms: Vec<String>,
    ) -> Result<ClassId, StoreError> {
        let canonical = self.canonical(notation)?;
        if let Some(id) = self.notation_index.get(&canonical) {
            return Ok(id.clone());
        }
        let class_id = self.fresh_id(&canonical);
        self.commit(Operation::Record {
            class_id: class_id.clone(),
            notation: canonical,
            caption: caption.to_string(),
            index_terms,
        })?;
        Ok(class_id)
    }

    /// Writes the symmetric replaces / replaced-by pair. The old class stays
    /// resolvable but drops out of term search.
    pub fn replace(&mut self, old: &ClassId, new: &ClassId, date: NaiveDate) -> Result<(), StoreError> {
        self.commit(Operation::Replace {
            old: old.clone(),
            new: new.clone(),
            date,
        })
    }

    /// Follows `replaced_by` links to the current class.
    pub fn resolve(&self, key: &str) -> Result<Resolution, StoreError> {
        let start = self
            .find(key)
            .ok_or_else(|| StoreError::UnknownClass(key.to_string()))?;
        let mut seen = vec![start.clone()];
        let mut current = &self.records[start];
        while let Some(next) = current.replaced_by() {
            if seen.contains(next) {
                seen.push(next.clone());
                return Err(StoreError::HistoryCycle(seen));
            }
            seen.push(next.clone());
            current = self
                .records
                .get(next)
                .ok_or_else(|| StoreError::UnknownClass(next.to_string()))?;
        }
        Ok(Resolution {
            record: current.clone(),
            chain_length: seen.len() - 1,
        })
    }

    /// Rewrites every live composite that contains `old` as an operand or a
    /// component, in collation order. Each rewrite becomes a new record
    /// that replaces the composite it came from. Nothing is written unless
    /// every rewrite succeeds.
    pub fn propagate_change(&mut self, old: &ClassId, new: &ClassId) -> Result<Vec<Rewrite>, StoreError> {
        let plan = self.plan_propagation(old, new)?;
        let date = self.records[old]
            .notes
            .history
            .iter()
            .rev()
            .find(|h| h.kind == ChangeKind::ReplacedBy && &h.other_class == new)
            .map(|h| h.effective_date)
            .expect("checked by plan");
        let mut rewrites = Vec::new();
        for (affected, notation) in plan {
            let source = &self.records[&affected];
            let (caption, terms) = (source.caption.clone(), source.index_terms.clone());
            let replacement = self.record_with_terms(&notation, &caption, terms)?;
            self.replace(&affected, &replacement, date)?;
            rewrites.push(Rewrite {
                affected,
                replacement,
                notation,
            });
        }
        Ok(rewrites)
    }

    /// The rewrites [`Store::propagate_change`] would make, without making them.
    pub fn plan_propagation(&self, old: &ClassId, new: &ClassId) -> Result<Vec<(ClassId, String)>, StoreError> {
        let old_record = self
            .records
            .get(old)
            .ok_or_else(|| StoreError::UnknownClass(old.to_string()))?;
        let new_record = self
            .records
            .get(new)
            .ok_or_else(|| StoreError::UnknownClass(new.to_string()))?;
        if old_record.replaced_by() != Some(new) {
            return Err(StoreError::NotReplaced {
                old: old.clone(),
                new: new.clone(),
            });
        }
        let from = self.parse(&old_record.notation)?;
        let to = self.parse(&new_record.notation)?;

        let mut plan = Vec::new();
        let mut claimed: HashSet<String> = HashSet::new();
        for record in self.sorted_records() {
            if record.class_id == *old || record.is_cancelled() {
                continue;
            }
            let parsed = self.parse(&record.notation)?;
            let Some(mut rewritten) =
                substitute(&parsed, &from, &to).map_err(|ComplexReplacement| StoreError::IncompatibleReplacement {
                    class_id: record.class_id.clone(),
                    notation: new_record.notation.clone(),
                })?
            else {
                continue;
            };
            rewritten.canonicalize(&self.grammar, &self.collator);
            let notation = rewritten.render(&self.grammar);
            if self.canonical(&notation).ok().as_deref() != Some(notation.as_str()) {
                return Err(StoreError::IncompatibleReplacement {
                    class_id: record.class_id.clone(),
                    notation: new_record.notation.clone(),
                });
            }
            if let Some(existing) = self.notation_index.get(&notation) {
                return Err(StoreError::RewriteConflict {
                    class_id: record.class_id.clone(),
                    notation,
                    existing: existing.clone(),
                });
            }
            if !claimed.insert(notation.clone()) {
                return Err(StoreError::RewriteConflict {
                    class_id: record.class_id.clone(),
                    existing: plan
                        .iter()
                        .find(|(_, n)| *n == notation)
                        .map(|(id, _): &(ClassId, String)| id.clone())
                        .unwrap_or_else(|| record.class_id.clone()),
                    notation,
                });
            }
            plan.push((record.class_id.clone(), notation));
        }
        Ok(plan)
    }

    /// Live records matching `term` as whole words, in collation order.
    pub fn search_by_term(&self, term: &str) -> Vec<ClassRecord> {
        let hits: BTreeSet<ClassId> = self.term_index.candidates(term);
        let mut found: Vec<(Option<crate::collation::SortKey>, ClassRecord)> = hits
            .iter()
            .filter_map(|id| self.records.get(id))
            .filter(|r| !r.is_cancelled() && record_matches(r, term))
            .map(|r| {
                (
                    self.parse(&r.notation).map(|p| self.collator.sort_key(&p)).ok(),
                    r.clone(),
                )
            })
            .collect();
        found.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.class_id.cmp(&b.1.class_id)));
        found.into_iter().map(|(_, r)| r).collect()
    }
}

/// A complex replacement cannot stand in for an operand or a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexReplacement;

/// `parsed` with `from` replaced by `to`: as a whole operand, or, when
/// `from` is a single component, wherever that component occurs. `None`
/// when `from` does not occur.
pub fn substitute(
    parsed: &ParsedNotation,
    from: &ParsedNotation,
    to: &ParsedNotation,
) -> Result<Option<ParsedNotation>, ComplexReplacement> {
    if from.operands.len() != 1 {
        // complex classes only match a whole classmark, which is the class itself
        return Ok(None);
    }
    let from_chain = &from.operands[0];
    let mut out = parsed.clone();
    let mut hit = false;
    for chain in &mut out.operands {
        if chain == from_chain {
            if to.operands.len() != 1 {
                return Err(ComplexReplacement);
            }
            *chain = to.operands[0].clone();
            hit = true;
        } else if from_chain.len() == 1 && chain.contains(&from_chain[0]) {
            if to.operands.len() != 1 {
                return Err(ComplexReplacement);
            }
            let mut spliced: Vec<Component> = Vec::with_capacity(chain.len());
            for c in chain.iter() {
                if *c == from_chain[0] {
                    spliced.extend(to.operands[0].iter().cloned());
                } else {
                    spliced.push(c.clone());
                }
            }
            *chain = spliced;
            hit = true;
        }
    }
    Ok(hit.then_some(out))
}
