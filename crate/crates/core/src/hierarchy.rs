//! Broader-class derivation, manual overrides, range membership and the
//! schedule tree.
//!
//! Expressive notation yields a broader class mechanically: a complex
//! classmark is subsumed under its first operand, a range under the broader
//! class of its start, and a compound or positional term under its longest
//! existing notational ancestor. Candidates that do not exist as classes are
//! reported as missing levels. Overrides always win; where an override
//! disagrees with the notation the link is flagged for review.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::grammar::{BroaderRule, HierarchyStyle, NotationGrammar, RelatorKind, TableDef};
use crate::notation::{Component, NotationError, ParsedNotation};
use crate::record::{ClassId, ClassRecord, NoteSet};
use crate::scheme::Scheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("class `{class_id}` overrides its broader class with missing `{target}`")]
    OverrideTargetMissing { class_id: ClassId, target: String },
    #[error("broader links form a cycle: {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" -> "))]
    CycleDetected(Vec<ClassId>),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error(transparent)]
    Notation(#[from] NotationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkOrigin {
    Derived,
    Override,
    RangeMembership,
}

impl LinkOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkOrigin::Derived => "derived",
            LinkOrigin::Override => "override",
            LinkOrigin::RangeMembership => "range_membership",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Diagnostic {
    MissingLevel(usize),
    /// Override points at a notational coordinate: a subordinate class
    /// written as if it were coordinate.
    Telescoped,
    /// Override disagrees with the notational parent.
    FalseHierarchySuspect,
    /// Enumerated-table class without an explicit broader link.
    Orphan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyLink {
    pub class_id: ClassId,
    pub broader: Option<ClassId>,
    pub origin: LinkOrigin,
    pub diagnostics: Vec<Diagnostic>,
    /// Notations of the missing levels skipped by the derivation, nearest
    /// first.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tree {
    pub roots: Vec<ClassId>,
    /// Children in collation order. Leaves have no entry.
    pub children: BTreeMap<ClassId, Vec<ClassId>>,
}

impl Tree {
    pub fn edge_count(&self) -> usize {
        self.children.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hierarchy {
    /// One link per record, in the scheme's record order.
    pub links: Vec<HierarchyLink>,
    pub tree: Tree,
}

/// Result of deriving a broader class from notation alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub broader: Option<String>,
    /// Candidate ancestors that do not exist, nearest first. Empty when no
    /// ancestor exists at all: a root has no gap to report.
    pub skipped: Vec<String>,
}

// ---------------------------------------------------------------------------
// Derivation
// ---------------------------------------------------------------------------

/// Shorter symbol strings of a term, nearest first. Strings ending in a
/// separator are not levels; the empty string counts only for tables with
/// a bare top term.
fn symbol_ancestors(table: &TableDef, symbols: &str) -> Vec<String> {
    if table.hierarchy_style == HierarchyStyle::Enumerated {
        return Vec::new();
    }
    let chars: Vec<char> = symbols.chars().collect();
    (0..chars.len())
        .rev()
        .map(|n| chars[..n].iter().collect::<String>())
        .filter(|p| table.accepts_symbols(p))
        .collect()
}

fn chain_with_last(chain: &[Component], table: &TableDef, symbols: &str) -> Vec<Component> {
    let mut out = chain[..chain.len() - 1].to_vec();
    out.push(Component::new(table, symbols));
    out
}

/// Notational ancestors of a parse, nearest first.
pub fn candidate_ancestors(parsed: &ParsedNotation, grammar: &NotationGrammar) -> Vec<ParsedNotation> {
    if parsed.operands.len() > 1 {
        let first = ParsedNotation::single(parsed.operands[0].clone());
        let Some(relator) = grammar.relator(&parsed.relators[0]) else {
            return Vec::new();
        };
        if relator.kind == RelatorKind::Range {
            return candidate_ancestors(&first, grammar);
        }
        return match relator.broader_rule {
            BroaderRule::FirstOperand => {
                let mut out = vec![first.clone()];
                out.extend(candidate_ancestors(&first, grammar));
                out
            }
            BroaderRule::None => Vec::new(),
        };
    }

    let chain = &parsed.operands[0];
    let mut out = Vec::new();
    let last = &chain[chain.len() - 1];
    let Some(last_table) = grammar.table(&last.table_id) else {
        return out;
    };
    if chain.len() > 1 {
        for prefix in symbol_ancestors(last_table, &last.symbols) {
            out.push(ParsedNotation::single(chain_with_last(chain, last_table, &prefix)));
        }
        // earlier attached components go whole
        for keep in (1..chain.len()).rev() {
            out.push(ParsedNotation::single(chain[..keep].to_vec()));
        }
    }
    let head = &chain[0];
    if let Some(head_table) = grammar.table(&head.table_id) {
        for prefix in symbol_ancestors(head_table, &head.symbols) {
            out.push(ParsedNotation::single(vec![Component::new(head_table, &prefix)]));
        }
    }
    out
}

pub(crate) fn derive_parsed(parsed: &ParsedNotation, scheme: &Scheme) -> Derivation {
    let grammar = scheme.grammar();
    let mut skipped = Vec::new();
    for candidate in candidate_ancestors(parsed, grammar) {
        let text = candidate.render(grammar);
        if scheme.by_notation(&text).is_some() {
            return Derivation {
                broader: Some(text),
                skipped,
            };
        }
        skipped.push(text);
    }
    Derivation {
        broader: None,
        skipped: Vec::new(),
    }
}

/// Broader class of `notation` by notation alone (no overrides, no ranges).
pub fn derive_broader(notation: &str, scheme: &Scheme) -> Result<Derivation, HierarchyError> {
    let parsed = scheme.parse(notation)?;
    Ok(derive_parsed(&parsed, scheme))
}

// ---------------------------------------------------------------------------
// Links and tree
// ---------------------------------------------------------------------------

fn is_range(parsed: &ParsedNotation, grammar: &NotationGrammar) -> bool {
    parsed
        .relators
        .first()
        .and_then(|r| grammar.relator(r))
        .is_some_and(|r| r.kind == RelatorKind::Range)
}

/// For every record, the range class it belongs to, if any. Members are
/// existing notational siblings of the range lying between its endpoints.
fn range_parents(scheme: &Scheme, derived: &[Derivation]) -> Vec<Option<usize>> {
    let grammar = scheme.grammar();
    let collator = scheme.collator();
    let records = scheme.records();
    let mut best: Vec<Option<usize>> = vec![None; records.len()];

    for (r, parsed) in (0..records.len()).map(|i| (i, scheme.parsed_at(i))) {
        if !is_range(parsed, grammar) {
            continue;
        }
        let start = collator.sort_key(&ParsedNotation::single(parsed.operands[0].clone()));
        let end = collator.sort_key(&ParsedNotation::single(
            parsed.operands[parsed.operands.len() - 1].clone(),
        ));
        for m in 0..records.len() {
            if m == r || derived[m].broader != derived[r].broader {
                continue;
            }
            let key = scheme.key_at(m);
            if *key < start || *key > end {
                continue;
            }
            // narrowest containing range: latest start, then earliest end
            let better = match best[m] {
                None => true,
                Some(cur) => {
                    let cur_parsed = scheme.parsed_at(cur);
                    let cur_start = collator.sort_key(&ParsedNotation::single(cur_parsed.operands[0].clone()));
                    let cur_end = collator.sort_key(&ParsedNotation::single(
                        cur_parsed.operands[cur_parsed.operands.len() - 1].clone(),
                    ));
                    (&start, std::cmp::Reverse(&end)) > (&cur_start, std::cmp::Reverse(&cur_end))
                }
            };
            if better {
                best[m] = Some(r);
            }
        }
    }
    best
}

/// Resolves the broader link of one record.
pub fn resolve_broader(record: &ClassRecord, scheme: &Scheme) -> Result<HierarchyLink, HierarchyError> {
    let index = scheme
        .index_of(&record.class_id)
        .ok_or_else(|| HierarchyError::UnknownClass(record.class_id.to_string()))?;
    Ok(compute_links(scheme)?.swap_remove(index))
}

/// Links for every record, in record order.
pub(crate) fn compute_links(scheme: &Scheme) -> Result<Vec<HierarchyLink>, HierarchyError> {
    let records = scheme.records();
    let derived: Vec<Derivation> = (0..records.len())
        .map(|i| derive_parsed(scheme.parsed_at(i), scheme))
        .collect();
    let ranges = range_parents(scheme, &derived);

    // parent implied by notation and ranges, ignoring overrides
    let natural: Vec<Option<usize>> = (0..records.len())
        .map(|i| match ranges[i] {
            Some(r) => Some(r),
            None => derived[i]
                .broader
                .as_deref()
                .and_then(|n| scheme.by_notation(n))
                .and_then(|rec| scheme.index_of(&rec.class_id)),
        })
        .collect();

    let mut links = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let mut diagnostics = Vec::new();
        let mut skipped = Vec::new();
        let (broader, origin) = if let Some(target) = &record.broader_override {
            let target_idx = scheme
                .lookup(target)
                .and_then(|t| scheme.index_of(&t.class_id))
                .ok_or_else(|| HierarchyError::OverrideTargetMissing {
                    class_id: record.class_id.clone(),
                    target: target.clone(),
                })?;
            // enumerated notation carries no hierarchy to disagree with
            if natural[i] != Some(target_idx) && !is_enumerated(scheme.parsed_at(i), scheme.grammar()) {
                if natural[target_idx] == natural[i] {
                    diagnostics.push(Diagnostic::Telescoped);
                } else {
                    diagnostics.push(Diagnostic::FalseHierarchySuspect);
                }
            }
            (Some(target_idx), LinkOrigin::Override)
        } else if let Some(r) = ranges[i] {
            (Some(r), LinkOrigin::RangeMembership)
        } else {
            skipped = derived[i].skipped.clone();
            if !skipped.is_empty() {
                diagnostics.push(Diagnostic::MissingLevel(skipped.len()));
            }
            if natural[i].is_none() && is_unanchored_enumerated(scheme.parsed_at(i), scheme.grammar()) {
                diagnostics.push(Diagnostic::Orphan);
            }
            (natural[i], LinkOrigin::Derived)
        };
        links.push(HierarchyLink {
            class_id: record.class_id.clone(),
            broader: broader.map(|b| records[b].class_id.clone()),
            origin,
            diagnostics,
            skipped,
        });
    }
    Ok(links)
}

fn is_enumerated(parsed: &ParsedNotation, grammar: &NotationGrammar) -> bool {
    parsed.components().all(|c| {
        grammar
            .table(&c.table_id)
            .is_some_and(|t| t.hierarchy_style == HierarchyStyle::Enumerated)
    })
}

fn is_unanchored_enumerated(parsed: &ParsedNotation, grammar: &NotationGrammar) -> bool {
    parsed.operands.len() == 1
        && parsed.operands[0].len() == 1
        && !parsed.operands[0][0].symbols.is_empty()
        && grammar
            .table(&parsed.operands[0][0].table_id)
            .is_some_and(|t| t.hierarchy_style == HierarchyStyle::Enumerated)
}

/// Resolves every link and assembles the tree; fails on a cycle.
pub fn build_tree(scheme: &Scheme) -> Result<Hierarchy, HierarchyError> {
    let links = compute_links(scheme)?;
    let records = scheme.records();
    let parent: Vec<Option<usize>> = links
        .iter()
        .map(|l| l.broader.as_ref().and_then(|b| scheme.index_of(b)))
        .collect();

    // Parent pointers form a functional graph; walk each chain once.
    let mut state = vec![0u8; records.len()]; // 0 new, 1 on current walk, 2 done
    for start in 0..records.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(c) = cur {
            match state[c] {
                2 => break,
                1 => {
                    let from = path.iter().position(|&p| p == c).unwrap_or(0);
                    let cycle = path[from..]
                        .iter()
                        .map(|&p: &usize| records[p].class_id.clone())
                        .collect();
                    return Err(HierarchyError::CycleDetected(cycle));
                }
                _ => {
                    state[c] = 1;
                    path.push(c);
                    cur = parent[c];
                }
            }
        }
        for p in path {
            state[p] = 2;
        }
    }

    let mut tree = Tree::default();
    for (i, record) in records.iter().enumerate() {
        match parent[i] {
            None => tree.roots.push(record.class_id.clone()),
            Some(p) => tree
                .children
                .entry(records[p].class_id.clone())
                .or_default()
                .push(record.class_id.clone()),
        }
    }
    Ok(Hierarchy { links, tree })
}

// ---------------------------------------------------------------------------
// Queries and output
// ---------------------------------------------------------------------------

pub fn children<'s>(key: &str, scheme: &'s Scheme) -> Result<Vec<&'s ClassRecord>, HierarchyError> {
    let record = scheme
        .lookup(key)
        .ok_or_else(|| HierarchyError::UnknownClass(key.to_string()))?;
    Ok(scheme
        .tree()
        .children
        .get(&record.class_id)
        .map(|ids| ids.iter().filter_map(|id| scheme.record(id)).collect())
        .unwrap_or_default())
}

/// Root-to-parent path of a class; empty for a root.
pub fn ancestors<'s>(key: &str, scheme: &'s Scheme) -> Result<Vec<&'s ClassRecord>, HierarchyError> {
    let record = scheme
        .lookup(key)
        .ok_or_else(|| HierarchyError::UnknownClass(key.to_string()))?;
    let mut path = Vec::new();
    let mut cur = scheme.link(&record.class_id).and_then(|l| l.broader.clone());
    while let Some(id) = cur {
        let Some(parent) = scheme.record(&id) else { break };
        path.push(parent);
        cur = scheme.link(&id).and_then(|l| l.broader.clone());
    }
    path.reverse();
    Ok(path)
}

/// Indented plain-text tree: two spaces per depth, `notation<TAB>caption`.
pub fn render_tree(scheme: &Scheme) -> String {
    fn walk(scheme: &Scheme, id: &ClassId, depth: usize, out: &mut String) {
        if let Some(record) = scheme.record(id) {
            let _ = writeln!(out, "{}{}\t{}", "  ".repeat(depth), record.notation, record.caption);
        }
        if let Some(kids) = scheme.tree().children.get(id) {
            for kid in kids {
                walk(scheme, kid, depth + 1, out);
            }
        }
    }
    let mut out = String::new();
    for root in &scheme.tree().roots {
        walk(scheme, root, 0, &mut out);
    }
    out
}

/// Adds placeholder records for every missing level so that each derived
/// link lands on its immediate notational parent.
pub fn materialize_missing_levels(scheme: &Scheme) -> Vec<ClassRecord> {
    let mut records: Vec<ClassRecord> = scheme.records().to_vec();
    let mut added: HashSet<String> = HashSet::new();
    for link in &scheme.hierarchy().links {
        for notation in &link.skipped {
            if scheme.by_notation(notation).is_some() || !added.insert(notation.clone()) {
                continue;
            }
            let mut placeholder = ClassRecord::new(ClassId::from_notation(notation), notation.clone(), "");
            placeholder.notes = NoteSet {
                editorial_note: Some("placeholder for missing level".to_string()),
                ..NoteSet::default()
            };
            records.push(placeholder);
        }
    }
    records
}
