use std::fmt::Write as _;

use chrono::NaiveDate;
use thiserror::Error;

use crate::grammar::{NotationGrammar, RelatorDef, ScheduleOrder, SubjectAreaDef, TableDef};
use crate::notation::canonical;
use crate::record::{ChangeEntry, ClassId, ClassRecord, CombinationConstraint, ParallelDivisionRule};
use crate::scheme::{load_scheme, LoadError, Scheme};

pub const FORMAT_VERSION: &str = "1";
const MAGIC: &str = "%FCS";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FcsError {
    #[error("line {line}, column {col}: {message}")]
    SyntaxError { line: usize, col: usize, message: String },
    #[error("line {line}: unknown tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("unsupported format version `{0}`")]
    VersionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangeError {
    #[error(transparent)]
    Format(#[from] FcsError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> FcsError {
    FcsError::SyntaxError {
        line,
        col,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

pub(crate) fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn line(out: &mut String, tag: &str, fields: &[&str]) {
    out.push_str(tag);
    for f in fields {
        out.push('\t');
        out.push_str(&escape(f));
    }
    out.push('\n');
}

fn write_table(out: &mut String, t: &TableDef) {
    let alphabet: String = t.symbol_alphabet.iter().collect();
    let separators: String = t.separators.iter().collect();
    line(
        out,
        "TAB",
        &[
            &t.table_id,
            &t.facet_category,
            &t.standalone_prefix,
            &t.attach_indicator,
            &alphabet,
            &separators,
            &t.closer,
            if t.bare_term { "true" } else { "false" },
            t.hierarchy_style.as_str(),
            &t.label,
        ],
    );
}

fn write_relator(out: &mut String, r: &RelatorDef) {
    line(
        out,
        "REL",
        &[
            &r.symbol,
            &r.sort_rank.to_string(),
            r.kind.as_str(),
            if r.commutative { "true" } else { "false" },
            r.broader_rule.as_str(),
            &r.label,
        ],
    );
}

fn write_grammar(out: &mut String, g: &NotationGrammar) {
    for t in g.tables() {
        write_table(out, t);
    }
    for r in &g.relators {
        write_relator(out, r);
    }
    for a in &g.subject_areas {
        let order = a.citation_order.join(",");
        match &a.schedule_order {
            ScheduleOrder::ReverseOfCitation => line(out, "CIT", &[&a.area_notation, &order]),
            ScheduleOrder::Explicit(list) => line(out, "CIT", &[&a.area_notation, &order, &list.join(",")]),
        }
    }
    if !g.default_citation_order.is_empty() {
        line(out, "DCO", &[&g.default_citation_order.join(",")]);
    }
}

fn write_record(out: &mut String, r: &ClassRecord) {
    let n = &r.notes;
    line(out, "ID", &[r.class_id.as_str()]);
    line(out, "NOT", &[&r.notation]);
    if let Some(b) = &r.broader_override {
        line(out, "BRD", &[b]);
    }
    line(out, "CAP", &[&r.caption]);
    if let Some(s) = &n.scope {
        line(out, "SCO", &[s]);
    }
    if let Some(s) = &n.application {
        line(out, "APP", &[s]);
    }
    for c in &n.combination_rules {
        line(out, "CMB", &[&c.host_class, &c.relator, &c.allowed_partner]);
    }
    for p in &n.parallel_rules {
        line(
            out,
            "PAR",
            &[
                &p.host_class,
                &p.source_table,
                &p.strip_prefix,
                &p.host_affix.0,
                &p.host_affix.1,
            ],
        );
    }
    for (notation, caption) in &n.combination_examples {
        line(out, "EXC", &[notation, caption]);
    }
    for h in &n.history {
        let date = h.effective_date.format("%Y-%m-%d").to_string();
        line(out, "HIS", &[h.kind.as_str(), h.other_class.as_str(), &date]);
    }
    if let Some(s) = &n.content_note {
        line(out, "CNT", &[s]);
    }
    if let Some(s) = &n.editorial_note {
        line(out, "EDN", &[s]);
    }
    for r in &r.references {
        line(out, "REF", &[r]);
    }
    for t in &r.index_terms {
        line(out, "IDX", &[t]);
    }
}

/// Serializes grammar and records. Records are written in the order given.
pub fn write_parts(grammar: &NotationGrammar, records: &[ClassRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    write_grammar(&mut out, grammar);
    for r in records {
        out.push('\n');
        write_record(&mut out, r);
    }
    out
}

/// Deterministic text of a scheme: records in collation order, tags in
/// fixed order.
pub fn export_canonical(scheme: &Scheme) -> String {
    write_parts(scheme.grammar(), scheme.records())
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

struct Line<'a> {
    number: usize,
    tag: &'a str,
    fields: Vec<String>,
}

pub(crate) fn unescape(raw: &str, line: usize, col0: usize) -> Result<String, FcsError> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.char_indices();
    while let Some((i, c)) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next().map(|(_, c)| c) {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            _ => return Err(syntax(line, col0 + i, "bad escape sequence")),
        }
    }
    Ok(out)
}

fn split_line(text: &str, number: usize) -> Result<Line<'_>, FcsError> {
    let mut parts = text.split('\t');
    let tag = parts.next().unwrap_or("");
    let mut fields = Vec::new();
    let mut col = tag.len() + 2;
    for raw in parts {
        fields.push(unescape(raw, number, col)?);
        col += raw.len() + 1;
    }
    Ok(Line { number, tag, fields })
}

impl Line<'_> {
    fn expect(&self, min: usize, max: usize) -> Result<(), FcsError> {
        let n = self.fields.len();
        if n < min || n > max {
            let want = if min == max {
                format!("{min}")
            } else {
                format!("{min} to {max}")
            };
            return Err(syntax(
                self.number,
                self.tag.len() + 1,
                format!("`{}` takes {want} fields, found {n}", self.tag),
            ));
        }
        Ok(())
    }

    fn field(&self, i: usize) -> &str {
        self.fields.get(i).map_or("", String::as_str)
    }

    fn invalid(&self, what: impl std::fmt::Display) -> FcsError {
        syntax(self.number, self.tag.len() + 2, format!("invalid {}: {what}", self.tag))
    }

    fn bool(&self, i: usize) -> Result<bool, FcsError> {
        self.field(i)
            .parse()
            .map_err(|_| self.invalid(format!("`{}` is not a boolean", self.field(i))))
    }
}

fn categories(text: &str) -> Vec<String> {
    text.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn read_table(l: &Line) -> Result<TableDef, FcsError> {
    l.expect(10, 10)?;
    let mut t = TableDef::new(l.field(0), l.field(1), l.field(2), l.field(3), l.field(4))
        .with_separators(l.field(5))
        .with_closer(l.field(6))
        .with_bare_term(l.bool(7)?)
        .with_style(l.field(8).parse().map_err(|e| l.invalid(e))?);
    t.label = l.field(9).to_string();
    Ok(t)
}

fn read_relator(l: &Line) -> Result<RelatorDef, FcsError> {
    l.expect(6, 6)?;
    Ok(RelatorDef {
        symbol: l.field(0).to_string(),
        sort_rank: l.field(1).parse().map_err(|_| l.invalid("sort rank"))?,
        kind: l.field(2).parse().map_err(|e| l.invalid(e))?,
        commutative: l.bool(3)?,
        broader_rule: l.field(4).parse().map_err(|e| l.invalid(e))?,
        label: l.field(5).to_string(),
    })
}

fn read_grammar(lines: &[Line], end_line: usize) -> Result<NotationGrammar, FcsError> {
    let mut tables = Vec::new();
    let mut relators = Vec::new();
    let mut areas = Vec::new();
    let mut default_order = Vec::new();
    for l in lines {
        match l.tag {
            "TAB" => tables.push(read_table(l)?),
            "REL" => relators.push(read_relator(l)?),
            "CIT" => {
                l.expect(2, 3)?;
                areas.push(SubjectAreaDef {
                    area_notation: l.field(0).to_string(),
                    citation_order: categories(l.field(1)),
                    schedule_order: match l.fields.get(2) {
                        Some(list) => ScheduleOrder::Explicit(categories(list)),
                        None => ScheduleOrder::ReverseOfCitation,
                    },
                });
            }
            "DCO" => {
                l.expect(1, 1)?;
                default_order = categories(l.field(0));
            }
            tag => {
                return Err(FcsError::UnknownTag {
                    line: l.number,
                    tag: tag.to_string(),
                })
            }
        }
    }
    let mut tables = tables.into_iter();
    let main = tables
        .next()
        .ok_or_else(|| syntax(end_line, 1, "grammar has no main table"))?;
    let mut grammar = NotationGrammar::new(main).with_relators(relators);
    grammar.auxiliary_tables = tables.collect();
    grammar.subject_areas = areas;
    grammar.default_citation_order = default_order;
    Ok(grammar)
}

fn set_once(slot: &mut Option<String>, l: &Line) -> Result<(), FcsError> {
    l.expect(1, 1)?;
    if slot.is_some() {
        return Err(syntax(l.number, 1, format!("repeated `{}`", l.tag)));
    }
    *slot = Some(l.field(0).to_string());
    Ok(())
}

fn read_record(lines: &[Line], grammar: &NotationGrammar) -> Result<ClassRecord, FcsError> {
    let mut id = None;
    let mut notation = None;
    let mut caption = None;
    let mut record = ClassRecord::new("", "", "");
    for l in lines {
        let notes = &mut record.notes;
        match l.tag {
            "ID" => set_once(&mut id, l)?,
            "NOT" => set_once(&mut notation, l)?,
            "CAP" => set_once(&mut caption, l)?,
            "BRD" => set_once(&mut record.broader_override, l)?,
            "SCO" => set_once(&mut notes.scope, l)?,
            "APP" => set_once(&mut notes.application, l)?,
            "CNT" => set_once(&mut notes.content_note, l)?,
            "EDN" => set_once(&mut notes.editorial_note, l)?,
            "CMB" => {
                l.expect(3, 3)?;
                notes.combination_rules.push(CombinationConstraint {
                    host_class: l.field(0).to_string(),
                    relator: l.field(1).to_string(),
                    allowed_partner: l.field(2).to_string(),
                });
            }
            "PAR" => {
                l.expect(5, 5)?;
                notes.parallel_rules.push(ParallelDivisionRule {
                    host_class: l.field(0).to_string(),
                    source_table: l.field(1).to_string(),
                    strip_prefix: l.field(2).to_string(),
                    host_affix: (l.field(3).to_string(), l.field(4).to_string()),
                });
            }
            "EXC" => {
                l.expect(2, 2)?;
                notes
                    .combination_examples
                    .push((l.field(0).to_string(), l.field(1).to_string()));
            }
            "HIS" => {
                l.expect(3, 3)?;
                notes.history.push(ChangeEntry {
                    kind: l.field(0).parse().map_err(|e| l.invalid(e))?,
                    other_class: ClassId::new(l.field(1)),
                    effective_date: NaiveDate::parse_from_str(l.field(2), "%Y-%m-%d").map_err(|e| l.invalid(e))?,
                });
            }
            "REF" => {
                l.expect(1, 1)?;
                record.references.push(l.field(0).to_string());
            }
            "IDX" => {
                l.expect(1, 1)?;
                record.index_terms.push(l.field(0).to_string());
            }
            tag => {
                return Err(FcsError::UnknownTag {
                    line: l.number,
                    tag: tag.to_string(),
                })
            }
        }
    }
    let first = lines[0].number;
    let notation = notation.ok_or_else(|| syntax(first, 1, "record has no NOT line"))?;
    record.class_id = match id {
        Some(id) if !id.is_empty() => ClassId::new(id),
        Some(_) => return Err(syntax(first, 1, "empty class id")),
        None => ClassId::from_notation(&canonical(&notation, grammar).unwrap_or_else(|_| notation.clone())),
    };
    record.notation = notation;
    record.caption = caption.unwrap_or_default();
    Ok(record)
}

/// Parses `.fcs` text into a grammar and its records, in file order.
/// Records without an `ID` get one hashed from their canonical notation.
pub fn import_canonical(text: &str) -> Result<(NotationGrammar, Vec<ClassRecord>), FcsError> {
    let raw: Vec<&str> = text.split('\n').collect();
    // a final newline leaves one empty trailing piece
    let (last, body) = raw.split_last().expect("split yields at least one piece");
    if !last.is_empty() {
        return Err(syntax(raw.len(), last.len() + 1, "unterminated last line"));
    }

    let header = body.first().copied().unwrap_or("");
    match header.strip_prefix(MAGIC).and_then(|r| r.strip_prefix(' ')) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(FcsError::VersionMismatch(other.to_string())),
        None => return Err(syntax(1, 1, format!("expected `{MAGIC} {FORMAT_VERSION}` header"))),
    }

    let mut groups: Vec<Vec<Line>> = vec![Vec::new()];
    for (i, text) in body.iter().enumerate().skip(1) {
        if text.is_empty() {
            groups.push(Vec::new());
            continue;
        }
        if text.ends_with('\r') {
            return Err(syntax(i + 1, text.len(), "carriage return in line"));
        }
        let l = split_line(text, i + 1)?;
        if l.fields.is_empty() {
            return Err(syntax(i + 1, text.len() + 1, format!("expected TAB after `{}`", l.tag)));
        }
        groups.last_mut().expect("non-empty").push(l);
    }

    let mut groups = groups.into_iter();
    let grammar = read_grammar(&groups.next().unwrap_or_default(), body.len())?;
    let mut records = Vec::new();
    for group in groups.filter(|g| !g.is_empty()) {
        records.push(read_record(&group, &grammar)?);
    }
    Ok((grammar, records))
}

/// Imports and loads in one step.
pub fn read_scheme(text: &str) -> Result<Scheme, ExchangeError> {
    let (grammar, records) = import_canonical(text)?;
    Ok(load_scheme(grammar, records)?)
}
