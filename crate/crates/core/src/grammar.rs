//! Declarative notation grammar: tables, facet indicators, relators and
//! citation orders. Everything that parses, orders or synthesizes a classmark
//! is driven by a [`NotationGrammar`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Reasons a grammar is rejected. All of them make tokenization ambiguous or
/// leave a reference unresolved.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("duplicate table id `{0}`")]
    DuplicateTable(String),
    #[error("table `{0}` has an empty attach indicator")]
    EmptyIndicator(String),
    #[error("attach indicator `{shorter}` of table `{first}` is a prefix of `{longer}` of table `{second}`")]
    IndicatorPrefix {
        first: String,
        shorter: String,
        second: String,
        longer: String,
    },
    #[error("standalone prefix `{0}` is declared by more than one table")]
    DuplicateStandalone(String),
    #[error("table `{0}` has an empty symbol alphabet")]
    EmptyAlphabet(String),
    #[error("table `{table}` repeats symbol `{symbol}` in its alphabet")]
    DuplicateSymbol { table: String, symbol: char },
    #[error("separator `{symbol}` of table `{table}` is not in its alphabet")]
    SeparatorNotInAlphabet { table: String, symbol: char },
    #[error("symbol `{symbol}` of table `{table}` also opens `{lexeme}`")]
    SymbolConflict {
        table: String,
        symbol: char,
        lexeme: String,
    },
    #[error("relator symbol is empty")]
    EmptyRelator,
    #[error("duplicate relator `{0}`")]
    DuplicateRelator(String),
    #[error("relator `{shorter}` is a prefix of relator `{longer}`")]
    RelatorPrefix { shorter: String, longer: String },
    #[error("relator `{0}` collides with a table indicator")]
    RelatorIndicatorClash(String),
    #[error("more than one relator has kind `range`")]
    MultipleRangeRelators,
    #[error("main table has an empty attach indicator but standalone prefix `{0}`")]
    MainPrefixMismatch(String),
    #[error("subject area `{area}` names unknown facet category `{category}`")]
    UnknownCategory { area: String, category: String },
    #[error("subject area `{area}` repeats facet category `{category}`")]
    RepeatedCategory { area: String, category: String },
    #[error("duplicate subject area `{0}`")]
    DuplicateArea(String),
}

/// How a table expresses hierarchy in its notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HierarchyStyle {
    /// Each appended symbol deepens the hierarchy.
    #[default]
    Positional,
    /// Hierarchy only comes from explicit broader links.
    Enumerated,
}

impl HierarchyStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            HierarchyStyle::Positional => "positional",
            HierarchyStyle::Enumerated => "enumerated",
        }
    }
}

impl FromStr for HierarchyStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positional" => Ok(HierarchyStyle::Positional),
            "enumerated" => Ok(HierarchyStyle::Enumerated),
            other => Err(format!("unknown hierarchy style `{other}`")),
        }
    }
}

/// One notation table: the main schedule or an auxiliary (common) table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub table_id: String,
    pub label: String,
    pub facet_category: String,
    /// Opens this table's notation when it is cited on its own, e.g. `-A`.
    pub standalone_prefix: String,
    /// Opens this table's component inside a composite, e.g. `A`.
    pub attach_indicator: String,
    /// Valid symbols after the indicator; order defines collation rank.
    pub symbol_alphabet: Vec<char>,
    /// Alphabet members that carry no hierarchy and collate below every
    /// other symbol (UDC-style `.`). They can neither open nor close a term.
    pub separators: Vec<char>,
    /// Closing symbol(s) of a term, e.g. `)` for `(437.4)`. Empty when the
    /// table's terms are open-ended.
    pub closer: String,
    /// Whether the indicator alone, with no symbols, is a valid term (the
    /// table's top class, e.g. `-A` Africa).
    pub bare_term: bool,
    pub hierarchy_style: HierarchyStyle,
}

impl TableDef {
    pub fn new(
        table_id: impl Into<String>,
        facet_category: impl Into<String>,
        standalone_prefix: impl Into<String>,
        attach_indicator: impl Into<String>,
        alphabet: &str,
    ) -> Self {
        let table_id = table_id.into();
        TableDef {
            label: table_id.clone(),
            table_id,
            facet_category: facet_category.into(),
            standalone_prefix: standalone_prefix.into(),
            attach_indicator: attach_indicator.into(),
            symbol_alphabet: alphabet.chars().collect(),
            separators: Vec::new(),
            closer: String::new(),
            bare_term: false,
            hierarchy_style: HierarchyStyle::Positional,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_separators(mut self, separators: &str) -> Self {
        self.separators = separators.chars().collect();
        self
    }

    pub fn with_closer(mut self, closer: impl Into<String>) -> Self {
        self.closer = closer.into();
        self
    }

    pub fn with_bare_term(mut self, bare: bool) -> Self {
        self.bare_term = bare;
        self
    }

    pub fn with_style(mut self, style: HierarchyStyle) -> Self {
        self.hierarchy_style = style;
        self
    }

    pub fn is_separator(&self, c: char) -> bool {
        self.separators.contains(&c)
    }

    pub fn in_alphabet(&self, c: char) -> bool {
        self.symbol_alphabet.contains(&c)
    }

    /// Term in attached form: indicator, symbols, closer.
    pub fn attached_term(&self, symbols: &str) -> String {
        format!("{}{}{}", self.attach_indicator, symbols, self.closer)
    }

    /// Term as written when it opens an operand.
    pub fn standalone_term(&self, symbols: &str) -> String {
        format!("{}{}{}", self.standalone_prefix, symbols, self.closer)
    }

    /// Whether `symbols` is a well-formed symbol string for this table.
    pub fn accepts_symbols(&self, symbols: &str) -> bool {
        if symbols.is_empty() {
            return self.bare_term;
        }
        let first = symbols.chars().next().unwrap();
        let last = symbols.chars().next_back().unwrap();
        symbols.chars().all(|c| self.in_alphabet(c)) && !self.is_separator(first) && !self.is_separator(last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelatorKind {
    Range,
    Phase,
}

impl RelatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelatorKind::Range => "range",
            RelatorKind::Phase => "phase",
        }
    }
}

impl FromStr for RelatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "range" => Ok(RelatorKind::Range),
            "phase" => Ok(RelatorKind::Phase),
            other => Err(format!("unknown relator kind `{other}`")),
        }
    }
}

/// Which class, if any, a complex notation built with a relator is
/// subordinated to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BroaderRule {
    FirstOperand,
    None,
}

impl BroaderRule {
    pub fn as_str(self) -> &'static str {
        match self {
            BroaderRule::FirstOperand => "first_operand",
            BroaderRule::None => "none",
        }
    }
}

impl FromStr for BroaderRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_operand" => Ok(BroaderRule::FirstOperand),
            "none" => Ok(BroaderRule::None),
            other => Err(format!("unknown broader rule `{other}`")),
        }
    }
}

/// A relator (phase relationship or range symbol) joining two subjects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelatorDef {
    pub symbol: String,
    pub label: String,
    pub sort_rank: i64,
    pub kind: RelatorKind,
    pub commutative: bool,
    pub broader_rule: BroaderRule,
}

impl RelatorDef {
    pub fn phase(symbol: &str, label: &str, sort_rank: i64, commutative: bool) -> Self {
        RelatorDef {
            symbol: symbol.to_string(),
            label: label.to_string(),
            sort_rank,
            kind: RelatorKind::Phase,
            commutative,
            broader_rule: BroaderRule::FirstOperand,
        }
    }

    pub fn range(symbol: &str, label: &str, sort_rank: i64) -> Self {
        RelatorDef {
            symbol: symbol.to_string(),
            label: label.to_string(),
            sort_rank,
            kind: RelatorKind::Range,
            commutative: false,
            broader_rule: BroaderRule::FirstOperand,
        }
    }
}

/// The relator set of the FAT-HUM phase table, ranked in row order.
pub fn default_relators() -> Vec<RelatorDef> {
    vec![
        RelatorDef::phase("+", "Addition", 0, true),
        RelatorDef::range("/", "Range", 1),
        RelatorDef::phase(":", "Coordination", 2, true),
        RelatorDef::phase("=", "Comparison phase", 3, false),
        RelatorDef::phase(">>", "Influence phase", 4, false),
        RelatorDef::phase("<<", "Bias phase", 5, false),
        RelatorDef::phase("-", "Exposition phase", 6, false),
        RelatorDef::phase("<", "Sub-grouping", 7, false),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ScheduleOrder {
    /// Schedule order is the citation order read backwards.
    #[default]
    ReverseOfCitation,
    Explicit(Vec<String>),
}

/// Citation order of one subject area of the main table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectAreaDef {
    pub area_notation: String,
    /// Facet categories, most specific first.
    pub citation_order: Vec<String>,
    pub schedule_order: ScheduleOrder,
}

impl SubjectAreaDef {
    pub fn new(area_notation: impl Into<String>, citation_order: &[&str]) -> Self {
        SubjectAreaDef {
            area_notation: area_notation.into(),
            citation_order: citation_order.iter().map(|s| s.to_string()).collect(),
            schedule_order: ScheduleOrder::ReverseOfCitation,
        }
    }

    /// Facet categories in the order they are listed in the schedules.
    pub fn schedule_categories(&self) -> Vec<String> {
        match &self.schedule_order {
            ScheduleOrder::ReverseOfCitation => self.citation_order.iter().rev().cloned().collect(),
            ScheduleOrder::Explicit(list) => list.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotationGrammar {
    pub main_table: TableDef,
    pub auxiliary_tables: Vec<TableDef>,
    pub relators: Vec<RelatorDef>,
    pub subject_areas: Vec<SubjectAreaDef>,
    pub default_citation_order: Vec<String>,
}

impl NotationGrammar {
    pub fn new(main_table: TableDef) -> Self {
        NotationGrammar {
            main_table,
            auxiliary_tables: Vec::new(),
            relators: Vec::new(),
            subject_areas: Vec::new(),
            default_citation_order: Vec::new(),
        }
    }

    pub fn with_table(mut self, table: TableDef) -> Self {
        self.auxiliary_tables.push(table);
        self
    }

    pub fn with_relators(mut self, relators: Vec<RelatorDef>) -> Self {
        self.relators = relators;
        self
    }

    pub fn with_area(mut self, area: SubjectAreaDef) -> Self {
        self.subject_areas.push(area);
        self
    }

    /// Main table first, then auxiliaries in declaration order.
    pub fn tables(&self) -> impl Iterator<Item = &TableDef> {
        std::iter::once(&self.main_table).chain(self.auxiliary_tables.iter())
    }

    pub fn table(&self, table_id: &str) -> Option<&TableDef> {
        self.tables().find(|t| t.table_id == table_id)
    }

    pub fn relator(&self, symbol: &str) -> Option<&RelatorDef> {
        self.relators.iter().find(|r| r.symbol == symbol)
    }

    pub fn range_relator(&self) -> Option<&RelatorDef> {
        self.relators.iter().find(|r| r.kind == RelatorKind::Range)
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.tables().map(|t| t.facet_category.as_str()).collect()
    }

    /// Subject area governing a base notation: exact match first, otherwise
    /// the longest area notation that prefixes the base.
    pub fn subject_area_for(&self, base: &str) -> Option<&SubjectAreaDef> {
        self.subject_areas
            .iter()
            .filter(|a| base.starts_with(a.area_notation.as_str()))
            .max_by_key(|a| a.area_notation.len())
    }

    /// Citation order for a base notation, falling back to the default.
    pub fn citation_order_for(&self, base: &str) -> &[String] {
        match self.subject_area_for(base) {
            Some(area) => &area.citation_order,
            None => &self.default_citation_order,
        }
    }

    /// Checks every invariant that keeps tokenization deterministic.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let mut ids = HashSet::new();
        for table in self.tables() {
            if !ids.insert(table.table_id.as_str()) {
                return Err(GrammarError::DuplicateTable(table.table_id.clone()));
            }
            if table.symbol_alphabet.is_empty() {
                return Err(GrammarError::EmptyAlphabet(table.table_id.clone()));
            }
            let mut seen = HashSet::new();
            for &c in &table.symbol_alphabet {
                if !seen.insert(c) {
                    return Err(GrammarError::DuplicateSymbol {
                        table: table.table_id.clone(),
                        symbol: c,
                    });
                }
            }
            for &c in &table.separators {
                if !table.in_alphabet(c) {
                    return Err(GrammarError::SeparatorNotInAlphabet {
                        table: table.table_id.clone(),
                        symbol: c,
                    });
                }
            }
        }

        let main = &self.main_table;
        if main.attach_indicator.is_empty() && !main.standalone_prefix.is_empty() {
            return Err(GrammarError::MainPrefixMismatch(main.standalone_prefix.clone()));
        }
        for table in &self.auxiliary_tables {
            if table.attach_indicator.is_empty() || table.standalone_prefix.is_empty() {
                return Err(GrammarError::EmptyIndicator(table.table_id.clone()));
            }
        }

        let with_indicator: Vec<&TableDef> = self.tables().filter(|t| !t.attach_indicator.is_empty()).collect();
        for a in &with_indicator {
            for b in &with_indicator {
                if a.table_id != b.table_id && b.attach_indicator.starts_with(&a.attach_indicator) {
                    return Err(GrammarError::IndicatorPrefix {
                        first: a.table_id.clone(),
                        shorter: a.attach_indicator.clone(),
                        second: b.table_id.clone(),
                        longer: b.attach_indicator.clone(),
                    });
                }
            }
        }

        let mut standalone: HashMap<&str, &str> = HashMap::new();
        for table in self.tables().filter(|t| !t.standalone_prefix.is_empty()) {
            if let Some(other) = standalone.insert(&table.standalone_prefix, &table.table_id) {
                if other != table.table_id {
                    return Err(GrammarError::DuplicateStandalone(table.standalone_prefix.clone()));
                }
            }
        }

        let mut range_count = 0;
        for (i, rel) in self.relators.iter().enumerate() {
            if rel.symbol.is_empty() {
                return Err(GrammarError::EmptyRelator);
            }
            if rel.kind == RelatorKind::Range {
                range_count += 1;
            }
            for other in &self.relators[i + 1..] {
                if other.symbol == rel.symbol {
                    return Err(GrammarError::DuplicateRelator(rel.symbol.clone()));
                }
                // `<` beside `<<` is fine as long as the tail of the longer
                // symbol could never open an operand.
                for (short, long) in [(rel, other), (other, rel)] {
                    let tail = long.symbol.strip_prefix(short.symbol.as_str());
                    if tail.is_some_and(|t| self.can_open_operand(t)) {
                        return Err(GrammarError::RelatorPrefix {
                            shorter: short.symbol.clone(),
                            longer: long.symbol.clone(),
                        });
                    }
                }
            }
            let clash = self.tables().any(|t| {
                t.attach_indicator == rel.symbol || t.standalone_prefix == rel.symbol || t.closer == rel.symbol
            });
            if clash {
                return Err(GrammarError::RelatorIndicatorClash(rel.symbol.clone()));
            }
        }
        if range_count > 1 {
            return Err(GrammarError::MultipleRangeRelators);
        }

        // Inside a term, a symbol must never be mistaken for the start of an
        // indicator, a relator or a closer.
        let mut mid_term: Vec<&str> = self
            .tables()
            .map(|t| t.attach_indicator.as_str())
            .chain(self.tables().map(|t| t.closer.as_str()))
            .chain(self.relators.iter().map(|r| r.symbol.as_str()))
            .filter(|s| !s.is_empty())
            .collect();
        mid_term.sort_unstable();
        mid_term.dedup();
        for table in self.tables() {
            for &c in &table.symbol_alphabet {
                if let Some(lexeme) = mid_term.iter().find(|l| l.starts_with(c)) {
                    return Err(GrammarError::SymbolConflict {
                        table: table.table_id.clone(),
                        symbol: c,
                        lexeme: lexeme.to_string(),
                    });
                }
            }
        }
        // With an implicit main table, a standalone prefix must not begin with
        // a main-table symbol.
        if main.standalone_prefix.is_empty() {
            for table in self.tables() {
                if let Some(c) = table.standalone_prefix.chars().next() {
                    if main.in_alphabet(c) {
                        return Err(GrammarError::SymbolConflict {
                            table: main.table_id.clone(),
                            symbol: c,
                            lexeme: table.standalone_prefix.clone(),
                        });
                    }
                }
            }
        }

        let categories = self.categories();
        let mut areas = HashSet::new();
        for area in &self.subject_areas {
            if !areas.insert(area.area_notation.as_str()) {
                return Err(GrammarError::DuplicateArea(area.area_notation.clone()));
            }
            check_category_list(&area.area_notation, &area.citation_order, &categories)?;
            if let ScheduleOrder::Explicit(list) = &area.schedule_order {
                check_category_list(&area.area_notation, list, &categories)?;
            }
        }
        check_category_list("<default>", &self.default_citation_order, &categories)?;
        Ok(())
    }
}

impl NotationGrammar {
    fn can_open_operand(&self, text: &str) -> bool {
        let implicit_main = self.main_table.standalone_prefix.is_empty()
            && text.chars().next().is_some_and(|c| self.main_table.in_alphabet(c));
        implicit_main
            || self.tables().any(|t| {
                !t.standalone_prefix.is_empty()
                    && (text.starts_with(&t.standalone_prefix) || t.standalone_prefix.starts_with(text))
            })
    }
}

fn check_category_list(area: &str, list: &[String], categories: &BTreeSet<&str>) -> Result<(), GrammarError> {
    let mut seen = HashSet::new();
    for category in list {
        if !categories.contains(category.as_str()) {
            return Err(GrammarError::UnknownCategory {
                area: area.to_string(),
                category: category.clone(),
            });
        }
        if !seen.insert(category.as_str()) {
            return Err(GrammarError::RepeatedCategory {
                area: area.to_string(),
                category: category.clone(),
            });
        }
    }
    Ok(())
}

impl fmt::Display for HierarchyStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
