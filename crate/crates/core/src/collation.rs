//! Mechanical schedule order over classmarks.
//!
//! Classmarks collate component by component. Tables rank by the collation
//! of their attach indicators, symbols by their position in the table
//! alphabet. After a component, the end of the classmark sorts first, then a
//! further attached component, then a relator, then a deeper symbol. So a
//! class precedes its compounds, its compounds precede its phase
//! combinations, and all of them precede its subdivisions. A range `X/Y`
//! sorts immediately before `X`.
//!
//! Two routes produce this order: [`Collator::compare_parsed`] walks the
//! parse structure directly, and [`Collator::sort_key`] packs it into a flat
//! weight vector whose byte encoding sorts the same way.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::grammar::{NotationGrammar, RelatorKind};
use crate::notation::{parse_canonical, Component, NotationError, ParsedNotation};

/// Rank tables and precomputed weights for one grammar.
#[derive(Debug, Clone)]
pub struct Collator {
    table_rank: HashMap<String, u32>,
    relator_rank: HashMap<String, u32>,
    symbol_rank: HashMap<String, HashMap<char, u32>>,
    range_symbol: Option<String>,
    table_count: u32,
    relator_count: u32,
}

impl Collator {
    pub fn new(grammar: &NotationGrammar) -> Self {
        let mut tables: Vec<_> = grammar.tables().collect();
        tables.sort_by(|a, b| {
            a.attach_indicator
                .cmp(&b.attach_indicator)
                .then_with(|| a.table_id.cmp(&b.table_id))
        });
        let table_rank = tables
            .iter()
            .enumerate()
            .map(|(i, t)| (t.table_id.clone(), i as u32))
            .collect();

        let mut relators: Vec<_> = grammar.relators.iter().collect();
        relators.sort_by(|a, b| a.sort_rank.cmp(&b.sort_rank).then_with(|| a.symbol.cmp(&b.symbol)));
        let relator_rank = relators
            .iter()
            .enumerate()
            .map(|(i, r)| (r.symbol.clone(), i as u32))
            .collect();

        // Separators carry zero weight: they rank below every other symbol.
        let symbol_rank = grammar
            .tables()
            .map(|t| {
                let ordered = t
                    .symbol_alphabet
                    .iter()
                    .filter(|c| t.is_separator(**c))
                    .chain(t.symbol_alphabet.iter().filter(|c| !t.is_separator(**c)));
                let ranks = ordered.enumerate().map(|(i, &c)| (c, i as u32)).collect();
                (t.table_id.clone(), ranks)
            })
            .collect();

        Collator {
            table_rank,
            relator_rank,
            symbol_rank,
            range_symbol: grammar
                .relators
                .iter()
                .find(|r| r.kind == RelatorKind::Range)
                .map(|r| r.symbol.clone()),
            table_count: grammar.tables().count() as u32,
            relator_count: grammar.relators.len() as u32,
        }
    }

    fn is_range(&self, symbol: &str) -> bool {
        self.range_symbol.as_deref() == Some(symbol)
    }

    fn table_of(&self, c: &Component) -> u32 {
        self.table_rank.get(&c.table_id).copied().unwrap_or(u32::MAX)
    }

    fn symbols_of<'a>(&'a self, c: &'a Component) -> impl Iterator<Item = u32> + 'a {
        let ranks = self.symbol_rank.get(&c.table_id);
        c.symbols
            .chars()
            .map(move |ch| ranks.and_then(|r| r.get(&ch)).copied().unwrap_or(u32::MAX))
    }

    // -----------------------------------------------------------------------
    // Structural route
    // -----------------------------------------------------------------------

    /// Compares two parses, both assumed canonical.
    pub fn compare_parsed(&self, a: &ParsedNotation, b: &ParsedNotation) -> Ordering {
        let sa = self.segments(a);
        let sb = self.segments(b);
        for (x, y) in sa.iter().zip(sb.iter()) {
            let ord = self.compare_segment(x, y);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        sa.len().cmp(&sb.len())
    }

    /// Compares two operand chains as if each were a classmark of its own.
    pub fn compare_chains(&self, a: &[Component], b: &[Component]) -> Ordering {
        for (x, y) in a.iter().zip(b.iter()) {
            let ord = self.compare_component(x, false, y, false);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        a.len().cmp(&b.len())
    }

    fn segments<'a>(&self, p: &'a ParsedNotation) -> Vec<Segment<'a>> {
        let mut out = Vec::new();
        for (i, chain) in p.operands.iter().enumerate() {
            if i > 0 {
                out.push(Segment::Relator(&p.relators[i - 1]));
            }
            let lowered = p.relators.get(i).is_some_and(|r| self.is_range(r));
            let last = chain.len() - 1;
            for (j, c) in chain.iter().enumerate() {
                out.push(Segment::Component(c, lowered && j == last));
            }
        }
        out
    }

    fn compare_segment(&self, x: &Segment, y: &Segment) -> Ordering {
        match (x, y) {
            (Segment::Component(a, da), Segment::Component(b, db)) => self.compare_component(a, *da, b, *db),
            // a component opens with its table, which sorts below any relator
            (Segment::Component(..), Segment::Relator(_)) => Ordering::Less,
            (Segment::Relator(_), Segment::Component(..)) => Ordering::Greater,
            (Segment::Relator(a), Segment::Relator(b)) => self.relator_rank[*a].cmp(&self.relator_rank[*b]),
        }
    }

    /// A lowered component (the start of a range) sorts just below the same
    /// component unlowered, and above everything that sorts below it.
    fn compare_component(&self, a: &Component, lowered_a: bool, b: &Component, lowered_b: bool) -> Ordering {
        let ta = self.table_of(a);
        let tb = self.table_of(b);
        if ta != tb {
            return ta.cmp(&tb);
        }
        let sa: Vec<u32> = self.symbols_of(a).collect();
        let sb: Vec<u32> = self.symbols_of(b).collect();
        for (i, (x, y)) in sa.iter().zip(sb.iter()).enumerate() {
            if x != y {
                return x.cmp(y);
            }
            let end_a = lowered_a && i + 1 == sa.len();
            let end_b = lowered_b && i + 1 == sb.len();
            if end_a != end_b {
                return if end_a { Ordering::Less } else { Ordering::Greater };
            }
        }
        if sa.len() != sb.len() {
            // The shorter symbol string is followed by something that ranks
            // below any symbol.
            return sa.len().cmp(&sb.len());
        }
        if sa.is_empty() && lowered_a != lowered_b {
            // bare terms: the lowering sits on the table itself
            return if lowered_a { Ordering::Less } else { Ordering::Greater };
        }
        Ordering::Equal
    }

    // -----------------------------------------------------------------------
    // Packed route
    // -----------------------------------------------------------------------

    /// Flat weight vector whose lexicographic order is the collation order.
    pub fn sort_key(&self, p: &ParsedNotation) -> SortKey {
        let relator_base = self.table_count;
        let symbol_base = self.table_count + self.relator_count;
        let mut weights: Vec<u32> = Vec::new();
        for (i, chain) in p.operands.iter().enumerate() {
            if i > 0 {
                let rank = self.relator_rank.get(&p.relators[i - 1]).copied().unwrap_or(0);
                weights.push(encode(relator_base + rank));
            }
            for c in chain {
                weights.push(encode(self.table_of(c)));
                weights.extend(self.symbols_of(c).map(|s| encode(symbol_base.saturating_add(s))));
            }
            if p.relators.get(i).is_some_and(|r| self.is_range(r)) {
                if let Some(last) = weights.last_mut() {
                    *last -= 1;
                }
            }
        }
        SortKey(weights)
    }

    /// Compares two classmarks of this grammar.
    pub fn compare(&self, a: &str, b: &str, grammar: &NotationGrammar) -> Result<Ordering, NotationError> {
        let pa = parse_canonical(a, grammar, self)?;
        let pb = parse_canonical(b, grammar, self)?;
        Ok(self.compare_parsed(&pa, &pb))
    }

    pub fn key_for(&self, notation: &str, grammar: &NotationGrammar) -> Result<SortKey, NotationError> {
        Ok(self.sort_key(&parse_canonical(notation, grammar, self)?))
    }

    /// Sorts notations into schedule order. Duplicates are kept, adjacent.
    pub fn sort_schedule<S: AsRef<str>>(
        &self,
        notations: &[S],
        grammar: &NotationGrammar,
    ) -> Result<Vec<String>, NotationError> {
        let mut keyed = notations
            .iter()
            .map(|n| Ok((self.key_for(n.as_ref(), grammar)?, n.as_ref().to_string())))
            .collect::<Result<Vec<_>, NotationError>>()?;
        keyed.sort();
        Ok(keyed.into_iter().map(|(_, n)| n).collect())
    }
}

enum Segment<'a> {
    /// Component, and whether it is lowered as the start of a range.
    Component(&'a Component, bool),
    Relator(&'a str),
}

/// Odd codes for plain weights; the even code just below is the lowered
/// form used for the start of a range.
fn encode(weight: u32) -> u32 {
    weight.saturating_mul(2).saturating_add(1)
}

/// Serializable collation key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortKey(pub Vec<u32>);

impl SortKey {
    /// Big-endian, fixed four bytes per weight: byte order equals key order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if !bytes.len().is_multiple_of(4) {
            return None;
        }
        Some(SortKey(
            bytes
                .chunks_exact(4)
                .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ))
    }

    pub fn is_prefix_of(&self, other: &SortKey) -> bool {
        other.0.starts_with(&self.0)
    }
}
