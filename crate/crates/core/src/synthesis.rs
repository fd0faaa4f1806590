//! Classmark synthesis under citation order, relator combination and
//! parallel division.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::grammar::TableDef;
use crate::notation::{render_chain, Component, NotationError, ParsedNotation};
use crate::record::{CombinationConstraint, ParallelDivisionRule};
use crate::scheme::Scheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("category `{0}` is not in the citation order for this base")]
    UnknownCategory(String),
    #[error("`{term}` is not a term of any `{category}` table")]
    InvalidPick { category: String, term: String },
    #[error("base `{0}` must be a single chain")]
    ComplexBase(String),
    #[error("unknown relator `{0}`")]
    UnknownRelator(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(ConstraintViolation),
    #[error("`{source_notation}` does not start with `{strip}`")]
    PrefixMismatch { source_notation: String, strip: String },
    #[error("`{source_notation}` is not drawn from `{table}`")]
    SourceMismatch { source_notation: String, table: String },
    #[error(transparent)]
    Notation(#[from] NotationError),
}

/// A subject-area base plus one attached term per facet category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FacetSelection {
    pub base: String,
    pub picks: BTreeMap<String, String>,
}

impl FacetSelection {
    pub fn new(base: impl Into<String>) -> Self {
        FacetSelection {
            base: base.into(),
            picks: BTreeMap::new(),
        }
    }

    pub fn pick(mut self, category: impl Into<String>, term: impl Into<String>) -> Self {
        self.picks.insert(category.into(), term.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationViolation {
    /// Component index across the whole classmark, base = 0.
    pub position: usize,
    pub expected_category: String,
    pub found_category: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintViolation {
    pub host: String,
    /// Empty for attachment within a chain.
    pub relator: String,
    pub partner: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let relator = if self.relator.is_empty() {
            "attachment"
        } else {
            &self.relator
        };
        write!(
            f,
            "`{}` may not combine with `{}` by {}",
            self.host, self.partner, relator
        )
    }
}

/// The attached term `term` read as a component of `table`.
fn component_of(table: &TableDef, term: &str) -> Option<Component> {
    let rest = term.strip_prefix(table.attach_indicator.as_str())?;
    let symbols = if table.closer.is_empty() {
        rest
    } else {
        rest.strip_suffix(table.closer.as_str())?
    };
    table.accepts_symbols(symbols).then(|| Component::new(table, symbols))
}

pub fn synthesize(selection: &FacetSelection, scheme: &Scheme) -> Result<String, SynthesisError> {
    let grammar = scheme.grammar();
    let base = scheme.parse(&selection.base)?;
    if base.operands.len() != 1 {
        return Err(SynthesisError::ComplexBase(selection.base.clone()));
    }
    let order = grammar.citation_order_for(&base.render(grammar));
    let mut picked: Vec<(usize, Component)> = Vec::new();
    for (category, term) in &selection.picks {
        let rank = order
            .iter()
            .position(|c| c == category)
            .ok_or_else(|| SynthesisError::UnknownCategory(category.clone()))?;
        let component = grammar
            .tables()
            .filter(|t| &t.facet_category == category)
            .find_map(|t| component_of(t, term))
            .ok_or_else(|| SynthesisError::InvalidPick {
                category: category.clone(),
                term: term.clone(),
            })?;
        picked.push((rank, component));
    }
    picked.sort_by_key(|(rank, _)| *rank);

    let mut chain = base.operands[0].clone();
    chain.extend(picked.into_iter().map(|(_, c)| c));
    let parsed = ParsedNotation::single(chain);
    check_constraints(&parsed, scheme).map_err(SynthesisError::ConstraintViolation)?;
    Ok(scheme.canonical(&parsed.render(grammar))?)
}

/// Inversions of citation order among the attached components of each
/// chain. Gaps are fine; a facet cited at or before one already seen is not.
pub fn validate_citation_order(notation: &str, scheme: &Scheme) -> Result<Vec<CitationViolation>, NotationError> {
    let grammar = scheme.grammar();
    let parsed = scheme.parse(notation)?;
    let mut violations = Vec::new();
    let mut position = 0;
    for chain in &parsed.operands {
        let order = grammar.citation_order_for(&render_chain(&chain[..1], grammar));
        let mut highest: Option<usize> = None;
        for (i, component) in chain.iter().enumerate() {
            let at = position + i;
            if i == 0 {
                continue;
            }
            let Some(rank) = order.iter().position(|c| *c == component.facet_category) else {
                continue;
            };
            match highest {
                Some(h) if rank <= h => violations.push(CitationViolation {
                    position: at,
                    expected_category: order[h].clone(),
                    found_category: component.facet_category.clone(),
                }),
                _ => highest = Some(rank),
            }
        }
        position += chain.len();
    }
    Ok(violations)
}

pub fn combine(left: &str, relator: &str, right: &str, scheme: &Scheme) -> Result<String, SynthesisError> {
    let grammar = scheme.grammar();
    if grammar.relator(relator).is_none() {
        return Err(SynthesisError::UnknownRelator(relator.to_string()));
    }
    let l = scheme.parse(left)?;
    let r = scheme.parse(right)?;
    let mut joined = l;
    joined.relators.push(relator.to_string());
    joined.relators.extend(r.relators);
    joined.operands.extend(r.operands);
    joined.canonicalize(grammar, scheme.collator());
    check_constraints(&joined, scheme).map_err(SynthesisError::ConstraintViolation)?;
    Ok(joined.render(grammar))
}

fn partner_allowed(rule: &CombinationConstraint, partner_text: &str, partner: &[Component]) -> bool {
    partner_text.starts_with(&rule.allowed_partner) || partner.iter().any(|c| c.table_id == rule.allowed_partner)
}

/// Checks every combination in `parsed` against the constraints declared
/// anywhere in the scheme. A host with constraints for a relator admits
/// only the partners those constraints name; other hosts are unrestricted.
pub fn check_constraints(parsed: &ParsedNotation, scheme: &Scheme) -> Result<(), ConstraintViolation> {
    let grammar = scheme.grammar();
    let rules: Vec<&CombinationConstraint> = scheme
        .records()
        .iter()
        .flat_map(|r| &r.notes.combination_rules)
        .collect();
    if rules.is_empty() {
        return Ok(());
    }

    let check = |host: &str, relator: &str, partner_text: &str, partner: &[Component]| {
        let applicable: Vec<_> = rules
            .iter()
            .filter(|c| c.relator == relator && host.starts_with(&c.host_class))
            .collect();
        if applicable.is_empty() || applicable.iter().any(|c| partner_allowed(c, partner_text, partner)) {
            Ok(())
        } else {
            Err(ConstraintViolation {
                host: host.to_string(),
                relator: relator.to_string(),
                partner: partner_text.to_string(),
            })
        }
    };

    for chain in &parsed.operands {
        let head = render_chain(&chain[..1], grammar);
        for component in &chain[1..] {
            check(&head, "", &component.term, std::slice::from_ref(component))?;
        }
    }
    for (i, relator) in parsed.relators.iter().enumerate() {
        let (l, r) = (&parsed.operands[i], &parsed.operands[i + 1]);
        let (lt, rt) = (render_chain(l, grammar), render_chain(r, grammar));
        check(&lt, relator, &rt, r)?;
        if grammar.relator(relator).is_some_and(|d| d.commutative) {
            check(&rt, relator, &lt, l)?;
        }
    }
    Ok(())
}

/// Transplants `source` minus the rule's strip prefix into the host affixes.
pub fn derive_parallel(source: &str, rule: &ParallelDivisionRule, scheme: &Scheme) -> Result<String, SynthesisError> {
    let rest = source
        .strip_prefix(rule.strip_prefix.as_str())
        .ok_or_else(|| SynthesisError::PrefixMismatch {
            source_notation: source.to_string(),
            strip: rule.strip_prefix.clone(),
        })?;
    if !rule.source_table.is_empty() {
        let from_table = scheme
            .parse(source)
            .ok()
            .and_then(|p| p.components().next().map(|c| c.table_id == rule.source_table))
            .unwrap_or(false);
        if !from_table && !source.starts_with(&rule.source_table) {
            return Err(SynthesisError::SourceMismatch {
                source_notation: source.to_string(),
                table: rule.source_table.clone(),
            });
        }
    }
    let derived = format!("{}{}{}", rule.host_affix.0, rest, rule.host_affix.1);
    Ok(scheme.canonical(&derived)?)
}
