//! Tokenizing and decomposing classmarks.
//!
//! A classmark is read as a flat, left-to-right phase expression: operands
//! joined by relators, where each operand is a chain of facet components.
//! Every component is opened by a facet indicator (possibly the empty,
//! implicit indicator of the main table) and attributed to exactly one
//! table.

use thiserror::Error;

use crate::collation::Collator;
use crate::grammar::{NotationGrammar, TableDef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotationError {
    #[error("empty notation")]
    EmptyInput,
    #[error("unknown symbol at position {0}")]
    UnknownSymbol(usize),
    #[error("relator at position {0} has no operand on one side")]
    DanglingRelator(usize),
    #[error("empty operand before relator at position {0}")]
    EmptyChain(usize),
    #[error("term of table `{table}` at position {position} has no symbols")]
    BareTerm { table: String, position: usize },
    #[error("separator misplaced in term of table `{table}` at position {position}")]
    MisplacedSeparator { table: String, position: usize },
    #[error("term of table `{table}` at position {position} is not closed")]
    MissingCloser { table: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Facet indicator. `standalone` is set when the table was opened with
    /// its standalone prefix at the start of an operand.
    Indicator {
        table_id: String,
        standalone: bool,
    },
    Symbol(char),
    Closer {
        table_id: String,
    },
    Relator(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset into the input.
    pub position: usize,
    pub lexeme: String,
}

#[derive(Clone, Copy)]
enum LexState<'g> {
    OperandStart,
    InTerm(&'g TableDef),
    Closed,
}

/// Longest-match tokenization. Concatenating the lexemes reproduces the
/// input exactly; the implicit main-table indicator is a zero-width token.
pub fn tokenize(notation: &str, grammar: &NotationGrammar) -> Result<Vec<Token>, NotationError> {
    if notation.is_empty() {
        return Err(NotationError::EmptyInput);
    }
    let mut tokens = Vec::new();
    let mut state = LexState::OperandStart;
    let mut pos = 0;

    while pos < notation.len() {
        let rest = &notation[pos..];
        match state {
            LexState::OperandStart => {
                let opener = grammar
                    .tables()
                    .filter(|t| !t.standalone_prefix.is_empty() && rest.starts_with(&t.standalone_prefix))
                    .max_by_key(|t| t.standalone_prefix.len());
                let relator = longest_relator(rest, grammar);
                let opener_len = opener.map_or(0, |t| t.standalone_prefix.len());
                let relator_len = relator.map_or(0, str::len);

                if opener_len > 0 && opener_len >= relator_len {
                    let table = opener.unwrap();
                    tokens.push(Token {
                        kind: TokenKind::Indicator {
                            table_id: table.table_id.clone(),
                            standalone: true,
                        },
                        position: pos,
                        lexeme: table.standalone_prefix.clone(),
                    });
                    pos += opener_len;
                    state = LexState::InTerm(table);
                } else if let Some(symbol) = relator {
                    tokens.push(relator_token(symbol, pos));
                    pos += symbol.len();
                } else if grammar.main_table.standalone_prefix.is_empty() {
                    tokens.push(Token {
                        kind: TokenKind::Indicator {
                            table_id: grammar.main_table.table_id.clone(),
                            standalone: true,
                        },
                        position: pos,
                        lexeme: String::new(),
                    });
                    state = LexState::InTerm(&grammar.main_table);
                } else {
                    return Err(NotationError::UnknownSymbol(pos));
                }
            }
            LexState::InTerm(_) | LexState::Closed => {
                let current = match state {
                    LexState::InTerm(t) => Some(t),
                    _ => None,
                };
                let indicator = grammar
                    .tables()
                    .filter(|t| !t.attach_indicator.is_empty() && rest.starts_with(&t.attach_indicator))
                    .max_by_key(|t| t.attach_indicator.len());
                let relator = longest_relator(rest, grammar);
                let closer = current.filter(|t| !t.closer.is_empty() && rest.starts_with(&t.closer));
                let symbol = current.and_then(|t| rest.chars().next().filter(|&c| t.in_alphabet(c)).map(|c| (t, c)));

                let candidates = [
                    indicator.map(|t| t.attach_indicator.len()).unwrap_or(0),
                    relator.map_or(0, str::len),
                    closer.map(|t| t.closer.len()).unwrap_or(0),
                    symbol.map(|(_, c)| c.len_utf8()).unwrap_or(0),
                ];
                let best = candidates.iter().copied().max().unwrap_or(0);
                if best == 0 {
                    return Err(NotationError::UnknownSymbol(pos));
                }
                if candidates[0] == best {
                    let table = indicator.unwrap();
                    tokens.push(Token {
                        kind: TokenKind::Indicator {
                            table_id: table.table_id.clone(),
                            standalone: false,
                        },
                        position: pos,
                        lexeme: table.attach_indicator.clone(),
                    });
                    state = LexState::InTerm(table);
                } else if candidates[1] == best {
                    tokens.push(relator_token(relator.unwrap(), pos));
                    state = LexState::OperandStart;
                } else if candidates[2] == best {
                    let table = closer.unwrap();
                    tokens.push(Token {
                        kind: TokenKind::Closer {
                            table_id: table.table_id.clone(),
                        },
                        position: pos,
                        lexeme: table.closer.clone(),
                    });
                    state = LexState::Closed;
                } else {
                    let (_, c) = symbol.unwrap();
                    tokens.push(Token {
                        kind: TokenKind::Symbol(c),
                        position: pos,
                        lexeme: c.to_string(),
                    });
                }
                pos += best;
            }
        }
    }
    Ok(tokens)
}

fn longest_relator<'g>(rest: &str, grammar: &'g NotationGrammar) -> Option<&'g str> {
    grammar
        .relators
        .iter()
        .map(|r| r.symbol.as_str())
        .filter(|s| rest.starts_with(s))
        .max_by_key(|s| s.len())
}

fn relator_token(symbol: &str, pos: usize) -> Token {
    Token {
        kind: TokenKind::Relator(symbol.to_string()),
        position: pos,
        lexeme: symbol.to_string(),
    }
}

/// One facet component of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Component {
    pub table_id: String,
    /// Indicator, symbols and closer, in attached form.
    pub term: String,
    pub facet_category: String,
    pub symbols: String,
}

impl Component {
    pub fn new(table: &TableDef, symbols: &str) -> Self {
        Component {
            table_id: table.table_id.clone(),
            term: table.attached_term(symbols),
            facet_category: table.facet_category.clone(),
            symbols: symbols.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    /// One operand holding one component.
    Simple,
    /// One operand, several components.
    Compound,
    /// Several operands joined by relators.
    Complex,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Simple => "simple",
            Structure::Compound => "compound",
            Structure::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParsedNotation {
    pub operands: Vec<Vec<Component>>,
    /// `relators[i]` joins `operands[i]` and `operands[i + 1]`.
    pub relators: Vec<String>,
}

impl ParsedNotation {
    pub fn single(chain: Vec<Component>) -> Self {
        ParsedNotation {
            operands: vec![chain],
            relators: Vec::new(),
        }
    }

    pub fn kind(&self) -> Structure {
        match (self.operands.len(), self.operands.first().map_or(0, Vec::len)) {
            (1, 1) => Structure::Simple,
            (1, _) => Structure::Compound,
            _ => Structure::Complex,
        }
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.operands.iter().flatten()
    }

    /// Distinct tables contributing components, in order of first use.
    pub fn source_tables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in self.components() {
            if !out.contains(&c.table_id) {
                out.push(c.table_id.clone());
            }
        }
        out
    }

    /// Puts the operands of a leading run of one commutative relator into
    /// collation order. Directed relators keep their written order; later
    /// runs are left alone because flat left-to-right reading groups them
    /// with everything before.
    pub fn canonicalize(&mut self, grammar: &NotationGrammar, collator: &Collator) {
        let Some(first) = self.relators.first() else {
            return;
        };
        let commutative = grammar.relator(first).is_some_and(|r| r.commutative);
        if !commutative {
            return;
        }
        let run = self.relators.iter().take_while(|r| *r == first).count();
        self.operands[..=run].sort_by(|a, b| collator.compare_chains(a, b));
    }

    pub fn is_canonical(&self, grammar: &NotationGrammar, collator: &Collator) -> bool {
        let mut copy = self.clone();
        copy.canonicalize(grammar, collator);
        &copy == self
    }

    /// Writes the notation without canonicalizing.
    pub fn render(&self, grammar: &NotationGrammar) -> String {
        let mut out = String::new();
        for (i, chain) in self.operands.iter().enumerate() {
            if i > 0 {
                out.push_str(&self.relators[i - 1]);
            }
            out.push_str(&render_chain(chain, grammar));
        }
        out
    }
}

/// Chain text as it appears when it opens an operand.
pub fn render_chain(chain: &[Component], grammar: &NotationGrammar) -> String {
    let mut out = String::new();
    for (j, component) in chain.iter().enumerate() {
        match grammar.table(&component.table_id) {
            Some(table) if j == 0 => out.push_str(&table.standalone_term(&component.symbols)),
            Some(_) => out.push_str(&component.term),
            None => out.push_str(&component.term),
        }
    }
    out
}

struct PendingComponent<'g> {
    table: &'g TableDef,
    symbols: String,
    closed: bool,
    position: usize,
}

impl PendingComponent<'_> {
    fn finish(self) -> Result<Component, NotationError> {
        let table = self.table;
        if !table.closer.is_empty() && !self.closed {
            return Err(NotationError::MissingCloser {
                table: table.table_id.clone(),
                position: self.position,
            });
        }
        if self.symbols.is_empty() {
            if !table.bare_term {
                return Err(NotationError::BareTerm {
                    table: table.table_id.clone(),
                    position: self.position,
                });
            }
        } else if !table.accepts_symbols(&self.symbols) {
            return Err(NotationError::MisplacedSeparator {
                table: table.table_id.clone(),
                position: self.position,
            });
        }
        Ok(Component::new(table, &self.symbols))
    }
}

/// Decomposes a classmark, preserving written operand order.
pub fn decompose(notation: &str, grammar: &NotationGrammar) -> Result<ParsedNotation, NotationError> {
    let tokens = tokenize(notation, grammar)?;
    let mut operands = Vec::new();
    let mut relators = Vec::new();
    let mut chain: Vec<Component> = Vec::new();
    let mut pending: Option<PendingComponent> = None;

    for token in &tokens {
        match &token.kind {
            TokenKind::Indicator { table_id, .. } => {
                if let Some(p) = pending.take() {
                    chain.push(p.finish()?);
                }
                let table = grammar
                    .table(table_id)
                    .ok_or(NotationError::UnknownSymbol(token.position))?;
                pending = Some(PendingComponent {
                    table,
                    symbols: String::new(),
                    closed: false,
                    position: token.position,
                });
            }
            TokenKind::Symbol(c) => match pending.as_mut() {
                Some(p) => p.symbols.push(*c),
                None => return Err(NotationError::UnknownSymbol(token.position)),
            },
            TokenKind::Closer { .. } => match pending.as_mut() {
                Some(p) => p.closed = true,
                None => return Err(NotationError::UnknownSymbol(token.position)),
            },
            TokenKind::Relator(symbol) => {
                if let Some(p) = pending.take() {
                    chain.push(p.finish()?);
                }
                if chain.is_empty() {
                    return Err(if operands.is_empty() {
                        NotationError::DanglingRelator(token.position)
                    } else {
                        NotationError::EmptyChain(token.position)
                    });
                }
                operands.push(std::mem::take(&mut chain));
                relators.push(symbol.clone());
            }
        }
    }
    if let Some(p) = pending.take() {
        chain.push(p.finish()?);
    }
    if chain.is_empty() {
        let last = tokens.last().map_or(0, |t| t.position);
        return Err(NotationError::DanglingRelator(last));
    }
    operands.push(chain);
    Ok(ParsedNotation { operands, relators })
}

/// Canonical string for a parse: commutative runs in collation order.
pub fn recompose(parsed: &ParsedNotation, grammar: &NotationGrammar) -> String {
    let collator = Collator::new(grammar);
    let mut canonical = parsed.clone();
    canonical.canonicalize(grammar, &collator);
    canonical.render(grammar)
}

/// Decomposes and canonicalizes in one step.
pub fn parse_canonical(
    notation: &str,
    grammar: &NotationGrammar,
    collator: &Collator,
) -> Result<ParsedNotation, NotationError> {
    let mut parsed = decompose(notation, grammar)?;
    parsed.canonicalize(grammar, collator);
    Ok(parsed)
}

pub fn canonical(notation: &str, grammar: &NotationGrammar) -> Result<String, NotationError> {
    let collator = Collator::new(grammar);
    Ok(parse_canonical(notation, grammar, &collator)?.render(grammar))
}

pub fn classify_notation(notation: &str, grammar: &NotationGrammar) -> Result<Structure, NotationError> {
    Ok(decompose(notation, grammar)?.kind())
}
