//! Property bodies shared by the property tests and the acceptance suite.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use facet_core::notation::{decompose, recompose, tokenize, ParsedNotation};
use facet_core::synthesis::{combine, synthesize, validate_citation_order, FacetSelection};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use super::gen::{arb_parsed, arb_symbols, shared, GRAMMARS};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn report<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Antisymmetry, totality (equal only when canonical forms are equal),
/// transitivity, and agreement of the structural and packed routes.
pub fn total_order(cases: u32) -> Result<(), String> {
    let strategy = prop::sample::select(GRAMMARS.to_vec()).prop_flat_map(|name| {
        let g = shared(name).grammar();
        (Just(name), arb_parsed(g, 3), arb_parsed(g, 3), arb_parsed(g, 3))
    });
    report(runner(cases).run(&strategy, |(name, a, b, c)| {
        let scheme = shared(name);
        let (g, col) = (scheme.grammar(), scheme.collator());
        let canon = |p: &ParsedNotation| {
            let mut q = p.clone();
            q.canonicalize(g, col);
            q
        };
        let (a, b, c) = (canon(&a), canon(&b), canon(&c));
        let ab = col.compare_parsed(&a, &b);
        prop_assert_eq!(ab, col.compare_parsed(&b, &a).reverse());
        prop_assert_eq!(ab == Ordering::Equal, a.render(g) == b.render(g));
        let (ka, kb) = (col.sort_key(&a), col.sort_key(&b));
        prop_assert_eq!(ka.cmp(&kb), ab);
        prop_assert_eq!(ka.to_bytes().cmp(&kb.to_bytes()), ab);
        let bc = col.compare_parsed(&b, &c);
        if ab != Ordering::Greater && bc != Ordering::Greater {
            prop_assert_ne!(col.compare_parsed(&a, &c), Ordering::Greater);
        }
        Ok(())
    }))
}

/// A classmark sorts before every extension that does not open a range,
/// and its key is a prefix of the extension's key.
pub fn prefix_dominance(cases: u32) -> Result<(), String> {
    let strategy = prop::sample::select(GRAMMARS.to_vec()).prop_flat_map(|name| {
        let g = shared(name).grammar();
        (
            Just(name),
            arb_parsed(g, 3),
            arb_parsed(g, 2),
            0u8..3,
            any::<prop::sample::Index>(),
        )
    });
    report(runner(cases).run(&strategy, |(name, base, extra, how, pick)| {
        let scheme = shared(name);
        let (g, col) = (scheme.grammar(), scheme.collator());
        let mut base = base;
        base.canonicalize(g, col);
        let mut ext = base.clone();
        match how {
            // deeper symbols on the last component
            0 => {
                let last = ext.operands.last_mut().unwrap().last_mut().unwrap();
                let table = g.table(&last.table_id).unwrap();
                let plain: Vec<char> = table
                    .symbol_alphabet
                    .iter()
                    .copied()
                    .filter(|c| !table.is_separator(*c))
                    .collect();
                let symbols = format!("{}{}", last.symbols, pick.get(&plain));
                *last = facet_core::notation::Component::new(table, &symbols);
            }
            // a further attached component
            1 => {
                let chain = &extra.operands[0];
                let Some(attached) = chain.get(1) else {
                    return Ok(());
                };
                ext.operands.last_mut().unwrap().push(attached.clone());
            }
            // a non-range relator and another operand
            _ => {
                let phases: Vec<_> = g.relators.iter().filter(|r| r.kind.as_str() != "range").collect();
                if phases.is_empty() {
                    return Ok(());
                }
                ext.relators.push(pick.get(&phases).symbol.clone());
                ext.operands.push(extra.operands[0].clone());
            }
        }
        ext.canonicalize(g, col);
        let (b, e) = (base.render(g), ext.render(g));
        prop_assume!(e.starts_with(&b) && e != b);
        prop_assert_eq!(col.compare_parsed(&base, &ext), Ordering::Less, "{} vs {}", b, e);
        prop_assert!(col.sort_key(&base).is_prefix_of(&col.sort_key(&ext)), "{} vs {}", b, e);
        Ok(())
    }))
}

/// decompose(render(p)) = p; recompose is canonical and idempotent;
/// tokens partition the input.
pub fn round_trip(cases: u32) -> Result<(), String> {
    let strategy = prop::sample::select(GRAMMARS.to_vec())
        .prop_flat_map(|name| (Just(name), arb_parsed(shared(name).grammar(), 4)));
    report(runner(cases).run(&strategy, |(name, p)| {
        let g = shared(name).grammar();
        let written = p.render(g);
        let tokens = tokenize(&written, g).map_err(|e| TestCaseError::fail(format!("{written}: {e}")))?;
        let joined: String = tokens.iter().map(|t| t.lexeme.as_str()).collect();
        prop_assert_eq!(&joined, &written);
        prop_assert!(tokens.windows(2).all(|w| w[0].position <= w[1].position));

        let parsed = decompose(&written, g).map_err(|e| TestCaseError::fail(format!("{written}: {e}")))?;
        prop_assert_eq!(&parsed, &p);
        prop_assert_eq!(parsed.relators.len() + 1, parsed.operands.len());
        prop_assert!(parsed.operands.iter().all(|c| !c.is_empty()));

        let canonical = recompose(&parsed, g);
        let again = decompose(&canonical, g).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(recompose(&again, g), canonical.clone());
        prop_assert_eq!(again.render(g), canonical);
        Ok(())
    }))
}

/// Synthesis then decomposition recovers base and picks, in citation order.
pub fn synthesis_inverse(cases: u32) -> Result<(), String> {
    let scheme = shared("facets.fcs");
    let g = scheme.grammar();
    let main = g.main_table.clone();
    let per_category: Vec<BoxedStrategy<Option<(String, String)>>> = g
        .auxiliary_tables
        .iter()
        .map(|t| {
            let (cat, ind) = (t.facet_category.clone(), t.attach_indicator.clone());
            prop::option::of(arb_symbols(t, 3).prop_map(move |s| (cat.clone(), format!("{ind}{s}")))).boxed()
        })
        .collect();
    let strategy = (prop_oneof![Just("33".to_string()), arb_symbols(&main, 3)], per_category);
    report(runner(cases).run(&strategy, |(base, picks)| {
        let picks: BTreeMap<String, String> = picks.into_iter().flatten().collect();
        let mut selection = FacetSelection::new(base.clone());
        selection.picks = picks.clone();
        let order = g.citation_order_for(&base).to_vec();
        let result = synthesize(&selection, scheme);
        if picks.keys().any(|c| !order.contains(c)) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let notation = result.map_err(|e| TestCaseError::fail(e.to_string()))?;
        let parsed = decompose(&notation, g).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(parsed.operands.len(), 1);
        let chain = &parsed.operands[0];
        prop_assert_eq!(&chain[0].symbols, &base);
        let got: BTreeMap<String, String> = chain[1..]
            .iter()
            .map(|c| (c.facet_category.clone(), c.term.clone()))
            .collect();
        prop_assert_eq!(got, picks);
        let violations = validate_citation_order(&notation, scheme).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(violations.is_empty(), "{}: {:?}", notation, violations);
        Ok(())
    }))
}

/// combine(a, r, b) = combine(b, r, a) for the commutative relators.
pub fn commutativity(cases: u32) -> Result<(), String> {
    let strategy = prop::sample::select(GRAMMARS.to_vec()).prop_flat_map(|name| {
        let g = shared(name).grammar();
        (
            Just(name),
            arb_parsed(g, 1),
            arb_parsed(g, 1),
            prop::sample::select(vec!["+", ":"]),
        )
    });
    report(runner(cases).run(&strategy, |(name, a, b, rel)| {
        let scheme = shared(name);
        let g = scheme.grammar();
        prop_assume!(g.relator(rel).is_some_and(|r| r.commutative));
        let (a, b) = (a.render(g), b.render(g));
        let ab = combine(&a, rel, &b, scheme).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let ba = combine(&b, rel, &a, scheme).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&ab, &ba);
        let (first, second) = if scheme.compare(&a, &b).unwrap() == Ordering::Greater {
            (&b, &a)
        } else {
            (&a, &b)
        };
        prop_assert_eq!(ab, format!("{first}{rel}{second}"));
        Ok(())
    }))
}
