//! Randomized schemes for the exchange round trip and the XML export.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use facet_core::exchange::{export_canonical, export_concept_scheme, import_canonical, read_scheme};
use facet_core::notation::ParsedNotation;
use facet_core::record::{ChangeEntry, ChangeKind, ClassRecord, CombinationConstraint, ParallelDivisionRule};
use facet_core::scheme::{load_scheme, Scheme};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::gen::{arb_parsed, shared};
use super::xsd::Validator;
use super::ALL_FIXTURES;

/// Awkward for a line format: escapes, tabs, newlines, CR, markup.
const ALPHABET: &[char] = &[
    'a', 'b', 'Z', '1', ' ', '\t', '\n', '\r', '\\', '%', '<', '&', '"', '\'', 'é', '→', '=', ':',
];

fn text(rng: &mut StdRng, max: usize) -> String {
    (0..rng.gen_range(0..=max))
        .map(|_| *ALPHABET.choose(rng).unwrap())
        .collect()
}

fn maybe(rng: &mut StdRng, max: usize) -> Option<String> {
    rng.gen_bool(0.4).then(|| text(rng, max))
}

/// Scheme over a fixture grammar with random notations and every
/// record field populated at random. Overrides only point backwards in
/// collation order, so the result always loads.
pub fn random_scheme(name: &'static str, notations: Vec<ParsedNotation>, seed: u64) -> Scheme {
    let fixture = shared(name);
    let g = fixture.grammar();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut records: Vec<ClassRecord> = Vec::new();
    for p in notations {
        let written = p.render(g);
        if !seen.insert(fixture.canonical(&written).unwrap()) {
            continue;
        }
        let id = format!("k{}-{}", records.len(), text(&mut rng, 3).replace(['\n', '\r'], ""));
        let mut r = ClassRecord::new(id, written, text(&mut rng, 12));
        r.notes.scope = maybe(&mut rng, 10);
        r.notes.application = maybe(&mut rng, 10);
        r.notes.content_note = maybe(&mut rng, 10);
        r.notes.editorial_note = maybe(&mut rng, 10);
        for _ in 0..rng.gen_range(0..3) {
            r.index_terms.push(text(&mut rng, 8));
        }
        if rng.gen_bool(0.3) {
            let relator = g.relators.choose(&mut rng).map_or(String::new(), |x| x.symbol.clone());
            r.notes.combination_rules.push(CombinationConstraint {
                host_class: text(&mut rng, 4),
                allowed_partner: text(&mut rng, 4),
                relator,
            });
        }
        if rng.gen_bool(0.2) {
            r.notes.parallel_rules.push(ParallelDivisionRule {
                host_class: text(&mut rng, 4),
                source_table: text(&mut rng, 4),
                strip_prefix: text(&mut rng, 3),
                host_affix: (text(&mut rng, 2), text(&mut rng, 2)),
            });
        }
        records.push(r);
    }
    let ids: Vec<_> = records.iter().map(|r| r.class_id.clone()).collect();
    let notations: Vec<String> = records.iter().map(|r| r.notation.clone()).collect();
    for r in records.iter_mut() {
        if !notations.is_empty() && rng.gen_bool(0.3) {
            r.references.push(notations.choose(&mut rng).unwrap().clone());
        }
        if rng.gen_bool(0.1) {
            r.references.push(text(&mut rng, 5));
        }
        if rng.gen_bool(0.2) {
            let kind = *[ChangeKind::Replaces, ChangeKind::ReplacedBy, ChangeKind::Cancelled]
                .choose(&mut rng)
                .unwrap();
            r.notes.history.push(ChangeEntry {
                kind,
                other_class: ids.choose(&mut rng).unwrap().clone(),
                effective_date: NaiveDate::from_ymd_opt(
                    rng.gen_range(1900..2100),
                    rng.gen_range(1..=12),
                    rng.gen_range(1..=28),
                )
                .unwrap(),
            });
        }
        if rng.gen_bool(0.2) {
            let example = notations.choose(&mut rng).unwrap().clone();
            r.notes.combination_examples.push((example, text(&mut rng, 6)));
        }
    }
    let plain = load_scheme(g.clone(), records).expect("random scheme loads");
    let (grammar, mut records) = plain.into_parts();
    for i in 1..records.len() {
        if rng.gen_bool(0.15) {
            let j = rng.gen_range(0..i);
            records[i].broader_override = Some(if rng.gen_bool(0.5) {
                records[j].class_id.to_string()
            } else {
                records[j].notation.clone()
            });
        }
    }
    load_scheme(grammar, records).expect("backward overrides load")
}

pub fn arb_scheme() -> BoxedStrategy<Scheme> {
    prop::sample::select(ALL_FIXTURES.to_vec())
        .prop_flat_map(|name| {
            (
                Just(name),
                prop::collection::vec(arb_parsed(shared(name).grammar(), 3), 0..30),
                any::<u64>(),
            )
        })
        .prop_map(|(name, notations, seed)| random_scheme(name, notations, seed))
        .boxed()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// import ∘ export is the identity and export is byte-stable.
pub fn round_trip(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&arb_scheme(), |scheme| {
            let text = export_canonical(&scheme);
            prop_assert_eq!(&export_canonical(&scheme), &text);
            let (grammar, records) = import_canonical(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(&grammar, scheme.grammar());
            prop_assert_eq!(records, without_derived(scheme.records()));
            let back = read_scheme(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(&back, &scheme);
            prop_assert_eq!(export_canonical(&back), text);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// The XML export is well-formed, valid against the bundled schemas, and
/// its broader references are exactly the tree's edges.
pub fn concept_export(cases: u32) -> Result<(), String> {
    let validator = Validator::bundled();
    runner(cases)
        .run(&arb_scheme(), |scheme| {
            let xml = export_concept_scheme(&scheme);
            validator.validate(&xml).map_err(TestCaseError::fail)?;
            prop_assert_eq!(broader_edges(&xml), tree_edges(&scheme));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Records as written to a file: kind and source tables come from the
/// parse at load time and are not stored.
pub fn without_derived(records: &[ClassRecord]) -> Vec<ClassRecord> {
    records
        .iter()
        .map(|r| ClassRecord {
            notation_kind: Default::default(),
            source_tables: Vec::new(),
            ..r.clone()
        })
        .collect()
}

pub fn broader_edges(xml: &str) -> BTreeSet<(String, String)> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("broader"))
        .map(|b| {
            let concept = b.parent_element().unwrap().attribute("id").unwrap().to_string();
            (concept, b.attribute("ref").unwrap().to_string())
        })
        .collect()
}

pub fn tree_edges(scheme: &Scheme) -> BTreeSet<(String, String)> {
    scheme
        .tree()
        .children
        .iter()
        .flat_map(|(parent, kids)| kids.iter().map(move |k| (k.to_string(), parent.to_string())))
        .collect()
}
