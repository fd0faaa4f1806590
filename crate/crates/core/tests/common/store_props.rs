//! Authority-store laws over randomized stores, shared by the store tests
//! and the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use facet_core::index::words;
use facet_core::notation::decompose;
use facet_core::record::{ClassId, ClassRecord};
use facet_core::scheme::{load_scheme, Scheme};
use facet_core::store::{Store, StoreError};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::gen::shared;

const WORDS: &[&str] = &[
    "algorithms",
    "graphs",
    "rivers",
    "poetry",
    "trade",
    "energy",
    "music",
    "law",
    "children",
    "ships",
];
const RELATORS: &[&str] = &["+", ":", "/"];
/// Records per randomized store.
pub const STORE_SIZE: usize = 200;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 1, 1).unwrap()
}

/// A randomized store: `simple` plain classes and composites over them up
/// to `total` records, all distinct after canonicalization.
pub struct Fixture {
    pub base: Scheme,
    pub simple: Vec<ClassId>,
    pub composites: Vec<ClassId>,
}

fn random_simple(rng: &mut StdRng) -> String {
    let mut s: String = (0..rng.gen_range(1..=3))
        .map(|_| char::from(b'0' + rng.gen_range(0..10)))
        .collect();
    if s.len() == 3 && rng.gen_bool(0.5) {
        s.push('.');
        s.extend((0..rng.gen_range(1..=2)).map(|_| char::from(b'0' + rng.gen_range(0..10))));
    }
    s
}

fn caption(rng: &mut StdRng) -> String {
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_fixture(seed: u64, simple: usize, total: usize) -> Fixture {
    let udc = shared("udc.fcs");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    let mut pool = Vec::new();
    while pool.len() < simple {
        let n = random_simple(&mut rng);
        if seen.insert(udc.canonical(&n).unwrap()) {
            pool.push(n.clone());
            records.push(ClassRecord::new(format!("s{}", records.len()), n, caption(&mut rng)));
        }
    }
    while records.len() < total {
        let k = rng.gen_range(2..=3);
        let mut n = pool.choose(&mut rng).unwrap().clone();
        for _ in 1..k {
            n.push_str(RELATORS.choose(&mut rng).unwrap());
            n.push_str(pool.choose(&mut rng).unwrap());
        }
        if seen.insert(udc.canonical(&n).unwrap()) {
            let mut r = ClassRecord::new(format!("c{}", records.len()), n, caption(&mut rng));
            if rng.gen_bool(0.3) {
                r.index_terms.push(caption(&mut rng));
            }
            records.push(r);
        }
    }
    let base = load_scheme(udc.grammar().clone(), records).expect("random scheme loads");
    let (simple, composites) = base
        .records()
        .iter()
        .map(|r| r.class_id.clone())
        .partition(|id| id.as_str().starts_with('s'));
    Fixture {
        base,
        simple,
        composites,
    }
}

/// Decompose every live composite, swap operands spelled like `old` for
/// `new`, and recanonicalize. Whole strings only; no shared code with the
/// store's own substitution.
fn oracle(store: &Store, old: &ClassId) -> BTreeMap<ClassId, String> {
    let g = store.grammar();
    let old_notation = &store.get(old).unwrap().notation;
    let new_notation = &store
        .get(store.get(old).unwrap().replaced_by().unwrap())
        .unwrap()
        .notation;
    let mut out = BTreeMap::new();
    for r in store.records() {
        if &r.class_id == old || r.is_cancelled() {
            continue;
        }
        let parsed = decompose(&r.notation, g).unwrap();
        let mut hit = false;
        let mut text = String::new();
        for (i, chain) in parsed.operands.iter().enumerate() {
            if i > 0 {
                text.push_str(&parsed.relators[i - 1]);
            }
            let operand = facet_core::notation::ParsedNotation::single(chain.clone()).render(g);
            if &operand == old_notation {
                hit = true;
                text.push_str(new_notation);
            } else {
                text.push_str(&operand);
            }
        }
        if hit {
            out.insert(r.class_id.clone(), store.canonical(&text).unwrap());
        }
    }
    out
}

/// The same composite recorded twice, in any commutative spelling, yields
/// one class id and one record.
pub fn composite_idempotence(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<u64>(),
        prop::collection::vec(
            (any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0usize..2),
            1..20,
        ),
    );
    runner(cases)
        .run(&strategy, |(seed, picks)| {
            let f = random_fixture(seed, 40, STORE_SIZE);
            let mut store = Store::in_memory(&f.base);
            for (a, b, rel) in picks {
                let (a, b) = (a.get(&f.simple), b.get(&f.simple));
                let (na, nb) = (
                    &store.get(a).unwrap().notation.clone(),
                    &store.get(b).unwrap().notation.clone(),
                );
                let rel = ["+", ":"][rel];
                let before = store.len();
                let id1 = store.record_composite(&format!("{na}{rel}{nb}"), None).map_err(fail)?;
                let after = store.len();
                let id2 = store
                    .record_composite(&format!("{nb}{rel}{na}"), Some("ignored"))
                    .map_err(fail)?;
                prop_assert_eq!(&id1, &id2);
                prop_assert_eq!(store.len(), after);
                prop_assert!(after - before <= 1);
                let existing = store.get(&id1).unwrap().notation.clone();
                prop_assert_eq!(store.record_composite(&existing, None).map_err(fail)?, id1);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Acyclic replacement chains: resolve lands on a live class, resolving
/// that class again is a no-op, and the chain length counts the hops.
pub fn resolve_fixed_point(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), prop::collection::vec(any::<prop::sample::Index>(), 1..25));
    runner(cases)
        .run(&strategy, |(seed, steps)| {
            let f = random_fixture(seed, 40, STORE_SIZE);
            let mut store = Store::in_memory(&f.base);
            // ids in a fixed order; each step replaces a live class by a
            // later one, so no cycle can form
            let ids: Vec<ClassId> = f.base.records().iter().map(|r| r.class_id.clone()).collect();
            let mut hops: BTreeMap<ClassId, ClassId> = BTreeMap::new();
            for step in steps {
                let i = step.index(ids.len() - 1);
                let old = &ids[i];
                if hops.contains_key(old) {
                    continue;
                }
                let new = &ids[i + 1 + step.index(ids.len() - i - 1)];
                store.replace(old, new, date()).map_err(fail)?;
                hops.insert(old.clone(), new.clone());
            }
            for id in &ids {
                let mut expected = (id.clone(), 0);
                while let Some(next) = hops.get(&expected.0) {
                    expected = (next.clone(), expected.1 + 1);
                }
                let got = store.resolve(id.as_str()).map_err(fail)?;
                prop_assert_eq!(&got.record.class_id, &expected.0);
                prop_assert_eq!(got.chain_length, expected.1);
                prop_assert!(!got.record.is_cancelled());
                let again = store.resolve(got.record.class_id.as_str()).map_err(fail)?;
                prop_assert_eq!(again.record.class_id, got.record.class_id);
                prop_assert_eq!(again.chain_length, 0);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// A fresh store seeded with the same scheme and fed the change log ends in
/// the same state, and so does reopening a store directory.
pub fn journal_replay(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<u64>(),
        prop::collection::vec(
            (0u8..3, any::<prop::sample::Index>(), any::<prop::sample::Index>()),
            1..15,
        ),
    );
    runner(cases)
        .run(&strategy, |(seed, ops)| {
            let f = random_fixture(seed, 40, STORE_SIZE);
            let dir = tempfile::tempdir().map_err(fail)?;
            let mut store = Store::create(dir.path(), &f.base).map_err(fail)?;
            for (kind, a, b) in ops {
                let ids: Vec<ClassId> = store.records().map(|r| r.class_id.clone()).collect();
                let (a, b) = (a.get(&ids).clone(), b.get(&ids).clone());
                match kind {
                    0 => {
                        let (na, nb) = (
                            store.get(&a).unwrap().notation.clone(),
                            store.get(&b).unwrap().notation.clone(),
                        );
                        store
                            .record_composite(&format!("{na}:{nb}"), Some("tab\there\nnewline"))
                            .map_err(fail)?;
                    }
                    1 if a != b => store.replace(&a, &b, date()).map_err(fail)?,
                    _ if a != b && store.get(&a).unwrap().replaced_by() == Some(&b) => {
                        // a failed propagation writes nothing, so either outcome is fine
                        let _ = store.propagate_change(&a, &b);
                    }
                    _ => {}
                }
            }
            let mut replayed = Store::in_memory(&f.base);
            replayed.replay(store.change_log()).map_err(fail)?;
            prop_assert!(replayed == store);
            prop_assert_eq!(replayed.notation_index(), store.notation_index());
            prop_assert_eq!(replayed.term_index(), store.term_index());

            let reopened = Store::open(dir.path()).map_err(fail)?;
            prop_assert!(reopened == store);
            prop_assert_eq!(reopened.change_log().len(), store.change_log().len());
            prop_assert_eq!(reopened.term_index(), store.term_index());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// propagate_change against the decompose-and-substitute oracle on
/// 200-record stores, including collisions and pre-cancelled composites.
pub fn propagation_oracle(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<u64>(),
        any::<prop::sample::Index>(),
        any::<prop::sample::Index>(),
        prop::collection::vec(any::<prop::sample::Index>(), 0..5),
        any::<bool>(),
    );
    runner(cases)
        .run(&strategy, |(seed, old, new, cancel, complex_new)| {
            let f = random_fixture(seed, 40, STORE_SIZE);
            let mut store = Store::in_memory(&f.base);
            let old = old.get(&f.simple).clone();
            let new = if complex_new {
                new.get(&f.composites)
            } else {
                new.get(&f.simple)
            }
            .clone();
            prop_assume!(old != new);
            for c in cancel {
                let victim = c.get(&f.composites);
                if *victim != new {
                    store.replace(victim, &new, date()).map_err(fail)?;
                }
            }
            store.replace(&old, &new, date()).map_err(fail)?;
            let expected = oracle(&store, &old);
            let complex = decompose(&store.get(&new).unwrap().notation, store.grammar())
                .unwrap()
                .operands
                .len()
                > 1;
            let values: Vec<&String> = expected.values().collect();
            let distinct: BTreeSet<&String> = values.iter().copied().collect();
            let conflict =
                distinct.len() != values.len() || values.iter().any(|n| store.notation_index().contains_key(*n));
            let before = store.len();
            let log_before = store.change_log().len();
            let result = store.propagate_change(&old, &new);

            if !expected.is_empty() && complex {
                prop_assert!(
                    matches!(result, Err(StoreError::IncompatibleReplacement { .. })),
                    "{:?}",
                    result
                );
            } else if conflict {
                prop_assert!(
                    matches!(result, Err(StoreError::RewriteConflict { .. })),
                    "{:?}",
                    result
                );
            } else {
                let rewrites = result.map_err(fail)?;
                let got: BTreeMap<ClassId, String> = rewrites
                    .iter()
                    .map(|r| (r.affected.clone(), r.notation.clone()))
                    .collect();
                prop_assert_eq!(&got, &expected);
                prop_assert_eq!(store.len(), before + rewrites.len());
                for r in &rewrites {
                    prop_assert_eq!(
                        store.resolve(r.affected.as_str()).map_err(fail)?.record.class_id,
                        r.replacement.clone()
                    );
                    let made = store.get(&r.replacement).unwrap();
                    prop_assert_eq!(&made.notation, &r.notation);
                    prop_assert_eq!(&made.caption, &store.get(&r.affected).unwrap().caption);
                }
                // collation order of the affected records
                let order: Vec<ClassId> = store
                    .sorted_records()
                    .into_iter()
                    .map(|r| r.class_id)
                    .filter(|id| expected.contains_key(id))
                    .collect();
                let affected: Vec<ClassId> = rewrites.iter().map(|r| r.affected.clone()).collect();
                prop_assert_eq!(affected, order);
                return Ok(());
            }
            prop_assert_eq!(store.len(), before);
            prop_assert_eq!(store.change_log().len(), log_before);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Term search returns exactly the live records whose caption or index
/// terms contain the word, after any mix of replacements.
pub fn index_coherence(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<u64>(),
        prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..10),
    );
    runner(cases)
        .run(&strategy, |(seed, replacements)| {
            let f = random_fixture(seed, 40, STORE_SIZE);
            let mut store = Store::in_memory(&f.base);
            let ids: Vec<ClassId> = store.records().map(|r| r.class_id.clone()).collect();
            for (a, b) in replacements {
                if a.get(&ids) != b.get(&ids) {
                    store.replace(a.get(&ids), b.get(&ids), date()).map_err(fail)?;
                }
            }
            for word in WORDS {
                let got: BTreeSet<ClassId> = store.search_by_term(word).into_iter().map(|r| r.class_id).collect();
                let want: BTreeSet<ClassId> = store
                    .records()
                    .filter(|r| !r.is_cancelled())
                    .filter(|r| {
                        std::iter::once(&r.caption)
                            .chain(&r.index_terms)
                            .any(|t| words(t).iter().any(|w| w == word))
                    })
                    .map(|r| r.class_id.clone())
                    .collect();
                prop_assert_eq!(got, want, "{}", word);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}
