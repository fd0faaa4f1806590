//! Whole-word term index over captions and index terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::record::{ClassId, ClassRecord};

/// Case-fold and collapse runs of whitespace. No stemming.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lower-cased words of a text; anything not alphanumeric separates words.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Whether `query` occurs as whole words in the record's caption or in one
/// of its index terms.
pub fn record_matches(record: &ClassRecord, query: &str) -> bool {
    let phrase = words(query);
    std::iter::once(&record.caption)
        .chain(record.index_terms.iter())
        .any(|text| contains_phrase(&words(text), &phrase))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermIndex {
    postings: BTreeMap<String, BTreeSet<ClassId>>,
}

impl TermIndex {
    pub fn insert(&mut self, record: &ClassRecord) {
        for text in std::iter::once(&record.caption).chain(record.index_terms.iter()) {
            for word in words(text) {
                self.postings.entry(word).or_default().insert(record.class_id.clone());
            }
        }
    }

    pub fn remove(&mut self, record: &ClassRecord) {
        for text in std::iter::once(&record.caption).chain(record.index_terms.iter()) {
            for word in words(text) {
                if let Some(set) = self.postings.get_mut(&word) {
                    set.remove(&record.class_id);
                    if set.is_empty() {
                        self.postings.remove(&word);
                    }
                }
            }
        }
    }

    /// Ids posted under every word of `query`; callers confirm the phrase
    /// with [`record_matches`].
    pub fn candidates(&self, query: &str) -> BTreeSet<ClassId> {
        let mut iter = words(query).into_iter();
        let Some(first) = iter.next() else {
            return BTreeSet::new();
        };
        let mut acc = self.postings.get(&first).cloned().unwrap_or_default();
        for word in iter {
            let set = self.postings.get(&word);
            acc.retain(|id| set.is_some_and(|s| s.contains(id)));
        }
        acc
    }

    pub fn posting(&self, word: &str) -> Option<&BTreeSet<ClassId>> {
        self.postings.get(word)
    }
}
