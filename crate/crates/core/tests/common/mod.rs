#![allow(dead_code)]

use std::path::PathBuf;

use facet_core::exchange::read_scheme;
use facet_core::scheme::Scheme;

pub mod exchange_props;
pub mod props;
pub mod store_props;
pub mod xsd;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture(name: &str) -> Scheme {
    read_scheme(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const ALL_FIXTURES: &[&str] = &[
    "expressive.fcs",
    "facets.fcs",
    "ranges.fcs",
    "missing_levels.fcs",
    "false_hierarchy.fcs",
    "telescoped.fcs",
    "udc.fcs",
    "parallel.fcs",
    "fathum.fcs",
];
