//! Scheme serialization: the lossless `.fcs` text format and a lossy XML
//! concept-scheme export.

mod concept;
pub(crate) mod fcs;

pub use concept::{export_concept_scheme, CONCEPT_SCHEMA, EXTENSION_NS, EXTENSION_SCHEMA};
pub use fcs::{export_canonical, import_canonical, read_scheme, write_parts, ExchangeError, FcsError, FORMAT_VERSION};
