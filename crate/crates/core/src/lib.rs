pub mod collation;
pub mod exchange;
pub mod grammar;
pub mod hierarchy;
pub mod index;
pub mod notation;
pub mod record;
pub mod scheme;
pub mod store;
pub mod synthesis;
