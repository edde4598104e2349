//! Direct-dependency governance: manifest parsing, the dependency reference
//! database, build gating, vulnerability sync and reports.

pub mod corpus;
pub mod gate;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod range;
pub mod reports;
pub mod store;
pub mod sync;
pub mod version;
