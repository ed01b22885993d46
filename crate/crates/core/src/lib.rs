//! Interest-based propagation of RDF changesets.
//!
//! A source dataset evolves through a stream of changesets (removed and added
//! triples). Each subscriber registers an *interest expression*, a graph
//! pattern with an optional part, and keeps only the matching slice of the
//! source in its target store. Triples that match part of the pattern are
//! parked in a per-interest side store until later changesets complete them.

pub mod pattern;
pub mod rdf;
pub mod index;
pub mod match_engine;
pub mod evaluator;
pub mod store;
pub mod changeset_io;
pub mod oracle;
pub mod service;
