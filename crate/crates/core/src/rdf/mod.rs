//! Ground RDF data model, N-Triples I/O and set algebra over graphs.

mod graph;
mod ntriples;
mod term;

pub use graph::{apply_changeset, graph_diff, Changeset, Graph};
pub use ntriples::{
    parse_ntriples, parse_ntriples_reader, parse_ntriples_str, serialize_ntriples, NtError, ParseMode,
    ParseOptions, ParseOutcome, SyntaxError, SKOLEM_PREFIX,
};
pub use term::{
    iri_triple, Literal, Term, Triple, RDF_TYPE, XSD, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER,
    XSD_STRING,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RdfError {
    #[error("invalid triple: {0}")]
    Position(&'static str),
}
