//! Blank-node-free RDF: terms, triples, patterns and an indexed store.

mod ntriples;
mod store;
mod term;

pub use ntriples::{parse_ntriples, read_ntriples, serialize_ntriples, NtError};
pub use store::TripleStore;
pub use term::{
    Iri, Literal, PatternTerm, SolutionMapping, Term, TermError, Triple, TriplePattern, Variable,
    LOCAL_NS,
};
