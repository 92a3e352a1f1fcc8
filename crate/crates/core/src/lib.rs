pub mod bench;
pub mod catalog;
pub mod containment;
pub mod engine;
pub mod query;
pub mod rdf;
pub mod selection;
pub mod synth;
