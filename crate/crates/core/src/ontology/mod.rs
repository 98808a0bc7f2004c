//! Triple store for ontology concepts and scene instances.
//!
//! Knowledge lives in a [`Graph`] of prefixed-IRI triples. The graph keeps a
//! reflexive-transitive closure of `rdfs:subClassOf` so subclass and
//! instance queries are answered without walking the hierarchy.

mod graph;
mod iri;
mod term;
mod turtle;
pub mod vocab;

pub use graph::{Binding, Graph, GraphError, Position, TriplePattern};
pub use iri::{Iri, IriError};
pub use term::{RdfTerm, Triple};
pub use turtle::{parse_turtle, parse_turtle_into, serialize_turtle, TurtleError};

/// The bundled base ontology: core relations, properties and the minimal
/// concept hierarchy the demo skills rely on.
pub const BASE_ONTOLOGY: &str = include_str!("../../assets/base.ttl");

/// Parses the bundled base ontology.
pub fn base_ontology() -> Graph {
    parse_turtle(BASE_ONTOLOGY).expect("bundled base ontology is valid")
}
