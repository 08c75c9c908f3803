//! Case-record ingestion, ontology learning, a sparse knowledge graph and the
//! adaptive triage engine built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] case records, the synthetic generator, loading and splitting
//! * [`textproc`] preprocessing, dictionary NER, negation and rule relations
//! * [`relext`] the convolutional relation classifier
//! * [`ontology`] compound splitting, concept clustering and taxonomy
//! * [`kg`] the CSR knowledge graph, traversal and similar-case retrieval
//! * [`qgen`] term rankers, the masked-concept predictor and question selection
//! * [`triage`] sessions, recommendations and their evaluation

pub mod corpus;
pub mod error;
pub mod kg;
pub mod metrics;
pub mod ontology;
pub mod qgen;
pub mod relext;
pub mod resources;
pub mod rng;
pub mod textproc;
pub mod triage;

pub use error::{Error, Result};
