//! Artifact pipeline, HTTP service, load bench and CLI around `triage-core`.

pub mod api;
pub mod bench;
pub mod cli;
pub mod config;
pub mod pipeline;
pub mod search;
pub mod store;
