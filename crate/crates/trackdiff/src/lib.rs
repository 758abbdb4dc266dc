//! Storage, ingestion, query service and command line for `trackdiff`.
//!
//! The numerical work lives in [`trackdiff_core`]; this crate adds the
//! compressed archive ([`store`], [`archive`]), batch and stream ingestion
//! ([`ingest`]), the shared query layer ([`query`]), the HTTP service
//! ([`service`]) and the CLI ([`cli`]).

pub mod archive;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod query;
pub mod service;
pub mod store;

pub use error::{Error, Result};
pub use store::{Snapshot, Store};
