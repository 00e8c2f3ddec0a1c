//! Files, configuration, CLI plumbing and the HTTP advisory service around
//! `cwloop-core`.

pub mod bundle;
pub mod config;
pub mod error;
pub mod files;
pub mod ingest;
pub mod service;
pub mod table;

pub use error::{Error, Result};
