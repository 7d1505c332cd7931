//! Graph-constrained mechanistic synthesis.
//!
//! A query is answered by building a query-local concept graph from a small
//! retrieved corpus, searching it for multi-hop reasoning paths, handing those
//! paths to a language model for realization, and then measuring how much of
//! the symbolic structure survived the realization.

pub mod community;
pub mod config;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod queries;
pub mod strategies;
pub mod trace;
pub mod traversal;

pub use config::RunConfig;
pub use error::{Error, Result};
