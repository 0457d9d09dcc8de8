//! Graph-based cooperative edge caching.
//!
//! The pipeline builds a cooperation graph over cache nodes, enumerates its
//! cliques as candidate clusters, chooses disjoint clusters by a multi-start
//! greedy maximum-weight independent set, then places content so that
//! cooperating nodes avoid caching the same popular files. Offloaded traffic
//! is evaluated directly and through a three-term decomposition, and small
//! instances can be checked against exhaustive oracles.

pub mod clustering;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod placement;
pub mod workload;

pub use error::{Error, Result, ValidationError};
