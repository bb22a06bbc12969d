//! Finds every high-scoring (head, relation, tail) triple in a set of
//! knowledge-graph embedding vectors by recasting the ternary completion
//! problem as a metric-space epsilon join.
//!
//! The pipeline: a score function that is transformable to a metric space
//! is split into two per-relation connector maps plus an Lp metric
//! ([`metric`]); both join sides are sorted by distance to a pivot and a
//! triangle-inequality lower bound turns the epsilon test into contiguous
//! candidate ranges over the sorted order ([`pivot`]); candidate ranges are
//! merged into bounded rectangular batches and verified with a blocked
//! distance kernel, optionally partitioned into fixed-size row blocks to cap
//! peak memory ([`join`]). Two reference algorithms — an exhaustive batched
//! sweep and Quickjoin — double as correctness oracles ([`baseline`]), and
//! [`eval`] provides top-1 statistics and filtered MRR / Hits@k.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod join;
pub mod matrix;
pub mod metric;
pub mod pivot;

pub use error::{Error, Result};
pub use join::{JoinConfig, JoinOutcome, JoinStats, ResultTriple};
pub use matrix::{EmbeddingMatrix, SyntheticDistribution, Triple, TripleList};
pub use metric::{MetricModel, Norm};
