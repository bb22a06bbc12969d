//! Algorithm selection shared by the `complete` command and the bench
//! harness.

use std::str::FromStr;

use kgcjoin_core::baseline::{naive_join, quickjoin_complete, QuickjoinParams};
use kgcjoin_core::join::{apply_exclusions, complete_all, complete_all_partitioned, JoinConfig};
use kgcjoin_core::{EmbeddingMatrix, JoinOutcome, MetricModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pivot,
    PivotPartitioned,
    Naive,
    Quickjoin,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pivot => "pivot",
            Algorithm::PivotPartitioned => "pivot-partitioned",
            Algorithm::Naive => "naive",
            Algorithm::Quickjoin => "quickjoin",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pivot" => Ok(Algorithm::Pivot),
            "pivot-partitioned" => Ok(Algorithm::PivotPartitioned),
            "naive" => Ok(Algorithm::Naive),
            "quickjoin" => Ok(Algorithm::Quickjoin),
            other => Err(format!(
                "unknown algorithm {other:?} (expected pivot, pivot-partitioned, naive, quickjoin)"
            )),
        }
    }
}

/// Runs one algorithm under a shared join configuration. The baselines take
/// no exclusion filters themselves; those apply post-verification so every
/// algorithm reports the same triple set.
pub fn run_algorithm(
    algorithm: Algorithm,
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    cfg: &JoinConfig,
    quickjoin: &QuickjoinParams,
) -> kgcjoin_core::Result<JoinOutcome> {
    match algorithm {
        Algorithm::Pivot => complete_all(e, r, model, cfg),
        Algorithm::PivotPartitioned => complete_all_partitioned(e, r, model, cfg),
        Algorithm::Naive => {
            let mut outcome = naive_join(e, r, model, cfg.eps)?;
            outcome.triples =
                apply_exclusions(outcome.triples, cfg.exclude_self, cfg.exclude_known.as_ref());
            outcome.stats.emitted = outcome.triples.len() as u64;
            Ok(outcome)
        }
        Algorithm::Quickjoin => {
            let mut outcome = quickjoin_complete(e, r, model, cfg.eps, quickjoin)?;
            outcome.triples =
                apply_exclusions(outcome.triples, cfg.exclude_self, cfg.exclude_known.as_ref());
            outcome.stats.emitted = outcome.triples.len() as u64;
            Ok(outcome)
        }
    }
}
