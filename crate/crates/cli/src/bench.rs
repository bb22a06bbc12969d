//! The benchmark harness: executes the cross-product of algorithms x
//! epsilons x entity fractions x group sizes over one dataset, optionally
//! verifying that every algorithm produced the same triple set.

use std::collections::BTreeSet;

use kgcjoin_core::baseline::QuickjoinParams;
use kgcjoin_core::join::JoinConfig;
use kgcjoin_core::{EmbeddingMatrix, MetricModel, Norm, ResultTriple};

use crate::config::{DataSource, ExperimentConfig};
use crate::output::fmt_sig6;
use crate::run::{run_algorithm, Algorithm};
use crate::CliError;

/// One benchmark run.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub tag: String,
    pub algorithm: Algorithm,
    pub eps: f64,
    pub fraction: f64,
    pub max_group_size: usize,
    pub partition_rows: usize,
    pub candidate_pairs: u64,
    pub emitted: u64,
    pub wall_ms: f64,
    pub preprocess_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

impl BenchReport {
    pub const TSV_HEADER: &'static str = "tag\talgorithm\teps\tfraction\tmax_group_size\tpartition_rows\tcandidate_pairs\temitted\twall_ms\tpreprocess_ms";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::TSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}\n",
                r.tag,
                r.algorithm,
                fmt_sig6(r.eps),
                r.fraction,
                r.max_group_size,
                r.partition_rows,
                r.candidate_pairs,
                r.emitted,
                r.wall_ms,
                r.preprocess_ms,
            ));
        }
        out
    }

    /// Fixed-width table for human eyes.
    pub fn to_table(&self, time_breakdown: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:<18} {:>10} {:>6} {:>9} {:>7} {:>14} {:>10} {:>10}",
            "tag", "algorithm", "eps", "frac", "group", "part", "candidates", "emitted", "wall_ms"
        ));
        if time_breakdown {
            out.push_str(&format!(" {:>10}", "prep_ms"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{:<10} {:<18} {:>10} {:>6} {:>9} {:>7} {:>14} {:>10} {:>10.1}",
                r.tag,
                r.algorithm.name(),
                fmt_sig6(r.eps),
                r.fraction,
                r.max_group_size,
                r.partition_rows,
                r.candidate_pairs,
                r.emitted,
                r.wall_ms,
            ));
            if time_breakdown {
                out.push_str(&format!(" {:>10.1}", r.preprocess_ms));
            }
            out.push('\n');
        }
        out
    }
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<(EmbeddingMatrix, EmbeddingMatrix), CliError> {
    match &cfg.source {
        DataSource::Files { entities, relations } => {
            let e = EmbeddingMatrix::load(entities)?;
            let r = EmbeddingMatrix::load(relations)?;
            Ok((e, r))
        }
        DataSource::Synth { n, d, relations_count, distribution } => {
            let e = EmbeddingMatrix::synthetic(*n, *d, *distribution, cfg.seed)?;
            let r = EmbeddingMatrix::synthetic(*relations_count, *d, *distribution, cfg.seed + 1)?;
            Ok((e, r))
        }
    }
}

type TripleKeys = BTreeSet<(usize, usize, usize)>;

fn triple_keys(triples: &[ResultTriple]) -> TripleKeys {
    triples.iter().map(|t| (t.head, t.rel, t.tail)).collect()
}

/// Executes the experiment. With `verify`, every algorithm run on the same
/// (fraction, eps, group size) must produce the identical triple set;
/// a mismatch reports a sample of at most 20 differing triples.
pub fn run_experiment(cfg: &ExperimentConfig, verify: bool) -> Result<BenchReport, CliError> {
    let model = MetricModel::transe(Norm::from_order(cfg.p)?);
    let (e_full, r) = load_dataset(cfg)?;
    let quickjoin = QuickjoinParams {
        rng_seed: cfg.seed,
        ..QuickjoinParams::default()
    };

    let mut report = BenchReport::default();
    for &fraction in &cfg.fractions {
        let e = if fraction < 1.0 {
            e_full.subsample(fraction, cfg.seed)?
        } else {
            e_full.clone()
        };
        for &eps in &cfg.epsilons {
            for &group_size in &cfg.group_sizes {
                let mut reference: Option<(Algorithm, TripleKeys)> = None;
                for &algorithm in &cfg.algorithms {
                    let mut join_cfg = JoinConfig::new(eps);
                    join_cfg.max_group_size = group_size;
                    join_cfg.partition_rows = cfg.partition_rows;
                    join_cfg.pivot = cfg.pivot;
                    let outcome = run_algorithm(algorithm, &e, &r, &model, &join_cfg, &quickjoin)?;
                    if verify {
                        let keys = triple_keys(&outcome.triples);
                        match &reference {
                            None => reference = Some((algorithm, keys)),
                            Some((ref_alg, ref_keys)) => {
                                if keys != *ref_keys {
                                    return Err(verification_error(
                                        cfg, *ref_alg, algorithm, fraction, eps, ref_keys, &keys,
                                    ));
                                }
                            }
                        }
                    }
                    report.records.push(BenchRecord {
                        tag: cfg.tag.clone(),
                        algorithm,
                        eps,
                        fraction,
                        max_group_size: group_size,
                        partition_rows: cfg.partition_rows,
                        candidate_pairs: outcome.stats.candidate_pairs,
                        emitted: outcome.stats.emitted,
                        wall_ms: outcome.stats.total.as_secs_f64() * 1e3,
                        preprocess_ms: outcome.stats.preprocess.as_secs_f64() * 1e3,
                    });
                }
            }
        }
    }
    Ok(report)
}

fn verification_error(
    cfg: &ExperimentConfig,
    ref_alg: Algorithm,
    algorithm: Algorithm,
    fraction: f64,
    eps: f64,
    ref_keys: &TripleKeys,
    keys: &TripleKeys,
) -> CliError {
    let mut diffs = Vec::new();
    for t in ref_keys.difference(keys).take(10) {
        diffs.push(format!("only in {}: ({}, {}, {})", ref_alg, t.0, t.1, t.2));
    }
    for t in keys.difference(ref_keys).take(20 - diffs.len().min(20)) {
        diffs.push(format!("only in {}: ({}, {}, {})", algorithm, t.0, t.1, t.2));
    }
    CliError::Verification {
        summary: format!(
            "{} vs {} disagree on tag={} fraction={} eps={} ({} vs {} triples)",
            ref_alg,
            algorithm,
            cfg.tag,
            fraction,
            eps,
            ref_keys.len(),
            keys.len()
        ),
        diffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "tag = demo\nsource = synth\nn = 120\nd = 8\nrelations_count = 2\n\
             algorithms = pivot, naive\nepsilons = 0.4, 0.7, 1.0\nseed = 5\n",
        )
        .unwrap()
    }

    #[test]
    fn cross_product_record_count_and_equal_counts() {
        let cfg = synth_config();
        let report = run_experiment(&cfg, true).unwrap();
        // 2 algorithms x 3 epsilons x 1 fraction x 1 group size.
        assert_eq!(report.records.len(), 6);
        for eps in [0.4, 0.7, 1.0] {
            let counts: Vec<u64> = report
                .records
                .iter()
                .filter(|r| r.eps == eps)
                .map(|r| r.emitted)
                .collect();
            assert_eq!(counts.len(), 2);
            assert_eq!(counts[0], counts[1], "eps={eps}");
        }
    }

    #[test]
    fn deterministic_modulo_wall_time() {
        let cfg = synth_config();
        let a = run_experiment(&cfg, false).unwrap();
        let b = run_experiment(&cfg, false).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.emitted, y.emitted);
            assert_eq!(x.candidate_pairs, y.candidate_pairs);
        }
    }

    #[test]
    fn tsv_has_header_and_rows() {
        let cfg = synth_config();
        let report = run_experiment(&cfg, false).unwrap();
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], BenchReport::TSV_HEADER);
        assert_eq!(lines.len(), 7);
    }
}
