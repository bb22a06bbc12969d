//! Cross-algorithm agreement and filter-accounting properties at moderate
//! scale.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use kgcjoin_core::baseline::{naive_join, quickjoin_complete, QuickjoinParams};
use kgcjoin_core::join::{complete_all, complete_all_partitioned, JoinConfig};
use kgcjoin_core::{EmbeddingMatrix, MetricModel, Norm, ResultTriple, SyntheticDistribution};

type Key = (usize, usize, usize);

fn key_set(triples: &[ResultTriple]) -> BTreeSet<Key> {
    triples.iter().map(|t| (t.head, t.rel, t.tail)).collect()
}

/// Epsilon near the q-quantile of sampled ternary distances.
fn quantile_eps(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    q: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample: Vec<f64> = (0..20_000)
        .map(|_| {
            let h = rng.gen_range(0..e.rows());
            let t = rng.gen_range(0..e.rows());
            let rel = rng.gen_range(0..r.rows());
            model
                .triple_distance(e.row(h), r.row(rel), e.row(t))
                .unwrap()
        })
        .collect();
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample[((q * sample.len() as f64) as usize).max(1)]
}

#[test]
fn all_algorithms_agree_on_moderate_instances() {
    for dist in [SyntheticDistribution::Uniform, SyntheticDistribution::Clustered] {
        let e = EmbeddingMatrix::synthetic(250, 16, dist, 101).unwrap();
        let r = EmbeddingMatrix::synthetic(3, 16, SyntheticDistribution::Uniform, 102).unwrap();
        for norm in [Norm::L1, Norm::L2] {
            let model = MetricModel::transe(norm);
            for q in [0.002, 0.02] {
                let eps = quantile_eps(&e, &r, &model, q, 7);
                let mut cfg = JoinConfig::new(eps);
                let reference = naive_join(&e, &r, &model, eps).unwrap();
                let keys = key_set(&reference.triples);
                assert!(!keys.is_empty(), "degenerate instance, eps too small");

                let pivot = complete_all(&e, &r, &model, &cfg).unwrap();
                assert_eq!(key_set(&pivot.triples), keys, "pivot {norm:?} q={q}");

                for p in [7, 64] {
                    cfg.partition_rows = p;
                    let part = complete_all_partitioned(&e, &r, &model, &cfg).unwrap();
                    assert_eq!(key_set(&part.triples), keys, "partition {p} {norm:?} q={q}");
                }

                let qj = quickjoin_complete(&e, &r, &model, eps, &QuickjoinParams::default())
                    .unwrap();
                assert_eq!(key_set(&qj.triples), keys, "quickjoin {norm:?} q={q}");
            }
        }
    }
}

/// Rows at uniform radii from the origin, so zero-pivot distances are
/// uniform over [0, width].
fn radial_matrix(n: usize, d: usize, width: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let radius: f64 = rng.gen::<f64>() * width;
        data.extend(dir.iter().map(|v| (v / norm * radius) as f32));
    }
    EmbeddingMatrix::new(n, d, data).unwrap()
}

#[test]
fn candidate_accounting_bounds() {
    let width = 10.0;
    let e = radial_matrix(1500, 12, width, 55);
    // Near-zero relation vectors keep the A side's pivot distances close to
    // the entity radii.
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let r_data: Vec<f32> = (0..2 * 12).map(|_| rng.gen_range(-0.01f32..0.01)).collect();
    let r = EmbeddingMatrix::new(2, 12, r_data).unwrap();
    let model = MetricModel::transe(Norm::L2);

    let m = e.rows() as u64;
    for eps in [0.05, 0.2, 1.0] {
        let out = complete_all(&e, &r, &model, &JoinConfig::new(eps)).unwrap();
        let pairs_per_rel = m * m;
        let total_pairs = pairs_per_rel * r.rows() as u64;
        assert!(out.stats.candidate_pairs <= total_pairs);
        // Interval-overlap expectation: a width-2eps window over radii
        // uniform on [0, width] captures about 2 eps / width of the rows.
        let fraction = out.stats.candidate_pairs as f64 / total_pairs as f64;
        let bound = (2.0 * eps / width).min(1.0) + 0.05;
        assert!(
            fraction <= bound,
            "candidate fraction {fraction:.4} over bound {bound:.4} at eps={eps}"
        );
    }
}

#[test]
fn filter_admits_every_oracle_triple() {
    // No false negatives: the range filter may only discard pairs whose
    // lower bound already exceeds eps.
    let e = EmbeddingMatrix::synthetic(150, 8, SyntheticDistribution::Clustered, 77).unwrap();
    let r = EmbeddingMatrix::synthetic(2, 8, SyntheticDistribution::Uniform, 78).unwrap();
    let model = MetricModel::transe(Norm::L2);
    let eps = quantile_eps(&e, &r, &model, 0.01, 9);
    let oracle = naive_join(&e, &r, &model, eps).unwrap();
    let engine = complete_all(&e, &r, &model, &JoinConfig::new(eps)).unwrap();
    let engine_keys = key_set(&engine.triples);
    for t in &oracle.triples {
        assert!(
            engine_keys.contains(&(t.head, t.rel, t.tail)),
            "oracle triple ({}, {}, {}) missing from engine output",
            t.head,
            t.rel,
            t.tail
        );
    }
}
