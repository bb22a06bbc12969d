//! Model-level statistics: the exact top-1 (minimum) ternary distance with
//! per-dimension value ranges, and filtered MRR / Hits@k rank metrics.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, Triple, TripleList};
use crate::metric::{kernel_block, KernelSide, MetricModel, KERNEL_CELL_BUDGET};

/// Exact minimum of the ternary distance over all triples, plus the
/// per-dimension value ranges of the entity matrix (their maximum width is
/// the scale an epsilon should be judged against).
#[derive(Debug, Clone)]
pub struct Top1Stats {
    pub top1: f64,
    /// (head, rel, tail) attaining the minimum; ties resolve to the
    /// lexicographically smallest triple.
    pub argmin: (usize, usize, usize),
    /// (min, max) of each entity-embedding dimension.
    pub dim_ranges: Vec<(f32, f32)>,
    /// Largest max - min over the dimensions.
    pub max_range: f32,
}

type MinEntry = (f64, (usize, usize, usize));

/// Minimum ternary distance over all (h, r, t), optionally restricted to
/// h != t, computed with the exhaustive batched sweep.
pub fn top1_stats(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    exclude_self: bool,
) -> Result<Top1Stats> {
    if e.rows() == 0 || r.rows() == 0 {
        return Err(Error::Parameter("top1 needs at least one entity and one relation".into()));
    }
    if exclude_self && e.rows() < 2 {
        return Err(Error::Parameter("top1 without self-edges needs at least two entities".into()));
    }
    if e.dim() != r.dim() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            r.dim()
        )));
    }

    let shared_b = if !model.tail_depends_on_relation() {
        Some(KernelSide::from_matrix(&model.apply_tail(e, r.row(0))?))
    } else {
        None
    };

    let per_relation: Result<Vec<MinEntry>> = (0..r.rows())
        .into_par_iter()
        .map(|rel_id| {
            let local_b;
            let wb = match &shared_b {
                Some(side) => side,
                None => {
                    local_b = KernelSide::from_matrix(&model.apply_tail(e, r.row(rel_id))?);
                    &local_b
                }
            };
            let wa = KernelSide::from_matrix(&model.apply_head(e, r.row(rel_id))?);
            relation_min(&wa, wb, model, rel_id, exclude_self)
        })
        .collect();

    let (top1, argmin) = per_relation?
        .into_iter()
        .min_by(|(da, ta), (db, tb)| da.partial_cmp(db).unwrap().then(ta.cmp(tb)))
        .expect("at least one relation");

    let mut dim_ranges = vec![(f32::INFINITY, f32::NEG_INFINITY); e.dim()];
    for i in 0..e.rows() {
        for (range, &v) in dim_ranges.iter_mut().zip(e.row(i)) {
            range.0 = range.0.min(v);
            range.1 = range.1.max(v);
        }
    }
    let max_range = dim_ranges
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0f32, f32::max);

    Ok(Top1Stats {
        top1,
        argmin,
        dim_ranges,
        max_range,
    })
}

fn relation_min(
    wa: &KernelSide,
    wb: &KernelSide,
    model: &MetricModel,
    rel_id: usize,
    exclude_self: bool,
) -> Result<MinEntry> {
    let m = wa.rows();
    let n = wb.rows();
    let mut best = (f64::INFINITY, (usize::MAX, rel_id, usize::MAX));
    let mut block = m.clamp(1, 2048);
    let mut scratch = Vec::new();
    let mut lo = 0usize;
    while lo < m {
        let rows = block.min(m - lo);
        match kernel_block(wa, lo..lo + rows, wb, 0..n, model.norm(), KERNEL_CELL_BUDGET, &mut scratch) {
            Ok(()) => {
                for (di, row) in scratch.chunks_exact(n).enumerate() {
                    let h = lo + di;
                    for (t, &d) in row.iter().enumerate() {
                        if exclude_self && h == t {
                            continue;
                        }
                        let key = (d, (h, rel_id, t));
                        if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
                            best = key;
                        }
                    }
                }
                lo += rows;
            }
            Err(Error::KernelBudget { .. }) if rows > 1 => {
                block = (rows / 2).max(1);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Filtered rank metrics over a test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

/// For each test triple, ranks the true tail among all entities scored as
/// tails (other known triples filtered out), and likewise for the head
/// side; the two sides average with denominator 2 |Test|. Ties rank the
/// true triple last (the pessimistic convention).
pub fn filtered_rank_metrics(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    test: &TripleList,
    total: &TripleList,
) -> Result<RankMetrics> {
    if test.is_empty() {
        return Err(Error::Parameter("empty test triple list".into()));
    }
    test.validate(e.rows(), r.rows())?;
    total.validate(e.rows(), r.rows())?;
    if e.dim() != r.dim() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            r.dim()
        )));
    }

    let total_set: HashSet<Triple> = total.triples.iter().copied().collect();

    // Group test triples by relation so each relation's connected sides are
    // built once.
    let mut by_rel: Vec<Vec<Triple>> = vec![Vec::new(); r.rows()];
    for t in &test.triples {
        by_rel[t.rel].push(*t);
    }

    let per_rel: Result<Vec<(f64, f64, f64, f64)>> = by_rel
        .into_par_iter()
        .enumerate()
        .filter(|(_, triples)| !triples.is_empty())
        .map(|(rel_id, triples)| {
            let wa = KernelSide::from_matrix(&model.apply_head(e, r.row(rel_id))?);
            let wb = KernelSide::from_matrix(&model.apply_tail(e, r.row(rel_id))?);
            let mut scratch = Vec::new();
            let mut acc = (0.0, 0.0, 0.0, 0.0);
            for t in triples {
                // Tail side: rank t.tail among y scored as tails of (h, r).
                kernel_block(&wa, t.head..t.head + 1, &wb, 0..wb.rows(), model.norm(), KERNEL_CELL_BUDGET, &mut scratch)?;
                let rank_tail = rank_of(&scratch, t.tail, |y| {
                    y == t.tail || !total_set.contains(&Triple { head: t.head, rel: rel_id, tail: y })
                });
                // Head side: rank t.head among x scored as heads of (r, t).
                kernel_block(&wa, 0..wa.rows(), &wb, t.tail..t.tail + 1, model.norm(), KERNEL_CELL_BUDGET, &mut scratch)?;
                let rank_head = rank_of(&scratch, t.head, |x| {
                    x == t.head || !total_set.contains(&Triple { head: x, rel: rel_id, tail: t.tail })
                });
                for rank in [rank_tail, rank_head] {
                    acc.0 += 1.0 / rank as f64;
                    acc.1 += hits(rank, 1);
                    acc.2 += hits(rank, 3);
                    acc.3 += hits(rank, 10);
                }
            }
            Ok(acc)
        })
        .collect();

    let mut sums = (0.0, 0.0, 0.0, 0.0);
    for (a, b, c, d) in per_rel? {
        sums.0 += a;
        sums.1 += b;
        sums.2 += c;
        sums.3 += d;
    }
    let denom = 2.0 * test.len() as f64;
    Ok(RankMetrics {
        mrr: sums.0 / denom,
        hits1: sums.1 / denom,
        hits3: sums.2 / denom,
        hits10: sums.3 / denom,
    })
}

fn hits(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Pessimistic rank of `true_idx` in a distance row restricted to the
/// candidates admitted by `is_candidate`: 1 + the number of other
/// candidates at distance <= the true distance.
fn rank_of(distances: &[f64], true_idx: usize, is_candidate: impl Fn(usize) -> bool) -> usize {
    let d_true = distances[true_idx];
    let mut rank = 1usize;
    for (y, &d) in distances.iter().enumerate() {
        if y != true_idx && is_candidate(y) && d <= d_true {
            rank += 1;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SyntheticDistribution;
    use crate::metric::Norm;

    #[test]
    fn top1_single_entity_relation() {
        let e = EmbeddingMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let r = EmbeddingMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let model = MetricModel::transe(Norm::L2);
        let stats = top1_stats(&e, &r, &model, false).unwrap();
        assert_eq!(stats.top1, 0.0);
        assert_eq!(stats.argmin, (0, 0, 0));
    }

    #[test]
    fn top1_exclude_self_is_restricted_minimum() {
        let e = EmbeddingMatrix::synthetic(30, 6, SyntheticDistribution::Uniform, 1).unwrap();
        let r = EmbeddingMatrix::synthetic(2, 6, SyntheticDistribution::Uniform, 2).unwrap();
        let model = MetricModel::transe(Norm::L2);
        let plain = top1_stats(&e, &r, &model, false).unwrap();
        let excl = top1_stats(&e, &r, &model, true).unwrap();
        assert!(excl.top1 >= plain.top1);
        let (h, _, t) = excl.argmin;
        assert_ne!(h, t);
    }

    #[test]
    fn top1_matches_scalar_sweep() {
        let e = EmbeddingMatrix::synthetic(25, 4, SyntheticDistribution::Uniform, 3).unwrap();
        let r = EmbeddingMatrix::synthetic(3, 4, SyntheticDistribution::Uniform, 4).unwrap();
        let model = MetricModel::transe(Norm::L1);
        let stats = top1_stats(&e, &r, &model, false).unwrap();
        let mut want = f64::INFINITY;
        for rel in 0..r.rows() {
            for h in 0..e.rows() {
                for t in 0..e.rows() {
                    want = want.min(model.triple_distance(e.row(h), r.row(rel), e.row(t)).unwrap());
                }
            }
        }
        assert!((stats.top1 - want).abs() <= 1e-9 * (1.0 + want));
        assert!(stats.max_range > 0.0);
        assert_eq!(stats.dim_ranges.len(), 4);
    }

    #[test]
    fn top1_rejects_empty() {
        let e = EmbeddingMatrix::new(0, 2, vec![]).unwrap();
        let r = EmbeddingMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let model = MetricModel::transe(Norm::L2);
        assert!(matches!(top1_stats(&e, &r, &model, false), Err(Error::Parameter(_))));
    }

    /// Entities on a line so ternary distances are easy to state by hand.
    fn line_instance() -> (EmbeddingMatrix, EmbeddingMatrix) {
        let e = EmbeddingMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 10.0]).unwrap();
        let r = EmbeddingMatrix::new(1, 1, vec![1.0]).unwrap();
        (e, r)
    }

    #[test]
    fn rank_metrics_perfect_instance() {
        // Test triple (0, 0, 1): h + r = 0 + 1 = 1 lands exactly on entity
        // 1, every other entity is at distance >= 1. Head side: x + 1 vs
        // tail 1 is minimized by x = 0 alone.
        let (e, r) = line_instance();
        let model = MetricModel::transe(Norm::L2);
        let test = TripleList::new(vec![Triple { head: 0, rel: 0, tail: 1 }]);
        let metrics = filtered_rank_metrics(&e, &r, &model, &test, &test).unwrap();
        assert_eq!(metrics.mrr, 1.0);
        assert_eq!(metrics.hits1, 1.0);
        assert_eq!(metrics.hits3, 1.0);
        assert_eq!(metrics.hits10, 1.0);
    }

    #[test]
    fn rank_metrics_second_place_both_sides() {
        // Entities at 0, 1, 2, 10 with r = 1. Test triple (0, 0, 2):
        // tail side distances from h + r = 1: |1-0|=1, |1-1|=0, |1-2|=1,
        // |1-10|=9 -> true tail 2 has distance 1, beaten by entity 1 and
        // tied with entity 0; pessimistic rank puts ties first, so rank = 3.
        // To get a clean rank 2 on both sides, filter entity 0 out of the
        // tail candidates and entity 1 out of the head candidates via Total.
        let (e, r) = line_instance();
        let model = MetricModel::transe(Norm::L2);
        let test = TripleList::new(vec![Triple { head: 0, rel: 0, tail: 2 }]);
        let total = TripleList::new(vec![
            Triple { head: 0, rel: 0, tail: 2 },
            // removes y = 0 from the tail-side candidates
            Triple { head: 0, rel: 0, tail: 0 },
            // removes x = 1 from the head-side candidates
            Triple { head: 1, rel: 0, tail: 2 },
        ]);
        // Tail side candidates now 1, 2, 10 -> distances 0, 1, 9, true rank 2.
        // Head side: x + 1 vs 2: |1-2|=1, |2-2|=0 (filtered), |3-2|=1, |11-2|=9;
        // candidates 0, 2, 10 -> distances 1, 1, 9; x=2 ties the true head
        // and ranks it last -> rank 2.
        let metrics = filtered_rank_metrics(&e, &r, &model, &test, &total).unwrap();
        assert!((metrics.mrr - 0.5).abs() < 1e-12);
        assert_eq!(metrics.hits1, 0.0);
        assert_eq!(metrics.hits3, 1.0);
        assert_eq!(metrics.hits10, 1.0);
    }

    #[test]
    fn rank_metrics_bounds_on_random_instance() {
        let e = EmbeddingMatrix::synthetic(40, 6, SyntheticDistribution::Uniform, 5).unwrap();
        let r = EmbeddingMatrix::synthetic(3, 6, SyntheticDistribution::Uniform, 6).unwrap();
        let model = MetricModel::transe(Norm::L2);
        let test = TripleList::new(vec![
            Triple { head: 0, rel: 0, tail: 5 },
            Triple { head: 3, rel: 1, tail: 7 },
            Triple { head: 9, rel: 2, tail: 0 },
        ]);
        let metrics = filtered_rank_metrics(&e, &r, &model, &test, &test).unwrap();
        assert!(metrics.mrr > 0.0 && metrics.mrr <= 1.0);
        assert!(metrics.hits1 <= metrics.hits3);
        assert!(metrics.hits3 <= metrics.hits10);
        assert!(metrics.hits10 <= 1.0);
    }

    #[test]
    fn rank_metrics_validates_ids() {
        let (e, r) = line_instance();
        let model = MetricModel::transe(Norm::L2);
        let test = TripleList::new(vec![Triple { head: 0, rel: 0, tail: 99 }]);
        assert!(matches!(
            filtered_rank_metrics(&e, &r, &model, &test, &test),
            Err(Error::Data(_))
        ));
    }
}
