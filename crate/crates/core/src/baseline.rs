//! Reference algorithms: the straightforward all-pairs sweep and Quickjoin.
//! Both serve as correctness oracles and as performance comparison points
//! for the pivot-filtered engine.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::join::{JoinOutcome, JoinStats, ResultTriple};
use crate::matrix::EmbeddingMatrix;
use crate::metric::{kernel_block, KernelSide, MetricModel, Norm, KERNEL_CELL_BUDGET};

/// Quickjoin tuning knobs; benchmark records report the values used.
#[derive(Debug, Clone, Copy)]
pub struct QuickjoinParams {
    /// Below this combined element count the recursion switches to
    /// NestedLoop.
    pub small_threshold: usize,
    /// Seed for pivot-pair selection.
    pub rng_seed: u64,
    /// Recursion guard; at this depth NestedLoop finishes the subproblem.
    pub max_depth: usize,
}

impl Default for QuickjoinParams {
    fn default() -> Self {
        QuickjoinParams {
            small_threshold: 64,
            rng_seed: 0,
            max_depth: 64,
        }
    }
}

impl QuickjoinParams {
    fn validate(&self) -> Result<()> {
        if self.small_threshold < 2 {
            return Err(Error::Parameter("small_threshold must be >= 2".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Parameter("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// A qualifying pair from the binary join, with its distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMatch {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

const NAIVE_BLOCK_ROWS: usize = 2048;

/// The straightforward algorithm: evaluates all |E| * |R| * |E| triples via
/// batched kernel calls over row blocks and keeps those with distance
/// <= eps. This is the ground-truth oracle for the engine.
pub fn naive_join(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    eps: f64,
) -> Result<JoinOutcome> {
    naive_join_with_budget(e, r, model, eps, KERNEL_CELL_BUDGET)
}

/// Budget-parameterized variant; blocks halve on kernel budget errors.
pub(crate) fn naive_join_with_budget(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    eps: f64,
    budget: usize,
) -> Result<JoinOutcome> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    if r.rows() > 0 && e.dim() != r.dim() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            r.dim()
        )));
    }
    let start = Instant::now();
    let shared_b = if r.rows() > 0 && !model.tail_depends_on_relation() {
        Some(KernelSide::from_matrix(&model.apply_tail(e, r.row(0))?))
    } else {
        None
    };
    let preprocess = start.elapsed();

    let per_relation: Result<Vec<Vec<ResultTriple>>> = (0..r.rows())
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
            sweep_relation(&wa, wb, model.norm(), eps, rel_id, budget)
        })
        .collect();
    let per_relation = per_relation?;

    let m = e.rows() as u64;
    let mut triples = Vec::new();
    for rel in per_relation {
        triples.extend(rel);
    }
    let stats = JoinStats {
        relations: r.rows(),
        candidate_pairs: m * m * r.rows() as u64,
        kernel_cells: m * m * r.rows() as u64,
        emitted: triples.len() as u64,
        preprocess,
        total: start.elapsed(),
    };
    Ok(JoinOutcome { triples, stats })
}

fn sweep_relation(
    wa: &KernelSide,
    wb: &KernelSide,
    norm: Norm,
    eps: f64,
    rel_id: usize,
    budget: usize,
) -> Result<Vec<ResultTriple>> {
    let m = wa.rows();
    let n = wb.rows();
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    let mut block = m.clamp(1, NAIVE_BLOCK_ROWS);
    let mut scratch = Vec::new();
    let mut lo = 0usize;
    while lo < m {
        let rows = block.min(m - lo);
        match kernel_block(wa, lo..lo + rows, wb, 0..n, norm, budget, &mut scratch) {
            Ok(()) => {
                for (di, row) in scratch.chunks_exact(n).enumerate() {
                    let head = lo + di;
                    for (tail, &d) in row.iter().enumerate() {
                        if d <= eps {
                            out.push(ResultTriple {
                                head,
                                rel: rel_id,
                                tail,
                                distance: d,
                            });
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
    Ok(out)
}

/// Binary epsilon join of two vector sets in a metric space, after the
/// quicksort-style recursion: pick two pivots, split both sets by the ball
/// dist(p1, .) <= r with r = dist(p1, p2), recurse on the inside and
/// outside pairs plus the two epsilon-boundary window pairs, and fall back
/// to NestedLoop on small inputs, at the depth guard, or when partitioning
/// stops making progress (duplicate-heavy data).
pub fn quickjoin(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    model: &MetricModel,
    eps: f64,
    params: &QuickjoinParams,
) -> Result<Vec<PairMatch>> {
    quickjoin_counted(a, b, model, eps, params).map(|(pairs, _)| pairs)
}

/// Like [`quickjoin`] but also returns the number of distance evaluations.
fn quickjoin_counted(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    model: &MetricModel,
    eps: f64,
    params: &QuickjoinParams,
) -> Result<(Vec<PairMatch>, u64)> {
    params.validate()?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    if a.rows() > 0 && b.rows() > 0 && a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "join sides have dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let evals = AtomicU64::new(0);
    let ctx = QjCtx {
        a,
        b,
        norm: model.norm(),
        eps,
        small: params.small_threshold,
        max_depth: params.max_depth,
        evals: &evals,
    };
    let a_ids: Vec<usize> = (0..a.rows()).collect();
    let b_ids: Vec<usize> = (0..b.rows()).collect();
    let pairs = qj_recurse(&ctx, a_ids, b_ids, 0, params.rng_seed);
    Ok((pairs, evals.load(Ordering::Relaxed)))
}

/// Quickjoin applied per relation: A = head-connected entities, B =
/// tail-connected entities; pairs become (head, rel, tail) triples, sorted
/// by (head, tail) within each relation.
pub fn quickjoin_complete(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    eps: f64,
    params: &QuickjoinParams,
) -> Result<JoinOutcome> {
    if r.rows() > 0 && e.dim() != r.dim() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            r.dim()
        )));
    }
    params.validate()?;
    let start = Instant::now();
    let evals = AtomicU64::new(0);
    let per_relation: Result<Vec<Vec<ResultTriple>>> = (0..r.rows())
        .into_par_iter()
        .map(|rel_id| {
            let a_matrix = model.apply_head(e, r.row(rel_id))?;
            let b_matrix;
            let b_ref = if model.tail_depends_on_relation() {
                b_matrix = model.apply_tail(e, r.row(rel_id))?;
                &b_matrix
            } else {
                e
            };
            let rel_params = QuickjoinParams {
                rng_seed: params.rng_seed.wrapping_add(rel_id as u64),
                ..*params
            };
            let (mut pairs, rel_evals) =
                quickjoin_counted(&a_matrix, b_ref, model, eps, &rel_params)?;
            evals.fetch_add(rel_evals, Ordering::Relaxed);
            pairs.sort_unstable_by_key(|x| (x.a, x.b));
            Ok(pairs
                .into_iter()
                .map(|p| ResultTriple {
                    head: p.a,
                    rel: rel_id,
                    tail: p.b,
                    distance: p.distance,
                })
                .collect())
        })
        .collect();
    let per_relation = per_relation?;
    let mut triples = Vec::new();
    for rel in per_relation {
        triples.extend(rel);
    }
    let stats = JoinStats {
        relations: r.rows(),
        candidate_pairs: evals.load(Ordering::Relaxed),
        kernel_cells: 0,
        emitted: triples.len() as u64,
        preprocess: std::time::Duration::ZERO,
        total: start.elapsed(),
    };
    Ok(JoinOutcome { triples, stats })
}

struct QjCtx<'a> {
    a: &'a EmbeddingMatrix,
    b: &'a EmbeddingMatrix,
    norm: Norm,
    eps: f64,
    small: usize,
    max_depth: usize,
    evals: &'a AtomicU64,
}

/// Reference distance for the baseline path: 64-bit accumulation in four
/// lanes over the raw f32 rows. Written separately from the batch kernel so
/// it can arbitrate kernel bugs.
fn ref_distance(a: &[f32], b: &[f32], norm: Norm) -> f64 {
    const L: usize = 4;
    let mut acc = [0.0f64; L];
    let ca = a.chunks_exact(L);
    let cb = b.chunks_exact(L);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    match norm {
        Norm::L1 => {
            for (xa, xb) in ca.zip(cb) {
                for l in 0..L {
                    acc[l] += (xa[l] as f64 - xb[l] as f64).abs();
                }
            }
            let mut rem = 0.0;
            for (x, y) in ra.iter().zip(rb) {
                rem += (*x as f64 - *y as f64).abs();
            }
            (acc[0] + acc[1]) + (acc[2] + acc[3]) + rem
        }
        Norm::L2 => {
            for (xa, xb) in ca.zip(cb) {
                for l in 0..L {
                    let d = xa[l] as f64 - xb[l] as f64;
                    acc[l] += d * d;
                }
            }
            let mut rem = 0.0;
            for (x, y) in ra.iter().zip(rb) {
                let d = *x as f64 - *y as f64;
                rem += d * d;
            }
            ((acc[0] + acc[1]) + (acc[2] + acc[3]) + rem).sqrt()
        }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn qj_recurse(
    ctx: &QjCtx<'_>,
    a_ids: Vec<usize>,
    b_ids: Vec<usize>,
    depth: usize,
    seed: u64,
) -> Vec<PairMatch> {
    if a_ids.is_empty() || b_ids.is_empty() {
        return Vec::new();
    }
    if a_ids.len() + b_ids.len() <= ctx.small || depth >= ctx.max_depth {
        return nested_loop(ctx, &a_ids, &b_ids);
    }

    // Seeded pivot pair; rows must differ, else the data is duplicate-heavy
    // and NestedLoop finishes the subproblem.
    let total = a_ids.len() + b_ids.len();
    let row_of = |k: usize| -> &[f32] {
        if k < a_ids.len() {
            ctx.a.row(a_ids[k])
        } else {
            ctx.b.row(b_ids[k - a_ids.len()])
        }
    };
    let mut state = seed;
    let mut pivots = None;
    for _ in 0..16 {
        let i = (splitmix(&mut state) % total as u64) as usize;
        let j = (splitmix(&mut state) % total as u64) as usize;
        if row_of(i) != row_of(j) {
            pivots = Some((row_of(i).to_vec(), row_of(j).to_vec()));
            break;
        }
    }
    let Some((p1, p2)) = pivots else {
        return nested_loop(ctx, &a_ids, &b_ids);
    };
    let radius = ref_distance(&p1, &p2, ctx.norm);

    let split = |ids: &[usize], m: &EmbeddingMatrix| {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        let mut in_window = Vec::new();
        let mut out_window = Vec::new();
        for &id in ids {
            let d = ref_distance(&p1, m.row(id), ctx.norm);
            if d <= radius {
                inside.push(id);
                if d >= radius - ctx.eps {
                    in_window.push(id);
                }
            } else {
                outside.push(id);
                if d <= radius + ctx.eps {
                    out_window.push(id);
                }
            }
        }
        (inside, outside, in_window, out_window)
    };
    ctx.evals.fetch_add(total as u64, Ordering::Relaxed);
    let (a_in, a_out, a_in_w, a_out_w) = split(&a_ids, ctx.a);
    let (b_in, b_out, b_in_w, b_out_w) = split(&b_ids, ctx.b);

    // A window pair identical to the parent would never shrink.
    if (a_in_w.len() == a_ids.len() && b_out_w.len() == b_ids.len())
        || (a_out_w.len() == a_ids.len() && b_in_w.len() == b_ids.len())
    {
        return nested_loop(ctx, &a_ids, &b_ids);
    }

    let s1 = splitmix(&mut state);
    let s2 = splitmix(&mut state);
    let s3 = splitmix(&mut state);
    let s4 = splitmix(&mut state);
    let ((mut r_in, r_out), (r_w1, r_w2)) = rayon::join(
        || {
            rayon::join(
                || qj_recurse(ctx, a_in, b_in, depth + 1, s1),
                || qj_recurse(ctx, a_out, b_out, depth + 1, s2),
            )
        },
        || {
            rayon::join(
                || qj_recurse(ctx, a_in_w, b_out_w, depth + 1, s3),
                || qj_recurse(ctx, a_out_w, b_in_w, depth + 1, s4),
            )
        },
    );
    r_in.extend(r_out);
    r_in.extend(r_w1);
    r_in.extend(r_w2);
    r_in
}

/// Straightforward pair scan, looping over the smaller side and streaming
/// the larger one.
fn nested_loop(ctx: &QjCtx<'_>, a_ids: &[usize], b_ids: &[usize]) -> Vec<PairMatch> {
    ctx.evals
        .fetch_add(a_ids.len() as u64 * b_ids.len() as u64, Ordering::Relaxed);
    let mut out = Vec::new();
    if a_ids.len() <= b_ids.len() {
        for &ai in a_ids {
            let row = ctx.a.row(ai);
            for &bj in b_ids {
                let d = ref_distance(row, ctx.b.row(bj), ctx.norm);
                if d <= ctx.eps {
                    out.push(PairMatch { a: ai, b: bj, distance: d });
                }
            }
        }
    } else {
        for &bj in b_ids {
            let row = ctx.b.row(bj);
            for &ai in a_ids {
                let d = ref_distance(ctx.a.row(ai), row, ctx.norm);
                if d <= ctx.eps {
                    out.push(PairMatch { a: ai, b: bj, distance: d });
                }
            }
        }
    }
    out
}
