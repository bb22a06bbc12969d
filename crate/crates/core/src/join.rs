//! The fast completion engine: per-relation transformation to a pair join,
//! pivot-range filtering, grouped batch verification, and a partitioned
//! variant that caps the rows any single batch touches.
//!
//! Per relation, the head connector turns the entity matrix into the A side
//! and the tail connector into the B side. Both sides are sorted by pivot
//! distance, candidate ranges come from [`crate::pivot::compute_ranges`],
//! and consecutive rows are merged into rectangular groups whose cell count
//! stays under a budget so each batch feeds the kernel enough parallel work.
//! When the tail connector ignores the relation (TransE), the B-side
//! artifacts are computed once per run and shared across relations.
//!
//! Output order is deterministic: ascending relation id, then ascending
//! (sorted-A row, sorted-B row) within a relation.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, TripleList};
use crate::metric::{kernel_block, MetricModel, Pivot, KERNEL_CELL_BUDGET};
use crate::pivot::{compute_ranges, pivot_distances, sort_side, RangeTable, SortedSide};

/// Default candidate-cell budget per batch.
pub const DEFAULT_MAX_GROUP_SIZE: usize = 300_000;

pub const DEFAULT_PARTITION_ROWS: usize = 4096;

/// Pivot selection for the range filter. Zero is the default; the mean of
/// the B side is a cheap experiment knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotChoice {
    #[default]
    Zero,
    MeanB,
}

/// Join parameters shared by the engine entry points.
#[derive(Debug, Clone)]
pub struct JoinConfig {
    /// Distance threshold; pairs with dist <= eps are emitted (inclusive).
    pub eps: f64,
    /// Candidate-cell budget per batch; a single row whose range exceeds it
    /// is processed alone in slices.
    pub max_group_size: usize,
    /// Rows per block for [`complete_all_partitioned`].
    pub partition_rows: usize,
    /// Drop triples with head == tail.
    pub exclude_self: bool,
    /// Drop triples present in this list.
    pub exclude_known: Option<TripleList>,
    pub pivot: PivotChoice,
}

impl JoinConfig {
    pub fn new(eps: f64) -> Self {
        JoinConfig {
            eps,
            max_group_size: DEFAULT_MAX_GROUP_SIZE,
            partition_rows: DEFAULT_PARTITION_ROWS,
            exclude_self: false,
            exclude_known: None,
            pivot: PivotChoice::Zero,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::Parameter(format!("eps must be >= 0, got {}", self.eps)));
        }
        if self.max_group_size == 0 {
            return Err(Error::Parameter("max_group_size must be >= 1".into()));
        }
        if self.partition_rows == 0 {
            return Err(Error::Parameter("partition_rows must be >= 1".into()));
        }
        Ok(())
    }
}

/// One emitted triple; indices refer to the original (unsorted) matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultTriple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
    pub distance: f64,
}

/// A rectangular batch: consecutive sorted-A rows against the union of
/// their candidate ranges in sorted B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateGroup {
    pub a_start: usize,
    pub a_count: usize,
    pub range_min: usize,
    pub range_max: usize,
}

impl CandidateGroup {
    pub fn cells(&self) -> u64 {
        (self.range_max - self.range_min + 1) as u64 * self.a_count as u64
    }
}

/// Counters reported alongside the triples.
#[derive(Debug, Clone, Default)]
pub struct JoinStats {
    pub relations: usize,
    /// Sum over rows of the candidate-range widths (the pairs the filter
    /// could not rule out). For the exhaustive baseline this is m * n * |R|.
    pub candidate_pairs: u64,
    /// Cells actually evaluated by the batch kernel (>= candidate_pairs for
    /// grouped evaluation because rectangles pad the ranges).
    pub kernel_cells: u64,
    pub emitted: u64,
    /// One-time B-side preparation, reused across relations when the tail
    /// connector ignores the relation.
    pub preprocess: Duration,
    pub total: Duration,
}

pub struct JoinOutcome {
    pub triples: Vec<ResultTriple>,
    pub stats: JoinStats,
}

/// Post-verification exclusion filters (off by default).
#[derive(Debug, Default, Clone)]
pub struct Exclusions {
    exclude_self: bool,
    known: Option<HashSet<(usize, usize, usize)>>,
}

impl Exclusions {
    pub fn from_config(cfg: &JoinConfig) -> Self {
        Exclusions {
            exclude_self: cfg.exclude_self,
            known: cfg.exclude_known.as_ref().map(|list| {
                list.triples.iter().map(|t| (t.head, t.rel, t.tail)).collect()
            }),
        }
    }

    pub fn new(exclude_self: bool, known: Option<&TripleList>) -> Self {
        Exclusions {
            exclude_self,
            known: known.map(|list| {
                list.triples.iter().map(|t| (t.head, t.rel, t.tail)).collect()
            }),
        }
    }

    pub fn allows(&self, head: usize, rel: usize, tail: usize) -> bool {
        if self.exclude_self && head == tail {
            return false;
        }
        match &self.known {
            Some(set) => !set.contains(&(head, rel, tail)),
            None => true,
        }
    }

    pub fn is_noop(&self) -> bool {
        !self.exclude_self && self.known.is_none()
    }
}

/// Applies the exclusion filters to an already-materialized triple list.
pub fn apply_exclusions(
    triples: Vec<ResultTriple>,
    exclude_self: bool,
    known: Option<&TripleList>,
) -> Vec<ResultTriple> {
    let excl = Exclusions::new(exclude_self, known);
    if excl.is_noop() {
        return triples;
    }
    triples
        .into_iter()
        .filter(|t| excl.allows(t.head, t.rel, t.tail))
        .collect()
}

/// Merges consecutive non-empty rows into groups whose rectangle
/// (range_max - range_min + 1) x row-count stays within `max_group_size`.
/// Because range endpoints are monotone, range_min is the first row's start
/// and range_max the last row's end. A single row over budget becomes its
/// own group and is sliced at evaluation time.
pub fn group_candidates(ranges: &RangeTable, max_group_size: usize) -> Vec<CandidateGroup> {
    let max_group_size = max_group_size.max(1);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < ranges.len() {
        let Some((s0, e0)) = ranges.get(i) else {
            i += 1;
            continue;
        };
        let a_start = i;
        let range_min = s0;
        let mut range_max = e0;
        let mut count = 1usize;
        loop {
            let next = a_start + count;
            if next >= ranges.len() {
                break;
            }
            let Some((_, e_next)) = ranges.get(next) else {
                break;
            };
            let new_max = range_max.max(e_next);
            if (new_max - range_min + 1).saturating_mul(count + 1) > max_group_size {
                break;
            }
            range_max = new_max;
            count += 1;
        }
        groups.push(CandidateGroup {
            a_start,
            a_count: count,
            range_min,
            range_max,
        });
        i = a_start + count;
    }
    groups
}

/// Evaluates one group: batch distances over the rectangle, then keeps
/// (i, j) only if j lies in row i's candidate range and the distance passes
/// eps, mapping sorted indices back to original ids.
pub fn evaluate_group(
    group: &CandidateGroup,
    a: &SortedSide,
    b: &SortedSide,
    ranges: &RangeTable,
    rel_id: usize,
    model: &MetricModel,
    cfg: &JoinConfig,
) -> Result<Vec<ResultTriple>> {
    cfg.validate()?;
    let excl = Exclusions::from_config(cfg);
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    let mut cells = 0u64;
    eval_group_into(
        group,
        a,
        b,
        ranges,
        0,
        rel_id,
        model,
        cfg.eps,
        cfg.max_group_size,
        &excl,
        &mut scratch,
        &mut out,
        &mut cells,
    )?;
    Ok(out)
}

/// `ranges` is indexed by group-local row position offset by `a_start`;
/// the sorted-A row of local row `li` is `a_row_base + group.a_start + li`.
/// The base differs from zero only in partitioned mode, where `ranges` is a
/// clamped sub-table for one A block.
#[allow(clippy::too_many_arguments)]
fn eval_group_into(
    group: &CandidateGroup,
    a: &SortedSide,
    b: &SortedSide,
    ranges: &RangeTable,
    a_row_base: usize,
    rel_id: usize,
    model: &MetricModel,
    eps: f64,
    max_group_size: usize,
    excl: &Exclusions,
    scratch: &mut Vec<f64>,
    out: &mut Vec<ResultTriple>,
    kernel_cells: &mut u64,
) -> Result<()> {
    let width = group.range_max - group.range_min + 1;
    let budget = max_group_size.clamp(1, KERNEL_CELL_BUDGET);
    // An over-budget single row is sliced along the B range.
    let col_slice = if group.a_count == 1 && width > budget {
        budget
    } else {
        width
    };
    let a_lo = a_row_base + group.a_start;
    let mut b_lo = group.range_min;
    while b_lo <= group.range_max {
        let b_hi = (b_lo + col_slice - 1).min(group.range_max);
        let ncols = b_hi - b_lo + 1;
        kernel_block(
            a.wide(),
            a_lo..a_lo + group.a_count,
            b.wide(),
            b_lo..b_hi + 1,
            model.norm(),
            KERNEL_CELL_BUDGET,
            scratch,
        )?;
        *kernel_cells += (group.a_count * ncols) as u64;
        for li in 0..group.a_count {
            let Some((s, e)) = ranges.get(group.a_start + li) else {
                continue;
            };
            let js = s.max(b_lo);
            let je = e.min(b_hi);
            if js > je {
                continue;
            }
            let head = a.perm()[a_lo + li];
            let row = &scratch[li * ncols..(li + 1) * ncols];
            for j in js..=je {
                let d = row[j - b_lo];
                if d <= eps {
                    let tail = b.perm()[j];
                    if excl.allows(head, rel_id, tail) {
                        out.push(ResultTriple {
                            head,
                            rel: rel_id,
                            tail,
                            distance: d,
                        });
                    }
                }
            }
        }
        b_lo = b_hi + 1;
    }
    Ok(())
}

/// B-side artifacts: the sorted side plus the pivot both sides share.
struct PreparedB {
    side: SortedSide,
    pivot: Pivot,
}

fn prepare_b(
    b_matrix: EmbeddingMatrix,
    choice: PivotChoice,
    model: &MetricModel,
) -> Result<PreparedB> {
    let pivot = match choice {
        PivotChoice::Zero => Pivot::zero(b_matrix.dim()),
        PivotChoice::MeanB => Pivot::mean_of(&b_matrix),
    };
    let dist_b = pivot_distances(&b_matrix, &pivot, model)?;
    let side = sort_side(&b_matrix, &dist_b)?;
    Ok(PreparedB { side, pivot })
}

struct RelationOutcome {
    triples: Vec<ResultTriple>,
    candidates: u64,
    kernel_cells: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_relation(
    e: &EmbeddingMatrix,
    rel: &[f32],
    rel_id: usize,
    model: &MetricModel,
    cfg: &JoinConfig,
    b: &PreparedB,
    excl: &Exclusions,
    partition: Option<usize>,
) -> Result<RelationOutcome> {
    let a_matrix = model.apply_head(e, rel)?;
    let dist_a = pivot_distances(&a_matrix, &b.pivot, model)?;
    let a = sort_side(&a_matrix, &dist_a)?;
    let ranges = compute_ranges(a.pivot_dist(), b.side.pivot_dist(), cfg.eps)?;
    let candidates = ranges.candidate_count();

    let mut triples = Vec::new();
    let mut scratch = Vec::new();
    let mut kernel_cells = 0u64;
    match partition {
        None => {
            for group in group_candidates(&ranges, cfg.max_group_size) {
                eval_group_into(
                    &group,
                    &a,
                    &b.side,
                    &ranges,
                    0,
                    rel_id,
                    model,
                    cfg.eps,
                    cfg.max_group_size,
                    excl,
                    &mut scratch,
                    &mut triples,
                    &mut kernel_cells,
                )?;
            }
        }
        Some(p) => {
            let m = a.len();
            let n = b.side.len();
            let mut a_lo = 0;
            while a_lo < m {
                let a_hi = (a_lo + p).min(m);
                // Combined candidate window of this A block; only B blocks
                // intersecting it can survive clamping.
                let mut window: Option<(usize, usize)> = None;
                for i in a_lo..a_hi {
                    if let Some((s, e)) = ranges.get(i) {
                        window = Some(match window {
                            None => (s, e),
                            Some((lo, hi)) => (lo.min(s), hi.max(e)),
                        });
                    }
                }
                if let Some((w_lo, w_hi)) = window {
                    for block in w_lo / p..=w_hi / p {
                        let b_lo = block * p;
                        if b_lo >= n {
                            break;
                        }
                        let b_hi = (b_lo + p).min(n) - 1;
                        let clamped = ranges.clamp(a_lo..a_hi, b_lo, b_hi);
                        for group in group_candidates(&clamped, cfg.max_group_size) {
                            eval_group_into(
                                &group,
                                &a,
                                &b.side,
                                &clamped,
                                a_lo,
                                rel_id,
                                model,
                                cfg.eps,
                                cfg.max_group_size,
                                excl,
                                &mut scratch,
                                &mut triples,
                                &mut kernel_cells,
                            )?;
                        }
                    }
                }
                a_lo = a_hi;
            }
        }
    }
    Ok(RelationOutcome {
        triples,
        candidates,
        kernel_cells,
    })
}

fn check_model_dims(e: &EmbeddingMatrix, r: &EmbeddingMatrix) -> Result<()> {
    if r.rows() > 0 && e.dim() != r.dim() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            r.dim()
        )));
    }
    Ok(())
}

fn complete_with(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    cfg: &JoinConfig,
    partition: Option<usize>,
) -> Result<JoinOutcome> {
    cfg.validate()?;
    check_model_dims(e, r)?;
    if let (Some(known), true) = (&cfg.exclude_known, r.rows() > 0) {
        known.validate(e.rows(), r.rows())?;
    }
    let start = Instant::now();
    let excl = Exclusions::from_config(cfg);

    // One-time B-side preparation when the tail connector ignores r.
    let shared_b = if r.rows() > 0 && !model.tail_depends_on_relation() {
        Some(prepare_b(model.apply_tail(e, r.row(0))?, cfg.pivot, model)?)
    } else {
        None
    };
    let preprocess = start.elapsed();

    let per_relation: Result<Vec<RelationOutcome>> = (0..r.rows())
        .into_par_iter()
        .map(|rel_id| {
            let local_b;
            let b = match &shared_b {
                Some(prepared) => prepared,
                None => {
                    local_b = prepare_b(
                        model.apply_tail(e, r.row(rel_id))?,
                        cfg.pivot,
                        model,
                    )?;
                    &local_b
                }
            };
            run_relation(e, r.row(rel_id), rel_id, model, cfg, b, &excl, partition)
        })
        .collect();
    let per_relation = per_relation?;

    let mut stats = JoinStats {
        relations: r.rows(),
        preprocess,
        ..JoinStats::default()
    };
    let mut triples = Vec::new();
    for rel in per_relation {
        stats.candidate_pairs += rel.candidates;
        stats.kernel_cells += rel.kernel_cells;
        triples.extend(rel.triples);
    }
    stats.emitted = triples.len() as u64;
    stats.total = start.elapsed();
    Ok(JoinOutcome { triples, stats })
}

/// Emits every triple of one relation whose ternary distance passes eps.
pub fn complete_relation(
    e: &EmbeddingMatrix,
    rel: &[f32],
    rel_id: usize,
    model: &MetricModel,
    cfg: &JoinConfig,
) -> Result<Vec<ResultTriple>> {
    cfg.validate()?;
    if e.rows() > 0 && e.dim() != rel.len() {
        return Err(Error::Dimension(format!(
            "entity dim {} vs relation dim {}",
            e.dim(),
            rel.len()
        )));
    }
    let excl = Exclusions::from_config(cfg);
    let b = prepare_b(model.apply_tail(e, rel)?, cfg.pivot, model)?;
    run_relation(e, rel, rel_id, model, cfg, &b, &excl, None).map(|o| o.triples)
}

/// The fast completion algorithm over every relation.
///
/// ```
/// use kgcjoin_core::join::{complete_all, JoinConfig};
/// use kgcjoin_core::{EmbeddingMatrix, MetricModel, Norm};
///
/// let entities = EmbeddingMatrix::new(2, 2, vec![0.0, 0.0, 1.0, 1.0])?;
/// let relations = EmbeddingMatrix::new(1, 2, vec![1.0, 1.0])?;
/// let model = MetricModel::transe(Norm::L2);
/// let out = complete_all(&entities, &relations, &model, &JoinConfig::new(0.1))?;
/// // Entity 0 translated by the relation lands exactly on entity 1.
/// assert_eq!(out.triples.len(), 1);
/// assert_eq!((out.triples[0].head, out.triples[0].tail), (0, 1));
/// # Ok::<(), kgcjoin_core::Error>(())
/// ```
pub fn complete_all(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    cfg: &JoinConfig,
) -> Result<JoinOutcome> {
    complete_with(e, r, model, cfg, None)
}

/// Partition-based variant: both sorted sides split into consecutive blocks
/// of `cfg.partition_rows` rows, candidate ranges clamped to each B block.
/// The union over block pairs equals [`complete_all`]'s output as a set.
pub fn complete_all_partitioned(
    e: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    model: &MetricModel,
    cfg: &JoinConfig,
) -> Result<JoinOutcome> {
    complete_with(e, r, model, cfg, Some(cfg.partition_rows))
}
