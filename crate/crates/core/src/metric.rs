//! The metric-space realization of a triple score function: two connector
//! maps that fold the relation into each side, an Lp metric, and a blocked
//! batch kernel for matrix-vs-matrix distance evaluation.
//!
//! For TransE the score is -||h + r - t||_Lp, so the head connector is
//! h + r, the tail connector returns t unchanged, and the ternary distance
//! decomposes as dist(combine_head(h, r), combine_tail(t, r)). The scalar
//! [`MetricModel::distance`] is the canonical path: it accumulates in 64-bit
//! sequentially and every oracle comparison is anchored to it. The batch
//! kernel may reorder reductions (it uses lane-parallel 64-bit accumulators)
//! and is contracted to agree with the canonical path within 1e-5 relative.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Norm order of the Lp metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn order(self) -> u8 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }

    pub fn from_order(p: u8) -> Result<Self> {
        match p {
            1 => Ok(Norm::L1),
            2 => Ok(Norm::L2),
            other => Err(Error::Parameter(format!("norm order must be 1 or 2, got {other}"))),
        }
    }
}

/// Supported embedding models. Only TransE is implemented; the enum is the
/// dispatch seam for relation-specific-connector models like SE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TransE,
}

/// A score function transformable to a metric space: the connector pair
/// plus the Lp metric it decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricModel {
    kind: ModelKind,
    norm: Norm,
}

impl MetricModel {
    pub fn transe(norm: Norm) -> Self {
        MetricModel {
            kind: ModelKind::TransE,
            norm,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Whether the tail connector reads the relation vector. When false the
    /// join's B side (and everything derived from it) can be computed once
    /// and reused across relations.
    pub fn tail_depends_on_relation(&self) -> bool {
        match self.kind {
            ModelKind::TransE => false,
        }
    }

    /// Head connector. TransE: element-wise h + r.
    pub fn combine_head(&self, h: &[f32], r: &[f32]) -> Result<Vec<f32>> {
        check_len(h, r)?;
        match self.kind {
            ModelKind::TransE => Ok(h.iter().zip(r).map(|(a, b)| a + b).collect()),
        }
    }

    /// Tail connector. TransE: t unchanged.
    pub fn combine_tail(&self, t: &[f32], r: &[f32]) -> Result<Vec<f32>> {
        check_len(t, r)?;
        match self.kind {
            ModelKind::TransE => Ok(t.to_vec()),
        }
    }

    /// Head connector applied row-wise over a matrix. Labels are dropped;
    /// downstream output maps back to original indices.
    pub fn apply_head(&self, e: &EmbeddingMatrix, r: &[f32]) -> Result<EmbeddingMatrix> {
        if e.dim() != r.len() {
            return Err(Error::Dimension(format!(
                "matrix dim {} vs relation dim {}",
                e.dim(),
                r.len()
            )));
        }
        match self.kind {
            ModelKind::TransE => {
                let dim = e.dim();
                let mut data = Vec::with_capacity(e.rows() * dim);
                for i in 0..e.rows() {
                    let row = e.row(i);
                    for j in 0..dim {
                        data.push(row[j] + r[j]);
                    }
                }
                EmbeddingMatrix::new(e.rows(), dim, data)
            }
        }
    }

    /// Tail connector applied row-wise over a matrix.
    pub fn apply_tail(&self, e: &EmbeddingMatrix, r: &[f32]) -> Result<EmbeddingMatrix> {
        if e.dim() != r.len() {
            return Err(Error::Dimension(format!(
                "matrix dim {} vs relation dim {}",
                e.dim(),
                r.len()
            )));
        }
        match self.kind {
            ModelKind::TransE => EmbeddingMatrix::new(e.rows(), e.dim(), e.data().to_vec()),
        }
    }

    /// Canonical Lp distance: 64-bit sequential accumulation.
    pub fn distance(&self, a: &[f32], b: &[f32]) -> Result<f64> {
        check_len(a, b)?;
        Ok(lp_distance(a, b, self.norm))
    }

    /// Ternary distance, evaluated through the connector decomposition so
    /// it shares the canonical code path bit for bit.
    ///
    /// ```
    /// use kgcjoin_core::{MetricModel, Norm};
    ///
    /// let model = MetricModel::transe(Norm::L2);
    /// // An exact translation h + r = t scores zero.
    /// let d = model.triple_distance(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]).unwrap();
    /// assert_eq!(d, 0.0);
    /// ```
    pub fn triple_distance(&self, h: &[f32], r: &[f32], t: &[f32]) -> Result<f64> {
        let a = self.combine_head(h, r)?;
        let b = self.combine_tail(t, r)?;
        self.distance(&a, &b)
    }

    /// Full m x n distance block. Fails with [`Error::KernelBudget`] when
    /// m x n exceeds the kernel buffer budget; callers partition in that
    /// case.
    pub fn batch_distance(
        &self,
        a: &EmbeddingMatrix,
        b: &EmbeddingMatrix,
    ) -> Result<DistanceBlock> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "batch sides have dims {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        let wa = KernelSide::from_matrix(a);
        let wb = KernelSide::from_matrix(b);
        let mut values = Vec::new();
        kernel_block(
            &wa,
            0..a.rows(),
            &wb,
            0..b.rows(),
            self.norm,
            KERNEL_CELL_BUDGET,
            &mut values,
        )?;
        Ok(DistanceBlock {
            rows: a.rows(),
            cols: b.rows(),
            values,
        })
    }
}

fn check_len(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vector lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Canonical scalar Lp distance over the raw slices.
pub fn lp_distance(a: &[f32], b: &[f32], norm: Norm) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    match norm {
        Norm::L1 => {
            for (x, y) in a.iter().zip(b) {
                acc += (*x as f64 - *y as f64).abs();
            }
            acc
        }
        Norm::L2 => {
            for (x, y) in a.iter().zip(b) {
                let d = *x as f64 - *y as f64;
                acc += d * d;
            }
            acc.sqrt()
        }
    }
}

/// Pivot kinds the engine knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotKind {
    Zero,
    MeanOfB,
    Custom,
}

/// A fixed reference vector; distances to it drive the range filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Pivot {
    vector: Vec<f32>,
    kind: PivotKind,
}

impl Pivot {
    /// The zero vector, the default choice.
    pub fn zero(dim: usize) -> Self {
        Pivot {
            vector: vec![0.0; dim],
            kind: PivotKind::Zero,
        }
    }

    /// Column mean of the given matrix.
    pub fn mean_of(b: &EmbeddingMatrix) -> Self {
        let dim = b.dim();
        let mut sums = vec![0.0f64; dim];
        for i in 0..b.rows() {
            for (s, v) in sums.iter_mut().zip(b.row(i)) {
                *s += *v as f64;
            }
        }
        let n = b.rows().max(1) as f64;
        Pivot {
            vector: sums.iter().map(|s| (s / n) as f32).collect(),
            kind: PivotKind::MeanOfB,
        }
    }

    pub fn custom(vector: Vec<f32>) -> Self {
        Pivot {
            vector,
            kind: PivotKind::Custom,
        }
    }

    pub fn vector(&self) -> &[f32] {
        &self.vector
    }

    pub fn kind(&self) -> PivotKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// A dense m x n block of distances from the batch kernel.
#[derive(Debug, Clone)]
pub struct DistanceBlock {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceBlock {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cell budget for one kernel invocation (64 Mi cells = 512 MiB of f64).
pub const KERNEL_CELL_BUDGET: usize = 1 << 26;

const LANES: usize = 8;

/// One side of a batch evaluation, widened to f64 once so the inner loops
/// run without per-element conversion. f32 -> f64 widening is lossless.
#[derive(Debug, Clone)]
pub(crate) struct KernelSide {
    data: Vec<f64>,
    dim: usize,
    rows: usize,
}

impl KernelSide {
    pub(crate) fn from_matrix(m: &EmbeddingMatrix) -> Self {
        KernelSide {
            data: m.data().iter().map(|&v| v as f64).collect(),
            dim: m.dim(),
            rows: m.rows(),
        }
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn accum_l2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            let d = xa[l] - xb[l];
            acc[l] += d * d;
        }
    }
    let mut rem = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        rem += d * d;
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + rem
}

#[inline]
fn accum_l1(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += (xa[l] - xb[l]).abs();
        }
    }
    let mut rem = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        rem += (x - y).abs();
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + rem
}

/// Computes the rectangle a_rows x b_rows into `out` (row-major,
/// len = |a_rows| * |b_rows|). Rows are data-parallel; each cell is computed
/// independently, so results do not depend on scheduling.
pub(crate) fn kernel_block(
    a: &KernelSide,
    a_rows: std::ops::Range<usize>,
    b: &KernelSide,
    b_rows: std::ops::Range<usize>,
    norm: Norm,
    budget: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let m = a_rows.len();
    let n = b_rows.len();
    let cells = (m as u128) * (n as u128);
    if cells > budget as u128 {
        return Err(Error::KernelBudget {
            cells,
            budget: budget as u128,
        });
    }
    out.clear();
    out.resize(m * n, 0.0);
    if m == 0 || n == 0 {
        return Ok(());
    }
    let b_lo = b_rows.start;
    let fill_row = |row_idx: usize, row_out: &mut [f64]| {
        let ar = a.row(a_rows.start + row_idx);
        match norm {
            Norm::L2 => {
                for (j, cell) in row_out.iter_mut().enumerate() {
                    *cell = accum_l2(ar, b.row(b_lo + j)).sqrt();
                }
            }
            Norm::L1 => {
                for (j, cell) in row_out.iter_mut().enumerate() {
                    *cell = accum_l1(ar, b.row(b_lo + j));
                }
            }
        }
    };
    // Small rectangles skip thread dispatch; per-cell values are identical
    // either way.
    if m * n <= 4096 {
        for (row_idx, row_out) in out.chunks_mut(n).enumerate() {
            fill_row(row_idx, row_out);
        }
    } else {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(row_idx, row_out)| fill_row(row_idx, row_out));
    }
    Ok(())
}
