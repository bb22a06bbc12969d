//! Pivot-distance filtering: sort both join sides by distance to a pivot,
//! then derive per-row candidate intervals into the other side in linear
//! time.
//!
//! The lower bound dist(a, b) >= |dist(p, a) - dist(p, b)| means a pair can
//! only satisfy dist(a, b) <= eps when the two pivot distances are within
//! eps of each other. Over sorted pivot distances the qualifying indices
//! form one contiguous interval [s_i, e_i] per row, and both endpoint
//! sequences are non-decreasing, so a single two-pointer sweep finds all of
//! them in O(m + n).

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::metric::{KernelSide, MetricModel, Pivot};

/// One side of the join after pivot-distance sorting: the permutation
/// applied, the non-decreasing pivot distances, and the reordered matrix.
#[derive(Debug, Clone)]
pub struct SortedSide {
    perm: Vec<usize>,
    pivot_dist: Vec<f64>,
    matrix: EmbeddingMatrix,
    wide: KernelSide,
}

impl SortedSide {
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// perm[i] = original row index of sorted row i.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Non-decreasing pivot distances, aligned with the reordered matrix.
    pub fn pivot_dist(&self) -> &[f64] {
        &self.pivot_dist
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub(crate) fn wide(&self) -> &KernelSide {
        &self.wide
    }
}

/// Distance from the pivot to every row, on the canonical 64-bit path.
pub fn pivot_distances(x: &EmbeddingMatrix, pivot: &Pivot, model: &MetricModel) -> Result<Vec<f64>> {
    if x.dim() != pivot.dim() && x.rows() > 0 {
        return Err(Error::Dimension(format!(
            "pivot dim {} vs matrix dim {}",
            pivot.dim(),
            x.dim()
        )));
    }
    (0..x.rows())
        .map(|i| model.distance(pivot.vector(), x.row(i)))
        .collect()
}

/// Stable sort of a side by pivot distance; ties break by original index.
pub fn sort_side(x: &EmbeddingMatrix, pivot_dist: &[f64]) -> Result<SortedSide> {
    if pivot_dist.len() != x.rows() {
        return Err(Error::Dimension(format!(
            "{} pivot distances for {} rows",
            pivot_dist.len(),
            x.rows()
        )));
    }
    let mut perm: Vec<usize> = (0..x.rows()).collect();
    perm.sort_unstable_by(|&a, &b| {
        pivot_dist[a]
            .partial_cmp(&pivot_dist[b])
            .expect("pivot distances are finite")
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = perm.iter().map(|&i| pivot_dist[i]).collect();
    let matrix = x.gather(&perm);
    let wide = KernelSide::from_matrix(&matrix);
    Ok(SortedSide {
        perm,
        pivot_dist: sorted,
        matrix,
        wide,
    })
}

/// Per-row candidate intervals [s_i, e_i] into the other sorted side.
/// An entry with s > e means the row has no candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeTable {
    s: Vec<usize>,
    e: Vec<usize>,
}

/// Marker endpoints for an empty range; s > e regardless of the other
/// side's length, and clamping to any window keeps the entry empty.
const EMPTY_S: usize = 1;
const EMPTY_E: usize = 0;

impl RangeTable {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Candidate interval of row i, or None when the row has no candidates.
    pub fn get(&self, i: usize) -> Option<(usize, usize)> {
        (self.s[i] <= self.e[i]).then(|| (self.s[i], self.e[i]))
    }

    /// Total candidate pairs: sum of interval widths over non-empty rows.
    pub fn candidate_count(&self) -> u64 {
        (0..self.len())
            .filter_map(|i| self.get(i))
            .map(|(s, e)| (e - s + 1) as u64)
            .sum()
    }

    /// Intersects the rows `rows` with the B-side index window [lo, hi],
    /// producing a table over just those rows (index 0 = row `rows.start`).
    pub fn clamp(&self, rows: std::ops::Range<usize>, lo: usize, hi: usize) -> RangeTable {
        let mut s = Vec::with_capacity(rows.len());
        let mut e = Vec::with_capacity(rows.len());
        for i in rows {
            match self.get(i) {
                Some((si, ei)) if si.max(lo) <= ei.min(hi) => {
                    s.push(si.max(lo));
                    e.push(ei.min(hi));
                }
                _ => {
                    s.push(EMPTY_S);
                    e.push(EMPTY_E);
                }
            }
        }
        RangeTable { s, e }
    }

    #[cfg(test)]
    pub(crate) fn from_parts(s: Vec<usize>, e: Vec<usize>) -> Self {
        assert_eq!(s.len(), e.len());
        RangeTable { s, e }
    }
}

/// Computes the candidate table for non-decreasing pivot-distance lists
/// `sa` (rows) and `sb` (other side) with one two-pointer sweep. Boundary
/// comparisons are inclusive: j is a candidate for i iff
/// |sa[i] - sb[j]| <= eps.
pub fn compute_ranges(sa: &[f64], sb: &[f64], eps: f64) -> Result<RangeTable> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    debug_assert!(sa.windows(2).all(|w| w[0] <= w[1]), "sa must be non-decreasing");
    debug_assert!(sb.windows(2).all(|w| w[0] <= w[1]), "sb must be non-decreasing");
    let m = sa.len();
    let n = sb.len();
    let mut s = vec![EMPTY_S; m];
    let mut e = vec![EMPTY_E; m];
    let mut lo = 0usize;
    let mut hi = 0usize;
    for i in 0..m {
        let c = sa[i];
        // lo: first j with sb[j] >= c - eps. Never moves left as c grows.
        while lo < n && sb[lo] < c - eps {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        // hi: first j with sb[j] > c + eps.
        while hi < n && sb[hi] <= c + eps {
            hi += 1;
        }
        if lo < hi {
            s[i] = lo;
            e[i] = hi - 1;
        }
    }
    Ok(RangeTable { s, e })
}
