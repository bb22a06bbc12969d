//! Embedding matrices and triple lists: in-memory layout, on-disk formats,
//! subsampling and synthetic data generation.
//!
//! The binary matrix format ("kgj1") is an ASCII header line
//! `kgj1 <rows> <dim>\n` followed by rows x dim little-endian IEEE-754
//! 32-bit values, row-major, no padding. A sidecar `<path>.labels` file, one
//! label per line, is loaded when present. The TSV alternative is one row
//! per line with tab-separated decimal reals. Triple files are TSV lines
//! `head<TAB>rel<TAB>tail` with 0-based integer ids.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const MAGIC: &str = "kgj1";

/// Dense real matrix, rows = vectors, columns = dimensions. Values are
/// stored in 32-bit precision; every value is finite, and optional labels
/// are unique with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    labels: Option<Vec<String>>,
}

/// Coordinate distribution for synthetic matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticDistribution {
    /// Each coordinate drawn from U[0, 1).
    Uniform,
    /// ceil(sqrt(n)) uniform centers, points = center + N(0, 0.05) noise.
    Clustered,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::Parameter(format!("matrix shape {rows}x{dim} overflows")))?;
        if data.len() != expected {
            return Err(Error::Length {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(EmbeddingMatrix {
            rows,
            dim,
            data,
            labels: None,
        })
    }

    /// Attaches one label per row; labels must be unique.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(Error::Data(format!(
                "label count {} does not match row count {}",
                labels.len(),
                self.rows
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Data(format!("duplicate label {l:?}")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// New matrix holding the given rows, in the given order. Labels follow.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|ls| indices.iter().map(|&i| ls[i].clone()).collect());
        EmbeddingMatrix {
            rows: indices.len(),
            dim: self.dim,
            data,
            labels,
        }
    }

    /// Loads a matrix from the binary "kgj1" format or, failing the magic
    /// sniff, from TSV. A `<path>.labels` sidecar is picked up when present.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let matrix = if bytes.starts_with(MAGIC.as_bytes()) {
            Self::decode_binary(path, &bytes)?
        } else {
            Self::decode_tsv(path, &bytes)?
        };
        let sidecar = labels_path(path);
        if sidecar.exists() {
            let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            let labels: Vec<String> = text.lines().map(str::to_owned).collect();
            return matrix.with_labels(labels);
        }
        Ok(matrix)
    }

    fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .take(128)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| Error::format(path, "header is not ASCII"))?;
        let mut fields = header.split_ascii_whitespace();
        if fields.next() != Some(MAGIC) {
            return Err(Error::format(path, "bad magic"));
        }
        let rows: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "bad row count in header"))?;
        let dim: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "bad dim count in header"))?;
        if fields.next().is_some() {
            return Err(Error::format(path, "trailing tokens in header"));
        }
        let payload = &bytes[newline + 1..];
        let expected = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::format(path, "header shape overflows"))?;
        if payload.len() != expected * 4 {
            return Err(Error::Length {
                expected,
                found: payload.len() / 4,
            });
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(rows, dim, data)
    }

    fn decode_tsv(path: &Path, bytes: &[u8]) -> Result<Self> {
        let text =
            std::str::from_utf8(bytes).map_err(|_| Error::format(path, "TSV is not UTF-8"))?;
        let mut data = Vec::new();
        let mut dim = None;
        let mut rows = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let start = data.len();
            for field in line.split('\t') {
                let v: f32 = field.trim().parse().map_err(|_| {
                    Error::format(path, format!("line {}: bad value {field:?}", lineno + 1))
                })?;
                data.push(v);
            }
            let width = data.len() - start;
            match dim {
                None => dim = Some(width),
                Some(d) if d != width => {
                    return Err(Error::format(
                        path,
                        format!("line {}: {} columns, expected {}", lineno + 1, width, d),
                    ));
                }
                _ => {}
            }
            rows += 1;
        }
        let dim = dim.ok_or_else(|| Error::format(path, "empty TSV matrix"))?;
        Self::new(rows, dim, data)
    }

    /// Writes the binary "kgj1" format; a load reproduces the matrix
    /// bitwise. Labels, if any, go to the `<path>.labels` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(32 + self.data.len() * 4);
        let mut header = String::new();
        let _ = writeln!(header, "{MAGIC} {} {}", self.rows, self.dim);
        bytes.extend_from_slice(header.as_bytes());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        if let Some(labels) = &self.labels {
            let sidecar = labels_path(path);
            let mut text = String::new();
            for l in labels {
                text.push_str(l);
                text.push('\n');
            }
            fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
        }
        Ok(())
    }

    /// Keeps ceil(fraction * rows) rows chosen by a seeded shuffle; the
    /// selected rows stay in their original relative order.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "subsample fraction must be in (0, 1], got {fraction}"
            )));
        }
        let keep = (fraction * self.rows as f64).ceil() as usize;
        let keep = keep.min(self.rows);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut indices = rand::seq::index::sample(&mut rng, self.rows, keep).into_vec();
        indices.sort_unstable();
        Ok(self.gather(&indices))
    }

    /// Deterministic synthetic matrix for a fixed (n, d, distribution, seed).
    pub fn synthetic(
        n: usize,
        dim: usize,
        distribution: SyntheticDistribution,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dim must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = match distribution {
            SyntheticDistribution::Uniform => {
                (0..n * dim).map(|_| rand::Rng::gen::<f32>(&mut rng)).collect()
            }
            SyntheticDistribution::Clustered => {
                let k = (n as f64).sqrt().ceil() as usize;
                let centers: Vec<f32> =
                    (0..k * dim).map(|_| rand::Rng::gen::<f32>(&mut rng)).collect();
                let noise = Normal::<f32>::new(0.0, 0.05)
                    .map_err(|e| Error::Parameter(e.to_string()))?;
                let mut data = Vec::with_capacity(n * dim);
                for _ in 0..n {
                    let c = rand::Rng::gen_range(&mut rng, 0..k);
                    for j in 0..dim {
                        data.push(centers[c * dim + j] + noise.sample(&mut rng));
                    }
                }
                data
            }
        };
        Self::new(n, dim, data)
    }
}

fn labels_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".labels");
    PathBuf::from(name)
}

/// A (head, relation, tail) id triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

/// Sequence of id triples, e.g. a test split or the union of all known
/// triples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleList {
    pub triples: Vec<Triple>,
}

impl TripleList {
    pub fn new(triples: Vec<Triple>) -> Self {
        TripleList { triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Loads `head<TAB>rel<TAB>tail` lines with 0-based integer ids.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut triples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let mut next = |name: &str| -> Result<usize> {
                fields
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| {
                        Error::format(path, format!("line {}: bad {name} id", lineno + 1))
                    })
            };
            let head = next("head")?;
            let rel = next("rel")?;
            let tail = next("tail")?;
            triples.push(Triple { head, rel, tail });
        }
        Ok(TripleList { triples })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for t in &self.triples {
            let _ = writeln!(text, "{}\t{}\t{}", t.head, t.rel, t.tail);
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks every id against the entity and relation counts.
    pub fn validate(&self, entities: usize, relations: usize) -> Result<()> {
        for (i, t) in self.triples.iter().enumerate() {
            if t.head >= entities || t.tail >= entities || t.rel >= relations {
                return Err(Error::Data(format!(
                    "triple {i} ({}, {}, {}) out of bounds for {entities} entities / {relations} relations",
                    t.head, t.rel, t.tail
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, dim: usize, data: &[f32]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(rows, dim, data.to_vec()).unwrap()
    }

    #[test]
    fn new_rejects_wrong_length() {
        let err = EmbeddingMatrix::new(2, 3, vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::Length { expected: 6, found: 5 }));
    }

    #[test]
    fn new_rejects_non_finite() {
        let err = EmbeddingMatrix::new(1, 2, vec![1.0, f32::NAN]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn binary_identity_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kgj1");
        let mut bytes = b"kgj1 2 3\n".to_vec();
        for v in [1.0f32, 0.0, 0.0, 0.0, 1.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let m = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!((m.rows(), m.dim()), (2, 3));
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn binary_truncated_payload_is_length_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kgj1");
        let mut bytes = b"kgj1 2 3\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            EmbeddingMatrix::load(&path).unwrap_err(),
            Error::Length { expected: 6, found: 5 }
        ));
    }

    #[test]
    fn binary_bad_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kgj1");
        std::fs::write(&path, b"kgj1 two 3\npayload").unwrap();
        assert!(matches!(
            EmbeddingMatrix::load(&path).unwrap_err(),
            Error::Format { .. }
        ));
    }

    #[test]
    fn binary_non_finite_payload_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kgj1");
        let mut bytes = b"kgj1 1 1\n".to_vec();
        bytes.extend_from_slice(&f32::INFINITY.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            EmbeddingMatrix::load(&path).unwrap_err(),
            Error::Data(_)
        ));
    }

    #[test]
    fn save_load_empty_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.kgj1");
        let m = matrix(0, 4, &[]);
        m.save(&path).unwrap();
        let back = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!((back.rows(), back.dim()), (0, 4));
    }

    #[test]
    fn save_single_value_payload_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.kgj1");
        matrix(1, 1, &[2.5]).save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..9], b"kgj1 1 1\n");
        assert_eq!(&bytes[9..], 2.5f32.to_le_bytes());
    }

    #[test]
    fn round_trip_random_matrix_is_bitwise_equal() {
        // Byte-level oracle: the serialized payloads of original and
        // reloaded matrices must be identical.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.kgj1");
        let m = EmbeddingMatrix::synthetic(100, 64, SyntheticDistribution::Uniform, 13).unwrap();
        m.save(&path).unwrap();
        let back = EmbeddingMatrix::load(&path).unwrap();
        let bits = |m: &EmbeddingMatrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&back));
    }

    #[test]
    fn labels_sidecar_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.kgj1");
        let m = matrix(2, 1, &[1.0, 2.0])
            .with_labels(vec!["a".into(), "b".into()])
            .unwrap();
        m.save(&path).unwrap();
        let back = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(back.labels().unwrap(), &["a".to_string(), "b".to_string()]);

        let dup = matrix(2, 1, &[1.0, 2.0]).with_labels(vec!["x".into(), "x".into()]);
        assert!(matches!(dup.unwrap_err(), Error::Data(_)));
        let short = matrix(2, 1, &[1.0, 2.0]).with_labels(vec!["x".into()]);
        assert!(matches!(short.unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn tsv_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "1.0\t2.0\n3.5\t-4.25\n").unwrap();
        let m = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!((m.rows(), m.dim()), (2, 2));
        assert_eq!(m.row(1), &[3.5, -4.25]);
    }

    #[test]
    fn tsv_ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "1.0\t2.0\n3.0\n").unwrap();
        assert!(matches!(
            EmbeddingMatrix::load(&path).unwrap_err(),
            Error::Format { .. }
        ));
    }

    #[test]
    fn subsample_full_fraction_is_identity() {
        let m = EmbeddingMatrix::synthetic(37, 3, SyntheticDistribution::Uniform, 5).unwrap();
        let s = m.subsample(1.0, 99).unwrap();
        assert_eq!(m, s);
    }

    #[test]
    fn subsample_ceiling_rule() {
        // ceil(0.2 * 40943) = 8189
        let m = matrix(40943, 1, &vec![0.0; 40943]);
        assert_eq!(m.subsample(0.2, 1).unwrap().rows(), 8189);
    }

    #[test]
    fn subsample_is_deterministic_and_order_preserving() {
        let m = EmbeddingMatrix::synthetic(100, 2, SyntheticDistribution::Uniform, 0).unwrap();
        let a = m.subsample(0.3, 7).unwrap();
        let b = m.subsample(0.3, 7).unwrap();
        assert_eq!(a, b);
        // Rows appear in original order: every kept row exists in the
        // original and their first occurrences are increasing.
        let mut last = None;
        for i in 0..a.rows() {
            let pos = (0..m.rows()).find(|&j| m.row(j) == a.row(i)).unwrap();
            assert!(last.map_or(true, |l| pos > l));
            last = Some(pos);
        }
    }

    #[test]
    fn subsample_rejects_bad_fraction() {
        let m = matrix(2, 1, &[0.0, 1.0]);
        assert!(matches!(m.subsample(0.0, 1), Err(Error::Parameter(_))));
        assert!(matches!(m.subsample(1.5, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn synthetic_empty_and_deterministic() {
        let e = EmbeddingMatrix::synthetic(0, 8, SyntheticDistribution::Uniform, 1).unwrap();
        assert_eq!(e.rows(), 0);
        let a = EmbeddingMatrix::synthetic(1000, 8, SyntheticDistribution::Uniform, 7).unwrap();
        let b = EmbeddingMatrix::synthetic(1000, 8, SyntheticDistribution::Uniform, 7).unwrap();
        assert_eq!(a, b);
        let c = EmbeddingMatrix::synthetic(200, 4, SyntheticDistribution::Clustered, 7).unwrap();
        let d = EmbeddingMatrix::synthetic(200, 4, SyntheticDistribution::Clustered, 7).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn synthetic_uniform_coordinate_means() {
        // Independent statistics pass over the generated data.
        let m = EmbeddingMatrix::synthetic(10_000, 2, SyntheticDistribution::Uniform, 42).unwrap();
        for j in 0..2 {
            let mean: f64 =
                (0..m.rows()).map(|i| m.row(i)[j] as f64).sum::<f64>() / m.rows() as f64;
            assert!((0.48..=0.52).contains(&mean), "dim {j} mean {mean}");
        }
    }

    #[test]
    fn triple_list_round_trip_and_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let list = TripleList::new(vec![
            Triple { head: 0, rel: 1, tail: 2 },
            Triple { head: 2, rel: 0, tail: 0 },
        ]);
        list.save(&path).unwrap();
        let back = TripleList::load(&path).unwrap();
        assert_eq!(list, back);
        assert!(back.validate(3, 2).is_ok());
        assert!(matches!(back.validate(2, 2), Err(Error::Data(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn save_load_round_trip(rows in 0usize..12, dim in 1usize..6, seed in 0u64..1000) {
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("p.kgj1");
                let m = EmbeddingMatrix::synthetic(rows, dim, SyntheticDistribution::Uniform, seed).unwrap();
                m.save(&path).unwrap();
                let back = EmbeddingMatrix::load(&path).unwrap();
                prop_assert_eq!(m, back);
            }
        }
    }
}
