use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{distance, PlanarPointSet};
use crate::{Error, Result};

/// Default cap on the number of points a full distance matrix may hold.
pub const DEFAULT_MATRIX_BUDGET: usize = 100_000;

const MAGIC_LEN: usize = 8;

/// Symmetric pairwise distance matrix with a zero diagonal.
///
/// Stores the lower triangle (diagonal included) row-major, so memory is
/// n(n+1)/2 entries. Entries need not satisfy the triangle inequality:
/// density-rescaled matrices generally violate it, and nothing here assumes
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    tri: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from a symmetric entry function; `f` is called once per i >= j.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut tri = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                tri.push(if i == j { 0.0 } else { f(i, j) });
            }
        }
        Self { n, tri }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        debug_assert!(i >= j);
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        self.tri[Self::idx(hi, lo)]
    }

    /// New matrix with every entry mapped through `f(i, j, value)`, i >= j.
    /// The diagonal must stay zero; `f` is not consulted for it.
    pub fn map_indexed(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut tri = Vec::with_capacity(self.tri.len());
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.tri[Self::idx(i, j)];
                tri.push(if i == j { 0.0 } else { f(i, j, v) });
            }
        }
        Self { n: self.n, tri }
    }

    /// Writes the cache format: 8-byte little-endian point count, then the
    /// row-major lower triangle (diagonal included) as little-endian f64.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.tri {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by `write_to`, validating the entry count.
    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; MAGIC_LEN];
        r.read_exact(&mut header)?;
        let n = u64::from_le_bytes(header) as usize;
        let expect = n * (n + 1) / 2;
        let mut tri = Vec::with_capacity(expect);
        let mut buf = [0u8; 8];
        for _ in 0..expect {
            r.read_exact(&mut buf)?;
            tri.push(f64::from_le_bytes(buf));
        }
        if r.read(&mut buf)? != 0 {
            return Err(Error::InvalidParameter {
                name: "matrix file",
                reason: "trailing bytes after the lower triangle".into(),
            });
        }
        Ok(Self { n, tri })
    }
}

/// Full pairwise Euclidean distance matrix, guarded by the default budget.
pub fn pairwise_distances(ps: &PlanarPointSet) -> Result<DistanceMatrix> {
    pairwise_distances_with_budget(ps, DEFAULT_MATRIX_BUDGET)
}

/// As `pairwise_distances` with an explicit point cap.
pub fn pairwise_distances_with_budget(ps: &PlanarPointSet, max_n: usize) -> Result<DistanceMatrix> {
    let n = ps.len();
    if n > max_n {
        return Err(Error::MatrixBudget { n, max: max_n });
    }
    let pts = ps.points();
    Ok(DistanceMatrix::from_fn(n, |i, j| distance(pts[i], pts[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarPoint;

    fn triangle_set() -> PlanarPointSet {
        PlanarPointSet::from_points(vec![
            PlanarPoint::new(0.0, 0.0),
            PlanarPoint::new(3.0, 0.0),
            PlanarPoint::new(0.0, 4.0),
        ])
        .unwrap()
    }

    #[test]
    fn symmetric_with_zero_diagonal() {
        let dm = pairwise_distances(&triangle_set()).unwrap();
        assert_eq!(dm.get(0, 1), 3.0);
        assert_eq!(dm.get(1, 0), 3.0);
        assert_eq!(dm.get(0, 2), 4.0);
        assert_eq!(dm.get(1, 2), 5.0);
        for i in 0..3 {
            assert_eq!(dm.get(i, i), 0.0);
        }
    }

    #[test]
    fn budget_guard_trips() {
        let err = pairwise_distances_with_budget(&triangle_set(), 2).unwrap_err();
        assert!(matches!(err, Error::MatrixBudget { n: 3, max: 2 }));
    }

    #[test]
    fn map_indexed_keeps_diagonal_zero() {
        let dm = pairwise_distances(&triangle_set()).unwrap();
        let doubled = dm.map_indexed(|_, _, v| 2.0 * v);
        assert_eq!(doubled.get(1, 2), 10.0);
        assert_eq!(doubled.get(2, 2), 0.0);
    }

    #[test]
    fn binary_cache_round_trips() {
        let dm = pairwise_distances(&triangle_set()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dm.bin");
        dm.write_to(&path).unwrap();
        let back = DistanceMatrix::read_from(&path).unwrap();
        assert_eq!(dm, back);
    }

    #[test]
    fn truncated_cache_rejected() {
        let dm = pairwise_distances(&triangle_set()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dm.bin");
        dm.write_to(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(DistanceMatrix::read_from(&path).is_err());
    }
}
