//! Brute-force clustering oracle built directly from the reachability
//! relations, for validating `dbscan`.
//!
//! The oracle materializes direct density-reachability as a relation, takes
//! its reflexive-transitive closure, derives density-connectivity through a
//! shared origin point, and forms candidate clusters as the reach sets of
//! core points. Maximality and pairwise connectivity are then asserted on
//! every candidate before the partition is assembled. None of the fast
//! path's shortcuts (component union-find, early exits) appear here, so the
//! two routes only agree when both are right.

use super::{ClusterLabeling, DbscanParams, Label, Provenance};
use crate::geometry::DistanceMatrix;
use crate::{Error, Result};

/// Closure cost grows cubically; refuse instances past this size.
pub const ORACLE_MAX_POINTS: usize = 2_000;

/// Reference DBSCAN by literal evaluation of the definitions.
///
/// Matches `dbscan` exactly, including the lowest-core-index border rule and
/// the lowest-member cluster numbering.
pub fn dbscan_oracle(dm: &DistanceMatrix, params: DbscanParams) -> Result<ClusterLabeling> {
    let n = dm.n();
    if n > ORACLE_MAX_POINTS {
        return Err(Error::OracleTooLarge { n, max: ORACLE_MAX_POINTS });
    }
    if n == 0 {
        return ClusterLabeling::new(Vec::new(), Vec::new());
    }
    let eps = params.epsilon;

    // Closed-ball neighborhoods, the point itself included.
    let mut adj = BitMatrix::new(n);
    for i in 0..n {
        for j in 0..n {
            if dm.get(i, j) <= eps {
                adj.set(i, j);
            }
        }
    }
    let core: Vec<bool> = (0..n).map(|i| adj.row_count(i) >= params.kappa).collect();

    // Direct density-reachability: x -> y iff x is core and y in N(x).
    // Reach = its reflexive-transitive closure (chains of any length).
    let mut reach = BitMatrix::new(n);
    for i in 0..n {
        reach.set(i, i);
        if core[i] {
            reach.or_row_from(i, &adj, i);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach.get(i, k) {
                reach.or_row(i, k);
            }
        }
    }

    // reached_by[x]: every z whose chains arrive at x. Two points are
    // density-connected when some shared z reaches both.
    let mut reached_by = BitMatrix::new(n);
    for z in 0..n {
        for x in 0..n {
            if reach.get(z, x) {
                reached_by.set(x, z);
            }
        }
    }

    // Candidate clusters: the reach set of each core, deduplicated. Scanning
    // cores in ascending order means each distinct set is first produced by
    // its lowest core, which fixes the numbering.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut seen_rows: Vec<usize> = Vec::new();
    for o in 0..n {
        if !core[o] || seen_rows.iter().any(|&r| reach.rows_equal(r, o)) {
            continue;
        }
        seen_rows.push(o);
        clusters.push((0..n).filter(|&y| reach.get(o, y)).collect());
    }

    for members in &clusters {
        assert!(!members.is_empty(), "cluster candidates cannot be empty");
        for &x in members {
            // Maximality: everything reachable from a member is a member.
            for y in 0..n {
                if reach.get(x, y) {
                    assert!(
                        members.binary_search(&y).is_ok(),
                        "reachable point {y} escaped the cluster of {x}"
                    );
                }
            }
            // Connectivity: every pair shares an origin that reaches both.
            for &y in members {
                assert!(
                    reached_by.rows_intersect(x, y),
                    "members {x} and {y} are not density-connected"
                );
            }
        }
    }

    let mut labels = vec![Label::Outlier; n];
    for (id, members) in clusters.iter().enumerate() {
        for &x in members {
            if core[x] {
                assert!(
                    labels[x] == Label::Outlier,
                    "core {x} claimed by two candidate clusters"
                );
                labels[x] = Label::Cluster(id as u32 + 1);
            }
        }
    }
    for x in 0..n {
        if core[x] {
            continue;
        }
        // Border rule: lowest-indexed core whose ball covers x.
        if let Some(j) = (0..n).find(|&j| core[j] && adj.get(x, j)) {
            labels[x] = labels[j];
        }
    }

    ClusterLabeling::new(labels, vec![Provenance::Sampled; n])
}

/// Dense square bit matrix, rows packed into u64 words.
struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self { n, words, bits: vec![0; words * n.max(1)] }
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.words + col / 64] |= 1 << (col % 64);
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words + col / 64] & (1 << (col % 64)) != 0
    }

    fn row_count(&self, row: usize) -> usize {
        self.row(row).iter().map(|w| w.count_ones() as usize).sum()
    }

    fn row(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words..(row + 1) * self.words]
    }

    /// row |= other row of the same matrix.
    fn or_row(&mut self, dst: usize, src: usize) {
        let (d, s) = (dst * self.words, src * self.words);
        for w in 0..self.words {
            self.bits[d + w] |= self.bits[s + w];
        }
    }

    /// row |= a row of another matrix.
    fn or_row_from(&mut self, dst: usize, other: &BitMatrix, src: usize) {
        debug_assert_eq!(self.n, other.n);
        let d = dst * self.words;
        for (w, v) in other.row(src).iter().enumerate() {
            self.bits[d + w] |= v;
        }
    }

    fn rows_equal(&self, a: usize, b: usize) -> bool {
        self.row(a) == self.row(b)
    }

    fn rows_intersect(&self, a: usize, b: usize) -> bool {
        self.row(a).iter().zip(self.row(b)).any(|(x, y)| x & y != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::dbscan;
    use super::*;
    use crate::geometry::{pairwise_distances, PlanarPoint, PlanarPointSet};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize) -> DistanceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| PlanarPoint::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        pairwise_distances(&PlanarPointSet::from_points(pts).unwrap()).unwrap()
    }

    #[test]
    fn oracle_agrees_with_dbscan_on_random_instances() {
        for seed in 0..30 {
            let n = 20 + (seed as usize * 7) % 60;
            let dm = random_instance(seed, n);
            let params = DbscanParams::new(5.0 + (seed % 4) as f64 * 5.0, 2 + (seed % 3) as usize)
                .unwrap();
            let fast = dbscan(&dm, params);
            let slow = dbscan_oracle(&dm, params).unwrap();
            assert_eq!(fast.labels(), slow.labels(), "seed {seed}");
            assert_eq!(fast.n_clusters(), slow.n_clusters());
        }
    }

    #[test]
    fn oracle_respects_size_guard() {
        let dm = DistanceMatrix::from_fn(ORACLE_MAX_POINTS + 1, |_, _| 1.0);
        let err = dbscan_oracle(&dm, DbscanParams::new(0.5, 2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::OracleTooLarge { .. }));
    }

    #[test]
    fn oracle_handles_rescaled_style_matrices() {
        // A matrix that deliberately violates the triangle inequality:
        // d(0,2) far exceeds d(0,1) + d(1,2).
        let dm = DistanceMatrix::from_fn(3, |i, j| match (i, j) {
            (1, 0) => 1.0,
            (2, 1) => 1.0,
            (2, 0) => 10.0,
            _ => unreachable!(),
        });
        let params = DbscanParams::new(1.0, 2).unwrap();
        let fast = dbscan(&dm, params);
        let slow = dbscan_oracle(&dm, params).unwrap();
        assert_eq!(fast.labels(), slow.labels());
        // 0 and 2 connect only through the chain point 1.
        assert_eq!(fast.label(0), fast.label(2));
    }
}
