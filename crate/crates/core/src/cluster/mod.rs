//! Density clustering over a pairwise distance matrix.
//!
//! DBSCAN here works purely off matrix lookups. Rescaled matrices break the
//! triangle inequality, so there is no metric pruning anywhere; correctness
//! only needs symmetry and a zero diagonal. Neighborhoods use the closed
//! ball (d <= epsilon) and the neighborhood count includes the point itself.
//!
//! The labeling is canonical: clusters are numbered 1..=K by their lowest
//! core point index, and a border point in reach of several clusters joins
//! the cluster of the lowest-indexed core that covers it. Reordering the
//! input therefore permutes only point positions, never the partition.

mod compare;
mod oracle;
mod propagate;

pub use compare::{compare_labelings, ClusterMatch, LabelingComparison};
pub use oracle::{dbscan_oracle, ORACLE_MAX_POINTS};
pub use propagate::{assign_by_envelope, sample_points};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::DistanceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius, in whatever units the matrix carries.
    pub epsilon: f64,
    /// Minimum neighborhood size for a core point, the point itself included.
    pub kappa: usize,
}

impl DbscanParams {
    pub fn new(epsilon: f64, kappa: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive and finite, got {epsilon}"),
            });
        }
        if kappa == 0 {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { epsilon, kappa })
    }
}

/// Cluster ids are 1-based; 0 is reserved for outliers in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Outlier,
    Cluster(u32),
}

impl Label {
    /// Numeric form: 0 for outliers, the id otherwise.
    pub fn id(self) -> u32 {
        match self {
            Label::Outlier => 0,
            Label::Cluster(c) => c,
        }
    }

    pub fn from_id(id: u32) -> Self {
        if id == 0 {
            Label::Outlier
        } else {
            Label::Cluster(id)
        }
    }

    pub fn is_outlier(self) -> bool {
        self == Label::Outlier
    }
}

/// Whether a point was labeled directly by clustering or by the envelope
/// propagation step afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sampled,
    EnvelopeAssigned,
}

/// A per-point labeling with contiguous cluster ids 1..=n_clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    labels: Vec<Label>,
    provenance: Vec<Provenance>,
    n_clusters: u32,
}

impl ClusterLabeling {
    /// Validates that cluster ids are exactly 1..=K with every id present.
    pub fn new(labels: Vec<Label>, provenance: Vec<Provenance>) -> Result<Self> {
        if labels.len() != provenance.len() {
            return Err(Error::SizeMismatch { left: labels.len(), right: provenance.len() });
        }
        let max = labels.iter().map(|l| l.id()).max().unwrap_or(0);
        let mut seen = vec![false; max as usize + 1];
        for l in &labels {
            seen[l.id() as usize] = true;
        }
        if let Some(hole) = (1..=max).find(|&id| !seen[id as usize]) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("cluster ids not contiguous: {hole} missing below {max}"),
            });
        }
        Ok(Self { labels, provenance, n_clusters: max })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn n_clusters(&self) -> u32 {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn outlier_share(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|l| l.is_outlier()).count() as f64 / self.labels.len() as f64
    }

    /// Point count per cluster id, index 0 holding the outlier count.
    pub fn sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.n_clusters as usize + 1];
        for l in &self.labels {
            sizes[l.id() as usize] += 1;
        }
        sizes
    }
}

/// DBSCAN over a distance matrix.
///
/// Core points are those with at least `kappa` points (themselves included)
/// within `epsilon`; clusters are the connected components of the core-core
/// adjacency at `epsilon`, numbered by lowest member index; non-core points
/// within `epsilon` of a core join the lowest-indexed such core's cluster,
/// everything else is an outlier.
pub fn dbscan(dm: &DistanceMatrix, params: DbscanParams) -> ClusterLabeling {
    let n = dm.n();
    let eps = params.epsilon;
    if n == 0 {
        return ClusterLabeling { labels: Vec::new(), provenance: Vec::new(), n_clusters: 0 };
    }

    // Neighborhood sizes, self included; data-parallel over rows.
    let counts: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| 1 + (0..n).filter(|&j| j != i && dm.get(i, j) <= eps).count())
        .collect();
    let core: Vec<bool> = counts.iter().map(|&c| c >= params.kappa).collect();

    // Components of the core-core graph. Union order does not matter, so a
    // sequential sweep keeps this deterministic.
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if !core[i] {
            continue;
        }
        for j in 0..i {
            if core[j] && dm.get(i, j) <= eps {
                uf.union(i, j);
            }
        }
    }

    // Number components 1..=K by their lowest core index.
    let mut component_min: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if core[i] {
            let root = uf.find(i);
            let slot = &mut component_min[root];
            *slot = Some(slot.map_or(i, |m| m.min(i)));
        }
    }
    let mut mins: Vec<(usize, usize)> = component_min
        .iter()
        .enumerate()
        .filter_map(|(root, min)| min.map(|m| (m, root)))
        .collect();
    mins.sort_unstable();
    let mut cluster_of_root = vec![0u32; n];
    for (id, &(_, root)) in mins.iter().enumerate() {
        cluster_of_root[root] = id as u32 + 1;
    }

    let labels: Vec<Label> = (0..n)
        .into_par_iter()
        .map(|i| {
            if core[i] {
                return Label::Cluster(cluster_of_root[uf.find_readonly(i)]);
            }
            // Border: lowest-indexed core within epsilon, if any.
            match (0..n).find(|&j| core[j] && dm.get(i, j) <= eps) {
                Some(j) => Label::Cluster(cluster_of_root[uf.find_readonly(j)]),
                None => Label::Outlier,
            }
        })
        .collect();

    ClusterLabeling {
        labels,
        provenance: vec![Provenance::Sampled; n],
        n_clusters: mins.len() as u32,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Root lookup without path compression, usable from parallel readers
    /// once all unions are done.
    fn find_readonly(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower root wins so roots stay stable under sweep order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pairwise_distances, PlanarPoint, PlanarPointSet};

    fn matrix(points: Vec<(f64, f64)>) -> DistanceMatrix {
        let ps = PlanarPointSet::from_points(
            points.into_iter().map(|(x, y)| PlanarPoint::new(x, y)).collect(),
        )
        .unwrap();
        pairwise_distances(&ps).unwrap()
    }

    #[test]
    fn two_blobs_and_noise() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push((i as f64 * 0.5, 0.0)); // blob one
        }
        for i in 0..6 {
            pts.push((100.0 + i as f64 * 0.5, 0.0)); // blob two
        }
        pts.push((50.0, 50.0)); // lone noise point
        let labeling = dbscan(&matrix(pts), DbscanParams::new(2.0, 3).unwrap());
        assert_eq!(labeling.n_clusters(), 2);
        assert_eq!(labeling.label(0), Label::Cluster(1));
        assert_eq!(labeling.label(6), Label::Cluster(2));
        assert_eq!(labeling.label(12), Label::Outlier);
        assert_eq!(labeling.sizes(), vec![1, 6, 6]);
    }

    #[test]
    fn chain_connects_into_one_cluster() {
        // Successive points exactly epsilon apart; closed ball keeps the
        // chain reachable end to end.
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64 * 5.0, 0.0)).collect();
        let labeling = dbscan(&matrix(pts), DbscanParams::new(5.0, 2).unwrap());
        assert_eq!(labeling.n_clusters(), 1);
        assert!(labeling.labels().iter().all(|l| *l == Label::Cluster(1)));
    }

    #[test]
    fn kappa_above_population_means_all_outliers() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.0)).collect();
        let labeling = dbscan(&matrix(pts), DbscanParams::new(10.0, 6).unwrap());
        assert_eq!(labeling.n_clusters(), 0);
        assert!(labeling.labels().iter().all(|l| l.is_outlier()));
    }

    #[test]
    fn singleton_with_kappa_one_is_a_cluster() {
        let labeling = dbscan(&matrix(vec![(3.0, 3.0)]), DbscanParams::new(1.0, 1).unwrap());
        assert_eq!(labeling.n_clusters(), 1);
        assert_eq!(labeling.label(0), Label::Cluster(1));
    }

    #[test]
    fn border_tie_goes_to_lowest_core_index() {
        // Index 0: core B; 3: core A; 6: border P equidistant from both.
        // Components are {B, satellites}, {A, satellites}; P joins core 0's
        // cluster, which is also cluster 1 by the lowest-core numbering.
        let pts = vec![
            (8.0, 0.0),  // 0 core B
            (8.0, 4.9),  // 1
            (8.0, -4.9), // 2
            (0.0, 0.0),  // 3 core A
            (0.0, 4.9),  // 4
            (0.0, -4.9), // 5
            (4.0, 0.0),  // 6 border P
        ];
        let labeling = dbscan(&matrix(pts), DbscanParams::new(5.0, 4).unwrap());
        assert_eq!(labeling.n_clusters(), 2);
        assert_eq!(labeling.label(0), Label::Cluster(1));
        assert_eq!(labeling.label(3), Label::Cluster(2));
        assert_eq!(labeling.label(6), Label::Cluster(1), "tie must resolve to core index 0");
    }

    #[test]
    fn labels_are_input_order_invariant() {
        let base: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.5, 0.5),
            (20.0, 20.0),
            (21.0, 20.0),
            (20.5, 20.5),
            (50.0, 0.0),
        ];
        let params = DbscanParams::new(2.0, 3).unwrap();
        let forward = dbscan(&matrix(base.clone()), params);
        let mut reversed = base.clone();
        reversed.reverse();
        let backward = dbscan(&matrix(reversed), params);
        let n = base.len();
        // Same partition: outliers map to outliers and co-membership agrees.
        for i in 0..n {
            for j in 0..n {
                let same_fwd = forward.label(i) == forward.label(j);
                let same_bwd = backward.label(n - 1 - i) == backward.label(n - 1 - j);
                assert_eq!(same_fwd, same_bwd, "pair {i},{j}");
            }
            assert_eq!(
                forward.label(i).is_outlier(),
                backward.label(n - 1 - i).is_outlier()
            );
        }
    }

    #[test]
    fn labeling_requires_contiguous_ids() {
        let bad = vec![Label::Cluster(1), Label::Cluster(3)];
        let prov = vec![Provenance::Sampled; 2];
        assert!(ClusterLabeling::new(bad, prov.clone()).is_err());
        let good = vec![Label::Cluster(1), Label::Cluster(2), Label::Outlier];
        assert!(ClusterLabeling::new(good, vec![Provenance::Sampled; 3]).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(DbscanParams::new(0.0, 3).is_err());
        assert!(DbscanParams::new(f64::NAN, 3).is_err());
        assert!(DbscanParams::new(1.0, 0).is_err());
    }

    #[test]
    fn empty_matrix_yields_empty_labeling() {
        let dm = DistanceMatrix::from_fn(0, |_, _| 0.0);
        let labeling = dbscan(&dm, DbscanParams::new(1.0, 1).unwrap());
        assert!(labeling.is_empty());
        assert_eq!(labeling.n_clusters(), 0);
    }
}
