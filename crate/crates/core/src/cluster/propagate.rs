//! Seeded subsampling and envelope label propagation.
//!
//! Clustering a large incident set directly is quadratic in memory, so the
//! pipeline clusters a uniform subsample and then extends those labels to
//! the full set: any point within the envelope radius of a clustered sample
//! point joins that point's cluster, everything else becomes an outlier.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClusterLabeling, Label, Provenance};
use crate::geometry::{distance, PlanarPoint, PlanarPointSet, SpatialIndex};
use crate::{Error, Result};

/// Draw a uniform sample of `n_sample` distinct points.
///
/// Returns the sampled subset and a sorted map from sample position to the
/// index in `ps`. The same seed always yields the same sample.
pub fn sample_points(
    ps: &PlanarPointSet,
    n_sample: usize,
    seed: u64,
) -> Result<(PlanarPointSet, Vec<usize>)> {
    if n_sample == 0 {
        return Err(Error::InvalidParameter {
            name: "n_sample",
            reason: "must be at least 1".into(),
        });
    }
    if n_sample > ps.len() {
        return Err(Error::SampleTooLarge { requested: n_sample, available: ps.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = rand::seq::index::sample(&mut rng, ps.len(), n_sample).into_vec();
    map.sort_unstable();
    let sample = ps.subset(&map)?;
    Ok((sample, map))
}

/// Extend sample labels to every point in `full`.
///
/// Sampled points keep their labels. Every other point takes the cluster of
/// the nearest clustered sample point within `radius`, ties broken toward
/// the lower cluster id, and becomes an outlier when no clustered sample
/// point is that close. Each cluster keeps at least its sampled members, so
/// cluster ids survive unchanged.
pub fn assign_by_envelope(
    full: &PlanarPointSet,
    sample: &ClusterLabeling,
    sample_map: &[usize],
    radius: f64,
) -> Result<ClusterLabeling> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be positive and finite, got {radius}"),
        });
    }
    if sample.len() != sample_map.len() {
        return Err(Error::SizeMismatch { left: sample.len(), right: sample_map.len() });
    }
    let mut sampled_pos: HashMap<usize, usize> = HashMap::with_capacity(sample_map.len());
    for (s, &orig) in sample_map.iter().enumerate() {
        if orig >= full.len() {
            return Err(Error::InvalidParameter {
                name: "sample_map",
                reason: format!("index {orig} is out of bounds for {} points", full.len()),
            });
        }
        if sampled_pos.insert(orig, s).is_some() {
            return Err(Error::InvalidParameter {
                name: "sample_map",
                reason: format!("index {orig} appears twice"),
            });
        }
    }

    // Anchors: clustered sample points only. Outlier samples attract nothing.
    let mut anchor_pts: Vec<PlanarPoint> = Vec::new();
    let mut anchor_ids: Vec<u32> = Vec::new();
    for (s, &orig) in sample_map.iter().enumerate() {
        if let Label::Cluster(id) = sample.label(s) {
            anchor_pts.push(full.point(orig));
            anchor_ids.push(id);
        }
    }
    let grid = if anchor_pts.is_empty() {
        None
    } else {
        Some(SpatialIndex::build(&anchor_pts, radius))
    };

    let assigned: Vec<(Label, Provenance)> = (0..full.len())
        .into_par_iter()
        .map(|i| {
            if let Some(&s) = sampled_pos.get(&i) {
                return (sample.label(s), Provenance::Sampled);
            }
            let Some(grid) = &grid else {
                return (Label::Outlier, Provenance::EnvelopeAssigned);
            };
            let p = full.point(i);
            let mut best: Option<(f64, u32)> = None;
            for a in grid.radius_query(p, radius) {
                let d = distance(p, anchor_pts[a]);
                let id = anchor_ids[a];
                let better = match best {
                    None => true,
                    Some((bd, bid)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    best = Some((d, id));
                }
            }
            match best {
                Some((_, id)) => (Label::Cluster(id), Provenance::EnvelopeAssigned),
                None => (Label::Outlier, Provenance::EnvelopeAssigned),
            }
        })
        .collect();

    let (labels, provenance) = assigned.into_iter().unzip();
    ClusterLabeling::new(labels, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_set(coords: &[(f64, f64)]) -> PlanarPointSet {
        let pts = coords.iter().map(|&(x, y)| PlanarPoint::new(x, y)).collect();
        PlanarPointSet::from_points(pts).unwrap()
    }

    fn labeling(labels: Vec<Label>) -> ClusterLabeling {
        let prov = vec![Provenance::Sampled; labels.len()];
        ClusterLabeling::new(labels, prov).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_sorted() {
        let ps = point_set(&(0..200).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let (s1, m1) = sample_points(&ps, 50, 9).unwrap();
        let (s2, m2) = sample_points(&ps, 50, 9).unwrap();
        assert_eq!(m1, m2);
        assert!(m1.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s1.len(), 50);
        for (s, &orig) in m1.iter().enumerate() {
            assert_eq!(s1.point(s), ps.point(orig));
            assert_eq!(s2.point(s), ps.point(orig));
        }
    }

    #[test]
    fn different_seeds_differ() {
        let ps = point_set(&(0..200).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let (_, m1) = sample_points(&ps, 50, 1).unwrap();
        let (_, m2) = sample_points(&ps, 50, 2).unwrap();
        assert_ne!(m1, m2);
    }

    #[test]
    fn sample_size_bounds_are_enforced() {
        let ps = point_set(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(
            sample_points(&ps, 3, 0).unwrap_err(),
            Error::SampleTooLarge { requested: 3, available: 2 }
        ));
        assert!(matches!(
            sample_points(&ps, 0, 0).unwrap_err(),
            Error::InvalidParameter { name: "n_sample", .. }
        ));
        let (_, m) = sample_points(&ps, 2, 0).unwrap();
        assert_eq!(m, vec![0, 1]);
    }

    #[test]
    fn envelope_assigns_within_radius_only() {
        // Sampled: 0 (cluster 1), 1 (cluster 2). Unsampled: 2 near cluster 1,
        // 3 far from everything.
        let full = point_set(&[(0.0, 0.0), (100.0, 0.0), (3.0, 0.0), (50.0, 0.0)]);
        let sample = labeling(vec![Label::Cluster(1), Label::Cluster(2)]);
        let out = assign_by_envelope(&full, &sample, &[0, 1], 5.0).unwrap();
        assert_eq!(out.label(0), Label::Cluster(1));
        assert_eq!(out.label(1), Label::Cluster(2));
        assert_eq!(out.label(2), Label::Cluster(1));
        assert_eq!(out.label(3), Label::Outlier);
        assert_eq!(out.provenance()[0], Provenance::Sampled);
        assert_eq!(out.provenance()[2], Provenance::EnvelopeAssigned);
        assert_eq!(out.provenance()[3], Provenance::EnvelopeAssigned);
        assert_eq!(out.n_clusters(), 2);
    }

    #[test]
    fn nearest_anchor_wins() {
        let full = point_set(&[(0.0, 0.0), (10.0, 0.0), (6.0, 0.0)]);
        let sample = labeling(vec![Label::Cluster(1), Label::Cluster(2)]);
        let out = assign_by_envelope(&full, &sample, &[0, 1], 100.0).unwrap();
        assert_eq!(out.label(2), Label::Cluster(2));
    }

    #[test]
    fn distance_tie_prefers_lower_cluster_id() {
        // The cluster 2 anchor comes first in sample order; the tie must be
        // broken by cluster id, not anchor order.
        let full = point_set(&[(10.0, 0.0), (0.0, 0.0), (5.0, 0.0)]);
        let sample = labeling(vec![Label::Cluster(2), Label::Cluster(1)]);
        let out = assign_by_envelope(&full, &sample, &[0, 1], 100.0).unwrap();
        assert_eq!(out.label(2), Label::Cluster(1));
    }

    #[test]
    fn outlier_samples_attract_nothing() {
        let full = point_set(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let sample = labeling(vec![Label::Outlier, Label::Outlier]);
        let out = assign_by_envelope(&full, &sample, &[0, 1], 10.0).unwrap();
        assert!(out.labels().iter().all(|l| l.is_outlier()));
        assert_eq!(out.provenance()[1], Provenance::Sampled);
        assert_eq!(out.provenance()[2], Provenance::EnvelopeAssigned);
        assert_eq!(out.n_clusters(), 0);
    }

    #[test]
    fn sampled_points_keep_labels_near_other_clusters() {
        // Sample point 1 sits inside cluster 2's envelope but keeps its own
        // sampled label.
        let full = point_set(&[(0.0, 0.0), (0.5, 0.0)]);
        let sample = labeling(vec![Label::Cluster(2), Label::Cluster(1)]);
        let out = assign_by_envelope(&full, &sample, &[0, 1], 10.0).unwrap();
        assert_eq!(out.label(1), Label::Cluster(1));
        assert_eq!(out.provenance()[1], Provenance::Sampled);
    }

    #[test]
    fn envelope_radius_must_be_positive() {
        let full = point_set(&[(0.0, 0.0), (1.0, 0.0)]);
        let sample = labeling(vec![Label::Cluster(1)]);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(assign_by_envelope(&full, &sample, &[0], bad).is_err());
        }
    }

    #[test]
    fn duplicate_sample_indices_are_rejected() {
        let full = point_set(&[(0.0, 0.0), (1.0, 0.0)]);
        let sample = labeling(vec![Label::Cluster(1), Label::Cluster(1)]);
        let err = assign_by_envelope(&full, &sample, &[0, 0], 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "sample_map", .. }));
    }
}
