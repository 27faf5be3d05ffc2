//! Agreement metrics between two labelings of the same points.
//!
//! Cluster ids are arbitrary, so clusters are matched by majority vote: each
//! left cluster is paired with whichever right category (a cluster id, or
//! the outlier pool) covers most of its members. This quantifies how well a
//! subsample-plus-propagation labeling tracks a direct one.

use std::collections::HashMap;

use serde::Serialize;

use super::ClusterLabeling;
use crate::{Error, Result};

/// One left cluster and the right category that best covers it.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterMatch {
    pub cluster_id: u32,
    pub size: usize,
    /// Best-covering right category; 0 means the outlier pool.
    pub majority_id: u32,
    /// Members falling in that category.
    pub overlap: usize,
    pub share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelingComparison {
    pub n_points: usize,
    pub left_clusters: u32,
    pub right_clusters: u32,
    pub matches: Vec<ClusterMatch>,
    /// Fraction of points whose outlier status agrees across the labelings.
    pub outlier_agreement: f64,
}

/// Majority-vote cluster matching; ties prefer the lowest cluster id, with
/// the outlier pool behind every cluster.
pub fn compare_labelings(
    left: &ClusterLabeling,
    right: &ClusterLabeling,
) -> Result<LabelingComparison> {
    if left.len() != right.len() {
        return Err(Error::SizeMismatch { left: left.len(), right: right.len() });
    }
    if left.is_empty() {
        return Err(Error::EmptyInput);
    }

    let k = left.n_clusters() as usize;
    let mut counts: Vec<HashMap<u32, usize>> = vec![HashMap::new(); k];
    let mut status_agree = 0usize;
    for i in 0..left.len() {
        let (l, r) = (left.label(i), right.label(i));
        if l.is_outlier() == r.is_outlier() {
            status_agree += 1;
        }
        if l.id() > 0 {
            *counts[l.id() as usize - 1].entry(r.id()).or_insert(0) += 1;
        }
    }

    let matches = counts
        .iter()
        .enumerate()
        .map(|(idx, by_category)| {
            let size: usize = by_category.values().sum();
            let (&majority_id, &overlap) = by_category
                .iter()
                .min_by_key(|(&id, &n)| {
                    // Highest count first; outliers (id 0) lose every tie.
                    let rank = if id == 0 { u64::MAX } else { id as u64 };
                    (usize::MAX - n, rank)
                })
                .expect("clusters are nonempty by construction");
            ClusterMatch {
                cluster_id: idx as u32 + 1,
                size,
                majority_id,
                overlap,
                share: overlap as f64 / size as f64,
            }
        })
        .collect();

    Ok(LabelingComparison {
        n_points: left.len(),
        left_clusters: left.n_clusters(),
        right_clusters: right.n_clusters(),
        matches,
        outlier_agreement: status_agree as f64 / left.len() as f64,
    })
}
