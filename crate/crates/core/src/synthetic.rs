//! Seeded synthetic point patterns for tests and demos.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{PlanarPoint, PlanarPointSet, Window};
use crate::{Error, Result};

/// Complete spatial randomness: `n` uniform points in the window.
///
/// The result keeps the full sampling window rather than the tight bounding
/// box, so uniformity statistics see the intended region.
pub fn csr(window: Window, n: usize, seed: u64) -> Result<PlanarPointSet> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            PlanarPoint::new(
                uniform_in(&mut rng, window.min_x, window.max_x),
                uniform_in(&mut rng, window.min_y, window.max_y),
            )
        })
        .collect();
    PlanarPointSet::with_window(points, window)
}

/// Isotropic Gaussian blobs, `n_per_blob` points around each center.
pub fn gaussian_blobs(
    centers: &[PlanarPoint],
    sigma: f64,
    n_per_blob: usize,
    seed: u64,
) -> Result<PlanarPointSet> {
    if centers.is_empty() || n_per_blob == 0 {
        return Err(Error::EmptyInput);
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be positive and finite, got {sigma}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut points = Vec::with_capacity(centers.len() * n_per_blob);
    for &c in centers {
        for _ in 0..n_per_blob {
            points.push(PlanarPoint::new(
                c.x + normal.sample(&mut rng),
                c.y + normal.sample(&mut rng),
            ));
        }
    }
    PlanarPointSet::from_points(points)
}

/// Two equal Gaussian blobs a fixed distance apart on the x axis.
pub fn two_blobs(
    separation: f64,
    sigma: f64,
    n_per_blob: usize,
    seed: u64,
) -> Result<PlanarPointSet> {
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::InvalidParameter {
            name: "separation",
            reason: format!("must be positive and finite, got {separation}"),
        });
    }
    let centers = [PlanarPoint::new(0.0, 0.0), PlanarPoint::new(separation, 0.0)];
    gaussian_blobs(&centers, sigma, n_per_blob, seed)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
