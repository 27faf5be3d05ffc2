use super::{distance, PlanarPoint, Window};

/// Uniform grid over a point set for fixed-radius and nearest queries.
///
/// The grid is a pure accelerator: queries filter candidates by exact
/// distance, so results match a full scan. Cell size defaults to the query
/// radius the caller plans to use, but is widened when that would allocate
/// absurdly many cells for the point count.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell: f64,
    min_x: f64,
    min_y: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
    points: Vec<PlanarPoint>,
}

impl SpatialIndex {
    pub fn build(points: &[PlanarPoint], cell_size: f64) -> Self {
        assert!(cell_size.is_finite() && cell_size > 0.0, "cell size must be positive");
        let window = bounding(points);
        // Keep the table at a sane multiple of the point count.
        let max_cells = 4 * points.len().max(16);
        let mut cell = cell_size;
        loop {
            let cols = grid_extent(window.width(), cell);
            let rows = grid_extent(window.height(), cell);
            if cols.saturating_mul(rows) <= max_cells {
                let mut cells = vec![Vec::new(); cols * rows];
                for (id, p) in points.iter().enumerate() {
                    let c = cell_of(p.x, window.min_x, cell, cols);
                    let r = cell_of(p.y, window.min_y, cell, rows);
                    cells[r * cols + c].push(id as u32);
                }
                return Self {
                    cell,
                    min_x: window.min_x,
                    min_y: window.min_y,
                    cols,
                    rows,
                    cells,
                    points: points.to_vec(),
                };
            }
            cell *= 2.0;
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ids of all points within the closed ball of radius `r`, ascending.
    pub fn radius_query(&self, center: PlanarPoint, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.scan_range(center, r, |id, d| {
            if d <= r {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    /// Nearest point to `center`, optionally ignoring one id. Distance ties
    /// resolve to the lowest id. None only when no eligible point exists.
    pub fn nearest(&self, center: PlanarPoint, skip: Option<usize>) -> Option<(usize, f64)> {
        if self.points.is_empty() || (self.points.len() == 1 && skip == Some(0)) {
            return None;
        }
        let mut r = self.cell;
        let reach = self.max_reach(center);
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.scan_range(center, r, |id, d| {
                if Some(id) == skip || d > r {
                    return;
                }
                let better = match best {
                    None => true,
                    Some((bid, bd)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    best = Some((id, d));
                }
            });
            if best.is_some() {
                return best;
            }
            if r >= reach {
                return None;
            }
            r *= 2.0;
        }
    }

    /// Calls `f(id, distance)` for every point in cells overlapping the ball.
    fn scan_range(&self, center: PlanarPoint, r: f64, mut f: impl FnMut(usize, f64)) {
        if self.points.is_empty() {
            return;
        }
        let (c_lo, c_hi) = self.axis_range(center.x - self.min_x, r, self.cols);
        let (r_lo, r_hi) = self.axis_range(center.y - self.min_y, r, self.rows);
        for row in r_lo..=r_hi {
            for col in c_lo..=c_hi {
                for &id in &self.cells[row * self.cols + col] {
                    let id = id as usize;
                    f(id, distance(center, self.points[id]));
                }
            }
        }
    }

    fn axis_range(&self, offset: f64, r: f64, extent: usize) -> (usize, usize) {
        let lo = ((offset - r) / self.cell).floor().max(0.0) as usize;
        let hi = ((offset + r) / self.cell).floor().max(0.0) as usize;
        (lo.min(extent - 1), hi.min(extent - 1))
    }

    /// Distance from `center` beyond which no indexed point can lie.
    fn max_reach(&self, center: PlanarPoint) -> f64 {
        let far_x = (center.x - self.min_x).abs().max(
            (self.min_x + self.cols as f64 * self.cell - center.x).abs(),
        );
        let far_y = (center.y - self.min_y).abs().max(
            (self.min_y + self.rows as f64 * self.cell - center.y).abs(),
        );
        (far_x * far_x + far_y * far_y).sqrt() + self.cell
    }
}

fn bounding(points: &[PlanarPoint]) -> Window {
    if points.is_empty() {
        return Window::new(0.0, 0.0, 0.0, 0.0);
    }
    let mut w = Window::new(points[0].x, points[0].y, points[0].x, points[0].y);
    for p in points {
        w.min_x = w.min_x.min(p.x);
        w.min_y = w.min_y.min(p.y);
        w.max_x = w.max_x.max(p.x);
        w.max_y = w.max_y.max(p.y);
    }
    w
}

fn grid_extent(span: f64, cell: f64) -> usize {
    (span / cell).floor() as usize + 1
}

fn cell_of(v: f64, min: f64, cell: f64, extent: usize) -> usize {
    (((v - min) / cell).floor() as usize).min(extent - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(seed: u64, n: usize) -> Vec<PlanarPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| PlanarPoint::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
            .collect()
    }

    fn brute_radius(points: &[PlanarPoint], center: PlanarPoint, r: f64) -> Vec<usize> {
        (0..points.len()).filter(|&i| distance(center, points[i]) <= r).collect()
    }

    #[test]
    fn radius_query_matches_full_scan() {
        for seed in 0..5 {
            let pts = random_cloud(seed, 400);
            let idx = SpatialIndex::build(&pts, 50.0);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            for _ in 0..50 {
                let c = PlanarPoint::new(
                    rng.random_range(-100.0..1100.0),
                    rng.random_range(-100.0..1100.0),
                );
                let r = rng.random_range(1.0..300.0);
                assert_eq!(idx.radius_query(c, r), brute_radius(&pts, c, r));
            }
        }
    }

    #[test]
    fn closed_ball_includes_boundary() {
        let pts = vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(10.0, 0.0)];
        let idx = SpatialIndex::build(&pts, 10.0);
        assert_eq!(idx.radius_query(PlanarPoint::new(0.0, 0.0), 10.0), vec![0, 1]);
        assert_eq!(idx.radius_query(PlanarPoint::new(0.0, 0.0), 9.999), vec![0]);
    }

    #[test]
    fn nearest_matches_full_scan() {
        let pts = random_cloud(7, 300);
        let idx = SpatialIndex::build(&pts, 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..100 {
            let c = PlanarPoint::new(
                rng.random_range(-200.0..1200.0),
                rng.random_range(-200.0..1200.0),
            );
            let (id, d) = idx.nearest(c, None).unwrap();
            let want = (0..pts.len())
                .map(|i| (distance(c, pts[i]), i))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            assert_eq!((id, d), (want.1, want.0));
        }
    }

    #[test]
    fn nearest_skip_excludes_self() {
        let pts = vec![
            PlanarPoint::new(0.0, 0.0),
            PlanarPoint::new(5.0, 0.0),
            PlanarPoint::new(900.0, 900.0),
        ];
        let idx = SpatialIndex::build(&pts, 10.0);
        let (id, d) = idx.nearest(pts[0], Some(0)).unwrap();
        assert_eq!((id, d), (1, 5.0));
        let lone = SpatialIndex::build(&pts[..1], 10.0);
        assert!(lone.nearest(pts[0], Some(0)).is_none());
    }

    #[test]
    fn coincident_points_all_returned() {
        let pts = vec![PlanarPoint::new(1.0, 1.0); 4];
        let idx = SpatialIndex::build(&pts, 5.0);
        assert_eq!(idx.radius_query(PlanarPoint::new(1.0, 1.0), 0.0), vec![0, 1, 2, 3]);
        assert_eq!(idx.nearest(PlanarPoint::new(1.0, 1.0), Some(0)).unwrap(), (1, 0.0));
    }

    #[test]
    fn far_query_center_is_empty_but_safe() {
        let pts = random_cloud(3, 50);
        let idx = SpatialIndex::build(&pts, 20.0);
        assert!(idx.radius_query(PlanarPoint::new(1e7, 1e7), 10.0).is_empty());
        assert!(idx.nearest(PlanarPoint::new(1e7, 1e7), None).is_some());
    }
}
