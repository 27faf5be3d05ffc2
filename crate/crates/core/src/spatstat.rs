//! Point-pattern uniformity statistics and two-point autocorrelation.
//!
//! Two families live here. Ripley-style distribution functions compare a
//! pattern against complete spatial randomness: the empty-space function F
//! (distances from lattice locations to the nearest incident) and the
//! nearest-neighbor function G (distances between incidents), each bracketed
//! by a Monte Carlo envelope of Poisson simulations. The Landy-Szalay
//! estimator measures pairwise clustering strength per distance bin, with
//! confidence bands taken across repeated subsampled runs.
//!
//! Pair-count conventions are load-bearing: `dd` and `rr` count unordered
//! pairs within one set, `dr` counts ordered cross pairs, and the estimator
//! weights them so that a uniform pattern scores zero. `pair_count` against
//! the same set twice therefore yields `dr = 2 * dd` and an identically zero
//! curve, which the tests pin down.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{distance, PlanarPoint, PlanarPointSet, SpatialIndex, Window};
use crate::stats::percentile_interpolated;
use crate::{Error, Result};

/// Default distance bin width in meters.
pub const DEFAULT_BIN_WIDTH_M: f64 = 10.0;
/// Default lattice size for the empty-space function (a 100 x 100 grid).
pub const DEFAULT_LATTICE_POINTS: usize = 10_000;
/// Smallest lattice allowed for the empty-space function.
pub const MIN_LATTICE_POINTS: usize = 100;

/// Uniform distance bins.
///
/// `r_values` are the bin left edges starting at zero. Pair counting treats
/// bin `i` as the half-open interval `[r_i, r_i + width)`; distribution
/// functions evaluate cumulative `<= r_i` at the same radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiiGrid {
    bin_width: f64,
    /// All edges, `n_bins + 1` of them; the last closes the final bin.
    edges: Vec<f64>,
}

impl RadiiGrid {
    pub fn new(bin_width: f64, n_bins: usize) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "bin_width",
                reason: format!("must be positive and finite, got {bin_width}"),
            });
        }
        if n_bins == 0 {
            return Err(Error::InvalidParameter {
                name: "n_bins",
                reason: "need at least one bin".into(),
            });
        }
        let edges = (0..=n_bins).map(|i| i as f64 * bin_width).collect();
        Ok(Self { bin_width, edges })
    }

    /// Enough bins of `bin_width` to cover distances up to `max_radius`.
    pub fn with_max_radius(bin_width: f64, max_radius: f64) -> Result<Self> {
        if !(max_radius > 0.0) || !max_radius.is_finite() {
            return Err(Error::InvalidParameter {
                name: "max_radius",
                reason: format!("must be positive and finite, got {max_radius}"),
            });
        }
        Self::new(bin_width, (max_radius / bin_width).ceil() as usize)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin left edges, one per bin.
    pub fn r_values(&self) -> &[f64] {
        &self.edges[..self.edges.len() - 1]
    }

    /// Upper edge of the last bin.
    pub fn max_radius(&self) -> f64 {
        *self.edges.last().expect("grid has at least two edges")
    }

    /// Half-open bin lookup; `None` when the distance falls past the grid.
    pub fn bin_of(&self, d: f64) -> Option<usize> {
        let k = self.edges.partition_point(|&e| e <= d);
        if k == 0 || k == self.edges.len() {
            None
        } else {
            Some(k - 1)
        }
    }
}

/// Which distribution function a curve or envelope describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveStatistic {
    /// Empty-space F over a regular lattice of roughly this many locations.
    EmptySpace { lattice_points: usize },
    /// Nearest-neighbor G over the incidents themselves.
    NearestNeighbor,
}

/// A distribution function with its Poisson reference band.
#[derive(Debug, Clone, Serialize)]
pub struct RipleyCurve {
    pub r_values: Vec<f64>,
    pub statistic: CurveStatistic,
    pub empirical: Vec<f64>,
    pub poisson_median: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
}

impl RipleyCurve {
    /// Fraction of radii where the empirical curve sits inside the band.
    pub fn inside_band_share(&self) -> f64 {
        let inside = self
            .empirical
            .iter()
            .zip(&self.band_low)
            .zip(&self.band_high)
            .filter(|((&e, &lo), &hi)| lo <= e && e <= hi)
            .count();
        inside as f64 / self.empirical.len() as f64
    }

    /// Columns: r, empirical, poisson_median, band_low, band_high.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "empirical", "poisson_median", "band_low", "band_high"])?;
        for i in 0..self.r_values.len() {
            w.write_record([
                self.r_values[i].to_string(),
                self.empirical[i].to_string(),
                self.poisson_median[i].to_string(),
                self.band_low[i].to_string(),
                self.band_high[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pointwise median and 95% band over Poisson simulations.
#[derive(Debug, Clone, Serialize)]
pub struct PoissonEnvelope {
    pub median: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
}

/// Per-bin pair counts between a data set and a comparison set.
///
/// `dd` and `rr` count unordered pairs within the respective set; `dr`
/// counts ordered cross pairs, excluding the pair a point forms with itself
/// when the two sets are the same.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCounts {
    pub dd: Vec<u64>,
    pub dr: Vec<u64>,
    pub rr: Vec<u64>,
    pub n_d: usize,
    pub n_r: usize,
}

/// Per-bin autocorrelation averaged over repeated subsampled runs.
///
/// Bins where no run produced a defined estimate (no comparison pairs) carry
/// `None` throughout and are skipped by the CSV writer.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationCurve {
    pub r_values: Vec<f64>,
    pub xi: Vec<Option<f64>>,
    pub ci_low: Vec<Option<f64>>,
    pub ci_high: Vec<Option<f64>>,
    /// max(xi, 0), highlighting positive excess probability.
    pub xi_thresholded: Vec<Option<f64>>,
    /// Mean comparison-pair count per bin, for judging bin reliability.
    pub rr_mean: Vec<f64>,
    pub n_runs: usize,
    pub n_sample: usize,
}

impl CorrelationCurve {
    /// Columns: r, xi, ci_low, ci_high, xi_thresholded, rr_mean. Undefined
    /// bins are omitted.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "xi", "ci_low", "ci_high", "xi_thresholded", "rr_mean"])?;
        for i in 0..self.r_values.len() {
            let (Some(xi), Some(lo), Some(hi), Some(th)) =
                (self.xi[i], self.ci_low[i], self.ci_high[i], self.xi_thresholded[i])
            else {
                continue;
            };
            w.write_record([
                self.r_values[i].to_string(),
                xi.to_string(),
                lo.to_string(),
                hi.to_string(),
                th.to_string(),
                self.rr_mean[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical empty-space function.
///
/// Lays a regular `side x side` lattice over the window with
/// `side = round(sqrt(m))`, measures each lattice location's distance to the
/// nearest incident, and returns the cumulative fraction `<= r` at each grid
/// radius. The divisor is the realized lattice size `side * side`.
pub fn empty_space_f(ps: &PlanarPointSet, grid: &RadiiGrid, m: usize) -> Result<Vec<f64>> {
    if m < MIN_LATTICE_POINTS {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("need at least {MIN_LATTICE_POINTS} lattice points, got {m}"),
        });
    }
    let side = (m as f64).sqrt().round() as usize;
    let w = ps.window();
    let index = SpatialIndex::build(ps.points(), index_cell_size(ps));

    let mut dists: Vec<f64> = (0..side * side)
        .into_par_iter()
        .map(|cell| {
            let (row, col) = (cell / side, cell % side);
            let u = PlanarPoint::new(
                w.min_x + (col as f64 + 0.5) * w.width() / side as f64,
                w.min_y + (row as f64 + 0.5) * w.height() / side as f64,
            );
            let (_, d) = index.nearest(u, None).expect("point set is nonempty");
            d
        })
        .collect();
    dists.sort_unstable_by(f64::total_cmp);
    Ok(cdf_at_radii(&dists, grid))
}

/// Empirical nearest-neighbor function: the cumulative distribution of each
/// incident's distance to its nearest other incident.
pub fn nearest_neighbor_g(ps: &PlanarPointSet, grid: &RadiiGrid) -> Result<Vec<f64>> {
    if ps.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: ps.len() });
    }
    let index = SpatialIndex::build(ps.points(), index_cell_size(ps));
    let mut dists: Vec<f64> = (0..ps.len())
        .into_par_iter()
        .map(|i| {
            let (_, d) = index.nearest(ps.point(i), Some(i)).expect("at least two points");
            d
        })
        .collect();
    dists.sort_unstable_by(f64::total_cmp);
    Ok(cdf_at_radii(&dists, grid))
}

/// Monte Carlo reference band under complete spatial randomness.
///
/// Each simulation places `n_points` uniform points in the window (binomial
/// conditioning on the observed count) and evaluates the statistic; the band
/// is the pointwise median with 2.5 and 97.5 percentiles. Simulation `s`
/// draws from stream `s` of a generator seeded with `seed`, so results are
/// reproducible and independent of scheduling.
pub fn poisson_envelope(
    window: Window,
    n_points: usize,
    grid: &RadiiGrid,
    statistic: CurveStatistic,
    n_sims: usize,
    seed: u64,
) -> Result<PoissonEnvelope> {
    if n_sims == 0 {
        return Err(Error::InvalidParameter {
            name: "n_sims",
            reason: "need at least one simulation".into(),
        });
    }
    let min_points = match statistic {
        CurveStatistic::EmptySpace { .. } => 1,
        CurveStatistic::NearestNeighbor => 2,
    };
    if n_points < min_points {
        return Err(Error::TooFewPoints { needed: min_points, got: n_points });
    }

    let curves: Vec<Vec<f64>> = (0..n_sims)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let pts = uniform_points(&mut rng, window, n_points);
            let ps = PlanarPointSet::with_window(pts, window)?;
            match statistic {
                CurveStatistic::EmptySpace { lattice_points } => {
                    empty_space_f(&ps, grid, lattice_points)
                }
                CurveStatistic::NearestNeighbor => nearest_neighbor_g(&ps, grid),
            }
        })
        .collect::<Result<_>>()?;

    let n_radii = grid.n_bins();
    let mut median = Vec::with_capacity(n_radii);
    let mut band_low = Vec::with_capacity(n_radii);
    let mut band_high = Vec::with_capacity(n_radii);
    for r in 0..n_radii {
        let mut col: Vec<f64> = curves.iter().map(|c| c[r]).collect();
        col.sort_unstable_by(f64::total_cmp);
        band_low.push(percentile_interpolated(&col, 2.5));
        median.push(percentile_interpolated(&col, 50.0));
        band_high.push(percentile_interpolated(&col, 97.5));
    }
    Ok(PoissonEnvelope { median, band_low, band_high })
}

/// Evaluate a distribution function and its Poisson band in one call.
pub fn ripley_curve(
    ps: &PlanarPointSet,
    grid: &RadiiGrid,
    statistic: CurveStatistic,
    n_sims: usize,
    seed: u64,
) -> Result<RipleyCurve> {
    let empirical = match statistic {
        CurveStatistic::EmptySpace { lattice_points } => empty_space_f(ps, grid, lattice_points)?,
        CurveStatistic::NearestNeighbor => nearest_neighbor_g(ps, grid)?,
    };
    let env = poisson_envelope(ps.window(), ps.len(), grid, statistic, n_sims, seed)?;
    Ok(RipleyCurve {
        r_values: grid.r_values().to_vec(),
        statistic,
        empirical,
        poisson_median: env.median,
        band_low: env.band_low,
        band_high: env.band_high,
    })
}

/// Exact per-bin pair counts via the grid index.
pub fn pair_count(d: &PlanarPointSet, r: &PlanarPointSet, grid: &RadiiGrid) -> PairCounts {
    pair_count_points(d.points(), r.points(), grid)
}

fn pair_count_points(d: &[PlanarPoint], r: &[PlanarPoint], grid: &RadiiGrid) -> PairCounts {
    PairCounts {
        dd: bin_pairs_within(d, grid),
        dr: bin_pairs_cross(d, r, grid),
        rr: bin_pairs_within(r, grid),
        n_d: d.len(),
        n_r: r.len(),
    }
}

/// Unordered within-set pairs per bin.
fn bin_pairs_within(points: &[PlanarPoint], grid: &RadiiGrid) -> Vec<u64> {
    let n_bins = grid.n_bins();
    if points.len() < 2 {
        return vec![0; n_bins];
    }
    let index = SpatialIndex::build(points, pair_cell_size(points, grid));
    let max_r = grid.max_radius();
    (0..points.len())
        .into_par_iter()
        .fold(
            || vec![0u64; n_bins],
            |mut acc, i| {
                for j in index.radius_query(points[i], max_r) {
                    if j > i {
                        if let Some(b) = grid.bin_of(distance(points[i], points[j])) {
                            acc[b] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; n_bins], add_bins)
}

/// Ordered cross pairs per bin; a point is never paired with itself, which
/// only matters when both sets are the same.
fn bin_pairs_cross(d: &[PlanarPoint], r: &[PlanarPoint], grid: &RadiiGrid) -> Vec<u64> {
    let n_bins = grid.n_bins();
    if d.is_empty() || r.is_empty() {
        return vec![0; n_bins];
    }
    let index = SpatialIndex::build(r, pair_cell_size(r, grid));
    let max_r = grid.max_radius();
    (0..d.len())
        .into_par_iter()
        .fold(
            || vec![0u64; n_bins],
            |mut acc, i| {
                for j in index.radius_query(d[i], max_r) {
                    if i == j && d[i] == r[j] {
                        continue;
                    }
                    if let Some(b) = grid.bin_of(distance(d[i], r[j])) {
                        acc[b] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; n_bins], add_bins)
}

fn add_bins(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Landy-Szalay autocorrelation for one bin; `None` when the bin has no
/// comparison pairs.
///
/// With `a = n_r / n_d`, computes `(dd * a^2 - dr * a + rr) / rr`. The
/// single `dr` weight pairs with the ordered cross count: against the same
/// set twice `dr = 2 * dd` and `rr = dd`, so the value is exactly zero, and
/// uniform data of any relative size scores zero in expectation up to a
/// `O(1/n)` finite-count bias.
pub fn landy_szalay(counts: &PairCounts, bin: usize) -> Option<f64> {
    assert!(bin < counts.rr.len(), "bin {bin} out of range");
    debug_assert!(counts.n_d > 0, "pair counts need a nonempty data set");
    if counts.rr[bin] == 0 {
        return None;
    }
    let a = counts.n_r as f64 / counts.n_d as f64;
    let (dd, dr, rr) =
        (counts.dd[bin] as f64, counts.dr[bin] as f64, counts.rr[bin] as f64);
    Some((dd * a * a - dr * a + rr) / rr)
}

/// Autocorrelation curve with confidence bounds over repeated runs.
///
/// Each run samples `n_sample` incidents without replacement, draws an
/// equally sized uniform comparison set in the full point set's window, and
/// evaluates the per-bin estimator. Bins aggregate the runs that defined
/// them: mean, 2.5/97.5 percentile bounds, and the zero-thresholded mean.
/// Run `k` uses stream `k` of a generator seeded with `seed`. A sample size
/// above the population logs a warning and uses every point.
pub fn correlation_with_ci(
    ps: &PlanarPointSet,
    grid: &RadiiGrid,
    n_runs: usize,
    n_sample: usize,
    seed: u64,
) -> Result<CorrelationCurve> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter {
            name: "n_runs",
            reason: "need at least one run".into(),
        });
    }
    if n_sample == 0 {
        return Err(Error::InvalidParameter {
            name: "n_sample",
            reason: "must be at least 1".into(),
        });
    }
    let n_sample = if n_sample > ps.len() {
        log::warn!(
            "sample size {n_sample} exceeds population {}; using every point",
            ps.len()
        );
        ps.len()
    } else {
        n_sample
    };
    let window = ps.window();

    let per_run: Vec<(Vec<Option<f64>>, Vec<u64>)> = (0..n_runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut idx = rand::seq::index::sample(&mut rng, ps.len(), n_sample).into_vec();
            idx.sort_unstable();
            let data: Vec<PlanarPoint> = idx.into_iter().map(|i| ps.point(i)).collect();
            let compare = uniform_points(&mut rng, window, n_sample);
            let counts = pair_count_points(&data, &compare, grid);
            let xi = (0..grid.n_bins()).map(|b| landy_szalay(&counts, b)).collect();
            (xi, counts.rr)
        })
        .collect();

    let n_bins = grid.n_bins();
    let mut xi = Vec::with_capacity(n_bins);
    let mut ci_low = Vec::with_capacity(n_bins);
    let mut ci_high = Vec::with_capacity(n_bins);
    let mut xi_thresholded = Vec::with_capacity(n_bins);
    let mut rr_mean = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let mut defined: Vec<f64> =
            per_run.iter().filter_map(|(run_xi, _)| run_xi[b]).collect();
        rr_mean.push(
            per_run.iter().map(|(_, rr)| rr[b] as f64).sum::<f64>() / n_runs as f64,
        );
        if defined.is_empty() {
            xi.push(None);
            ci_low.push(None);
            ci_high.push(None);
            xi_thresholded.push(None);
            continue;
        }
        defined.sort_unstable_by(f64::total_cmp);
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        xi.push(Some(mean));
        ci_low.push(Some(percentile_interpolated(&defined, 2.5)));
        ci_high.push(Some(percentile_interpolated(&defined, 97.5)));
        xi_thresholded.push(Some(mean.max(0.0)));
    }

    Ok(CorrelationCurve {
        r_values: grid.r_values().to_vec(),
        xi,
        ci_low,
        ci_high,
        xi_thresholded,
        rr_mean,
        n_runs,
        n_sample,
    })
}

/// Analytic empty-space curve for a homogeneous Poisson process with
/// intensity `lambda`: `1 - exp(-lambda * pi * r^2)`.
pub fn poisson_empty_space(lambda: f64, r: f64) -> f64 {
    1.0 - (-lambda * std::f64::consts::PI * r * r).exp()
}

fn cdf_at_radii(sorted: &[f64], grid: &RadiiGrid) -> Vec<f64> {
    let n = sorted.len() as f64;
    grid.r_values()
        .iter()
        .map(|&r| sorted.partition_point(|&d| d <= r) as f64 / n)
        .collect()
}

fn uniform_points(rng: &mut ChaCha8Rng, w: Window, n: usize) -> Vec<PlanarPoint> {
    (0..n)
        .map(|_| {
            PlanarPoint::new(
                uniform_in(rng, w.min_x, w.max_x),
                uniform_in(rng, w.min_y, w.max_y),
            )
        })
        .collect()
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Cell size near the mean point spacing, clamped to stay useful.
fn index_cell_size(ps: &PlanarPointSet) -> f64 {
    let w = ps.window();
    let spacing = (w.area() / ps.len() as f64).sqrt();
    if spacing.is_finite() && spacing > 0.0 {
        spacing
    } else {
        1.0
    }
}

fn pair_cell_size(points: &[PlanarPoint], grid: &RadiiGrid) -> f64 {
    let Ok(w) = Window::around(points) else {
        return grid.bin_width();
    };
    let spacing = (w.area() / points.len() as f64).sqrt();
    let cell = spacing.max(grid.bin_width()).min(grid.max_radius());
    if cell.is_finite() && cell > 0.0 {
        cell
    } else {
        grid.bin_width()
    }
}
