//! Planar geometry over projected incident coordinates.
//!
//! Coordinates arrive as WGS84 latitude/longitude and are projected onto a
//! local tangent plane (equirectangular about the data centroid), after which
//! everything downstream works in meters. The projection is only valid for
//! city-scale extents; `project` rejects inputs spreading 5 degrees or more.

mod index;
mod matrix;

pub use index::SpatialIndex;
pub use matrix::{
    pairwise_distances, pairwise_distances_with_budget, DistanceMatrix, DEFAULT_MATRIX_BUDGET,
};

use serde::{Deserialize, Serialize};

use crate::ingest::IncidentRecord;
use crate::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maximum latitude/longitude spread accepted by `project`, in degrees.
pub const MAX_SPREAD_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Euclidean distance in meters.
pub fn distance(p: PlanarPoint, q: PlanarPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned bounding rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Window {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        assert!(min_x <= max_x && min_y <= max_y, "inverted window");
        Self { min_x, min_y, max_x, max_y }
    }

    pub(crate) fn around(points: &[PlanarPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut w = Window::new(points[0].x, points[0].y, points[0].x, points[0].y);
        for p in points {
            w.min_x = w.min_x.min(p.x);
            w.min_y = w.min_y.min(p.y);
            w.max_x = w.max_x.max(p.x);
            w.max_y = w.max_y.max(p.y);
        }
        Ok(w)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: PlanarPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// Geographic anchor of a projected point set: the centroid the plane is
/// tangent at, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

/// Points on the projection plane together with their bounding window.
///
/// The window always contains every point; it is the tight bounding box
/// unless a larger one was supplied explicitly (synthetic processes keep
/// their sampling window).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPointSet {
    points: Vec<PlanarPoint>,
    window: Window,
    origin: Option<GeoOrigin>,
}

impl PlanarPointSet {
    /// Wraps points with their tight bounding box. Errors on empty input.
    pub fn from_points(points: Vec<PlanarPoint>) -> Result<Self> {
        let window = Window::around(&points)?;
        Ok(Self { points, window, origin: None })
    }

    /// Wraps points with an explicit window, which must contain them all.
    pub fn with_window(points: Vec<PlanarPoint>, window: Window) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("point ({}, {}) lies outside the window", p.x, p.y),
            });
        }
        Ok(Self { points, window, origin: None })
    }

    pub fn set_origin(&mut self, origin: Option<GeoOrigin>) {
        self.origin = origin;
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> PlanarPoint {
        self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn origin(&self) -> Option<GeoOrigin> {
        self.origin
    }

    /// New set holding the points at `indices`, with a tight window.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points: Vec<PlanarPoint> = indices.iter().map(|&i| self.points[i]).collect();
        let window = Window::around(&points)?;
        Ok(Self { points, window, origin: self.origin })
    }
}

/// Projects records onto a plane tangent at the coordinate centroid.
///
/// x = R * (lon - lon0) * cos(lat0) * pi/180, y = R * (lat - lat0) * pi/180.
/// Valid at city scale; errors when the input is empty or latitude or
/// longitude spread is 5 degrees or more.
pub fn project(records: &[IncidentRecord]) -> Result<PlanarPointSet> {
    let coords: Vec<(f64, f64)> = records.iter().map(|r| (r.lat, r.lon)).collect();
    project_latlon(&coords)
}

/// `project` over raw (lat, lon) pairs in degrees.
pub fn project_latlon(coords: &[(f64, f64)]) -> Result<PlanarPointSet> {
    if coords.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = coords.len() as f64;
    let lat0 = coords.iter().map(|c| c.0).sum::<f64>() / n;
    let lon0 = coords.iter().map(|c| c.1).sum::<f64>() / n;

    let lat_spread = spread(coords.iter().map(|c| c.0));
    let lon_spread = spread(coords.iter().map(|c| c.1));
    let worst = lat_spread.max(lon_spread);
    if worst >= MAX_SPREAD_DEG {
        return Err(Error::SpreadTooLarge { spread: worst, limit: MAX_SPREAD_DEG });
    }

    let cos_lat0 = lat0.to_radians().cos();
    let deg = std::f64::consts::PI / 180.0;
    let points = coords
        .iter()
        .map(|&(lat, lon)| {
            PlanarPoint::new(
                EARTH_RADIUS_M * (lon - lon0) * cos_lat0 * deg,
                EARTH_RADIUS_M * (lat - lat0) * deg,
            )
        })
        .collect();
    let mut ps = PlanarPointSet::from_points(points)?;
    ps.set_origin(Some(GeoOrigin { lat: lat0, lon: lon0 }));
    Ok(ps)
}

/// Inverse of `project` for a single planar point, in degrees.
pub fn unproject(origin: GeoOrigin, p: PlanarPoint) -> (f64, f64) {
    let deg = std::f64::consts::PI / 180.0;
    let cos_lat0 = origin.lat.to_radians().cos();
    let lat = origin.lat + p.y / (EARTH_RADIUS_M * deg);
    let lon = origin.lon + p.x / (EARTH_RADIUS_M * cos_lat0 * deg);
    (lat, lon)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    max - min
}
