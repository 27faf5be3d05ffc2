//! Hot spot analysis for geocoded incident data.
//!
//! The library covers the full analysis chain: ingesting incident CSVs,
//! projecting coordinates onto a local plane, estimating per-point density,
//! rescaling pairwise distances so that cluster detection adapts to local
//! density, DBSCAN clustering with an envelope step that labels the rest of
//! the data, spatial uniformity statistics (empty-space F, nearest-neighbour
//! G, two-point correlation), and tabular reports over the labeled data.

pub mod cluster;
pub mod density;
mod error;
pub mod geometry;
pub mod ingest;
pub mod report;
pub mod spatstat;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
