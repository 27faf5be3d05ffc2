//! Run configuration: a TOML file overlaid by command-line flags.
//!
//! Every knob has a default, so the pipeline runs with nothing but an input
//! path. Flags win over the file, the file wins over defaults. The effective
//! configuration is echoed into the run manifest so a run can be reproduced
//! from its output directory alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hotspot_core::geometry::DEFAULT_MATRIX_BUDGET;
use hotspot_core::ingest::{CrimeType, IngestConfig};
use hotspot_core::report::StdMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Logistic steepness: a fixed value, or derived from the density spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Steepness {
    Adaptive,
    Fixed(f64),
}

impl Default for Steepness {
    fn default() -> Self {
        Self::Adaptive
    }
}

impl FromStr for Steepness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("adaptive") {
            return Ok(Self::Adaptive);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|_| format!("expected \"adaptive\" or a number, got {s:?}"))
    }
}

impl Serialize for Steepness {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Adaptive => ser.serialize_str("adaptive"),
            Self::Fixed(k) => ser.serialize_f64(*k),
        }
    }
}

impl<'de> Deserialize<'de> for Steepness {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Steepness;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("\"adaptive\" or a number")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Steepness, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Steepness, E> {
                Ok(Steepness::Fixed(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Steepness, E> {
                Ok(Steepness::Fixed(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Steepness, E> {
                Ok(Steepness::Fixed(v as f64))
            }
        }
        de.deserialize_any(V)
    }
}

/// Column names in the raw export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Columns {
    pub year: String,
    #[serde(rename = "type")]
    pub crime_type: String,
    pub lat: String,
    pub lon: String,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            year: "Year".into(),
            crime_type: "Primary Type".into(),
            lat: "Latitude".into(),
            lon: "Longitude".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw incident CSV. Required by every data-driven subcommand.
    pub input: Option<PathBuf>,
    /// Output directory for all stage artifacts.
    pub out: PathBuf,
    /// Master seed; stages derive their own seeds from it by fixed offsets.
    pub seed: u64,
    /// Points drawn for the clustering sample. The pairwise matrix needs
    /// 8 * n * (n + 1) / 2 bytes, about 10 GB at the 50,000 default.
    pub sample_size: usize,
    /// Neighborhood radius in rescaled meters.
    pub epsilon: f64,
    /// Minimum neighborhood size, the queried point included.
    pub kappa: usize,
    /// Logistic steepness for density rescaling.
    pub steepness: Steepness,
    /// Label propagation radius in meters.
    pub envelope_radius: f64,
    /// Histogram bin width in meters for every distance curve.
    pub bin_width: f64,
    /// Resampling runs per autocorrelation curve.
    pub runs: usize,
    /// Points per autocorrelation run.
    pub n_sample: usize,
    /// Poisson simulations behind each uniformity band.
    pub sims: usize,
    /// Lattice size for the empty-space statistic.
    pub lattice_points: usize,
    /// Largest radius for the uniformity curves, meters.
    pub ripley_max_radius: f64,
    /// Largest radius for the autocorrelation curves, meters.
    pub correlate_max_radius: f64,
    pub year_min: i32,
    pub year_max: i32,
    /// Denominator convention for yearly standard deviations.
    pub std_mode: StdMode,
    /// Hard cap on pairwise matrix size, in points.
    pub matrix_budget: usize,
    pub columns: Columns,
    /// Extra raw-type spellings, mapped to canonical names like "theft".
    pub type_aliases: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: PathBuf::from("out"),
            seed: 17,
            sample_size: 50_000,
            epsilon: 200.0,
            kappa: 100,
            steepness: Steepness::Adaptive,
            envelope_radius: 10.0,
            bin_width: 10.0,
            runs: 100,
            n_sample: 10_000,
            sims: 100,
            lattice_points: 10_000,
            ripley_max_radius: 200.0,
            correlate_max_radius: 2_000.0,
            year_min: 2001,
            year_max: 2022,
            std_mode: StdMode::Sample,
            matrix_budget: DEFAULT_MATRIX_BUDGET,
            columns: Columns::default(),
            type_aliases: BTreeMap::new(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("epsilon", self.epsilon),
            ("envelope_radius", self.envelope_radius),
            ("bin_width", self.bin_width),
            ("ripley_max_radius", self.ripley_max_radius),
            ("correlate_max_radius", self.correlate_max_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::usage(format!("{name} must be positive, got {v}")));
            }
        }
        if let Steepness::Fixed(k) = self.steepness {
            if !k.is_finite() || k < 0.0 {
                return Err(CliError::usage(format!("steepness must be >= 0, got {k}")));
            }
        }
        let at_least_one = [
            ("sample_size", self.sample_size),
            ("kappa", self.kappa),
            ("runs", self.runs),
            ("n_sample", self.n_sample),
            ("sims", self.sims),
            ("lattice_points", self.lattice_points),
            ("matrix_budget", self.matrix_budget),
        ];
        for (name, v) in at_least_one {
            if v == 0 {
                return Err(CliError::usage(format!("{name} must be at least 1")));
            }
        }
        if self.year_min > self.year_max {
            return Err(CliError::usage(format!(
                "year_min {} exceeds year_max {}",
                self.year_min, self.year_max
            )));
        }
        Ok(())
    }

    /// The ingest view: column names, year range, and the alias table.
    pub fn ingest_config(&self) -> Result<IngestConfig, CliError> {
        let mut cfg = IngestConfig {
            col_year: self.columns.year.clone(),
            col_type: self.columns.crime_type.clone(),
            col_lat: self.columns.lat.clone(),
            col_lon: self.columns.lon.clone(),
            year_min: self.year_min,
            year_max: self.year_max,
            ..IngestConfig::default()
        };
        for (raw, canonical) in &self.type_aliases {
            let ty = CrimeType::from_str(canonical).map_err(|_| {
                CliError::usage(format!(
                    "type_aliases: {canonical:?} is not a known offense type"
                ))
            })?;
            cfg.type_map.insert(raw, ty);
        }
        Ok(cfg)
    }

    /// Years the report tables span.
    pub fn n_years(&self) -> usize {
        (self.year_max - self.year_min) as usize + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_an_empty_document() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.n_years(), 22);
        cfg.validate().unwrap();
    }

    #[test]
    fn steepness_accepts_a_word_or_a_number() {
        let cfg: PipelineConfig = toml::from_str("steepness = \"adaptive\"").unwrap();
        assert_eq!(cfg.steepness, Steepness::Adaptive);
        let cfg: PipelineConfig = toml::from_str("steepness = 1.5").unwrap();
        assert_eq!(cfg.steepness, Steepness::Fixed(1.5));
        let cfg: PipelineConfig = toml::from_str("steepness = 2").unwrap();
        assert_eq!(cfg.steepness, Steepness::Fixed(2.0));
        assert!(toml::from_str::<PipelineConfig>("steepness = \"steep\"").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("epsilonn = 3").is_err());
    }

    #[test]
    fn column_renames_and_aliases_reach_the_ingest_view() {
        let cfg: PipelineConfig = toml::from_str(
            "[columns]\nyear = \"Yr\"\ntype = \"Offense\"\n\n[type_aliases]\n\"PETTY THEFT\" = \"theft\"\n",
        )
        .unwrap();
        let ing = cfg.ingest_config().unwrap();
        assert_eq!(ing.col_year, "Yr");
        assert_eq!(ing.col_type, "Offense");
        assert_eq!(ing.type_map.lookup("petty  theft"), Some(CrimeType::Theft));
    }

    #[test]
    fn bad_alias_target_is_a_usage_error() {
        let cfg: PipelineConfig =
            toml::from_str("[type_aliases]\n\"X\" = \"arson attempt\"\n").unwrap();
        let err = cfg.ingest_config().unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn validation_rejects_nonpositive_knobs() {
        let mut cfg = PipelineConfig::default();
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.kappa = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.year_min = 2030;
        assert!(cfg.validate().is_err());
    }
}
