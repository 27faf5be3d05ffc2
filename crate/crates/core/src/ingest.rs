//! Incident CSV ingestion.
//!
//! Reads city data portal exports (comma-separated, double-quote quoting,
//! UTF-8) in a single streaming pass. Each data row is either kept or
//! counted in exactly one drop bucket, so
//! `rows_read = rows_kept + rows_dropped_missing + rows_dropped_unmapped_type`
//! always holds. Rows with a missing or unparseable required field (year,
//! latitude, longitude, or an empty type string) count as missing; rows whose
//! nonempty type does not map to one of the eight tracked offense types count
//! as unmapped. Coordinates recorded as (0, 0) are sentinel values for
//! missing geocodes and count as missing, as do years outside the configured
//! range.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The eight tracked offense types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrimeType {
    Robbery,
    Theft,
    Burglary,
    MotorVehicleTheft,
    Assault,
    CriminalSexualAssault,
    Arson,
    Homicide,
}

impl CrimeType {
    pub const ALL: [CrimeType; 8] = [
        CrimeType::Robbery,
        CrimeType::Theft,
        CrimeType::Burglary,
        CrimeType::MotorVehicleTheft,
        CrimeType::Assault,
        CrimeType::CriminalSexualAssault,
        CrimeType::Arson,
        CrimeType::Homicide,
    ];

    /// Canonical portal spelling.
    pub fn portal_name(self) -> &'static str {
        match self {
            CrimeType::Robbery => "ROBBERY",
            CrimeType::Theft => "THEFT",
            CrimeType::Burglary => "BURGLARY",
            CrimeType::MotorVehicleTheft => "MOTOR VEHICLE THEFT",
            CrimeType::Assault => "ASSAULT",
            CrimeType::CriminalSexualAssault => "CRIMINAL SEXUAL ASSAULT",
            CrimeType::Arson => "ARSON",
            CrimeType::Homicide => "HOMICIDE",
        }
    }

    /// Two-letter column code used in report tables.
    pub fn code(self) -> &'static str {
        match self {
            CrimeType::Robbery => "RO",
            CrimeType::Theft => "TH",
            CrimeType::Burglary => "BU",
            CrimeType::MotorVehicleTheft => "MO",
            CrimeType::Assault => "AS",
            CrimeType::CriminalSexualAssault => "CR",
            CrimeType::Arson => "AR",
            CrimeType::Homicide => "HO",
        }
    }

    pub fn variant_name(self) -> &'static str {
        match self {
            CrimeType::Robbery => "Robbery",
            CrimeType::Theft => "Theft",
            CrimeType::Burglary => "Burglary",
            CrimeType::MotorVehicleTheft => "MotorVehicleTheft",
            CrimeType::Assault => "Assault",
            CrimeType::CriminalSexualAssault => "CriminalSexualAssault",
            CrimeType::Arson => "Arson",
            CrimeType::Homicide => "Homicide",
        }
    }

    /// Column key used in CSV headers and JSON reports.
    pub fn snake_name(self) -> &'static str {
        match self {
            CrimeType::Robbery => "robbery",
            CrimeType::Theft => "theft",
            CrimeType::Burglary => "burglary",
            CrimeType::MotorVehicleTheft => "motor_vehicle_theft",
            CrimeType::Assault => "assault",
            CrimeType::CriminalSexualAssault => "criminal_sexual_assault",
            CrimeType::Arson => "arson",
            CrimeType::Homicide => "homicide",
        }
    }

    /// Index into `ALL`.
    pub fn ordinal(self) -> usize {
        CrimeType::ALL.iter().position(|t| *t == self).unwrap()
    }
}

impl FromStr for CrimeType {
    type Err = Error;

    /// Accepts the variant name, the snake_case name, or the portal
    /// spelling, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let key = normalize_key(&s.replace('_', " "));
        for t in CrimeType::ALL {
            if key == t.portal_name() || key.eq_ignore_ascii_case(t.variant_name()) {
                return Ok(t);
            }
        }
        Err(Error::InvalidParameter { name: "crime type", reason: format!("unknown type `{s}`") })
    }
}

/// One kept incident. Coordinates are WGS84 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub year: i32,
    pub crime_type: CrimeType,
    pub lat: f64,
    pub lon: f64,
}

/// Raw type string -> offense type table, keyed case- and
/// whitespace-insensitively. The default table maps the canonical portal
/// spellings plus the historical "CRIM SEXUAL ASSAULT" alias, which merges
/// into `CriminalSexualAssault`.
#[derive(Debug, Clone)]
pub struct TypeMap {
    entries: HashMap<String, CrimeType>,
}

impl Default for TypeMap {
    fn default() -> Self {
        let mut map = Self { entries: HashMap::new() };
        for t in CrimeType::ALL {
            map.insert(t.portal_name(), t);
        }
        map.insert("CRIM SEXUAL ASSAULT", CrimeType::CriminalSexualAssault);
        map
    }
}

impl TypeMap {
    pub fn empty() -> Self {
        Self { entries: HashMap::new() }
    }

    pub fn insert(&mut self, raw: &str, ty: CrimeType) {
        self.entries.insert(normalize_key(raw), ty);
    }

    pub fn lookup(&self, raw: &str) -> Option<CrimeType> {
        self.entries.get(&normalize_key(raw)).copied()
    }
}

/// Maps a raw type string through the table; `None` means unmapped.
pub fn normalize_crime_type(raw: &str, map: &TypeMap) -> Option<CrimeType> {
    map.lookup(raw)
}

fn normalize_key(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase()
}

/// Per-run ingest accounting. `rows_read` counts data rows, header excluded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_dropped_missing: u64,
    pub rows_dropped_unmapped_type: u64,
    pub alias_merges: u64,
}

impl IngestStats {
    /// Every row lands in exactly one bucket.
    pub fn conserved(&self) -> bool {
        self.rows_read
            == self.rows_kept + self.rows_dropped_missing + self.rows_dropped_unmapped_type
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub col_year: String,
    pub col_type: String,
    pub col_lat: String,
    pub col_lon: String,
    pub year_min: i32,
    pub year_max: i32,
    pub type_map: TypeMap,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            col_year: "Year".into(),
            col_type: "Primary Type".into(),
            col_lat: "Latitude".into(),
            col_lon: "Longitude".into(),
            year_min: 2001,
            year_max: 2022,
            type_map: TypeMap::default(),
        }
    }
}

/// Streams a portal CSV, returning kept records in input order plus counts.
///
/// Missing required columns are fatal; everything else is per-row
/// accounting. Memory stays proportional to the kept output.
pub fn parse_incidents(
    reader: impl Read,
    cfg: &IngestConfig,
) -> Result<(Vec<IncidentRecord>, IngestStats)> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let year_idx = col(&cfg.col_year)?;
    let type_idx = col(&cfg.col_type)?;
    let lat_idx = col(&cfg.col_lat)?;
    let lon_idx = col(&cfg.col_lon)?;

    let mut records = Vec::new();
    let mut stats = IngestStats::default();

    for row in csv_reader.records() {
        stats.rows_read += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                // Unreadable row (bad UTF-8 and similar): fields are missing.
                stats.rows_dropped_missing += 1;
                continue;
            }
        };
        let field = |i: usize| row.get(i).unwrap_or("").trim();

        let year = match field(year_idx).parse::<i32>() {
            Ok(y) if y >= cfg.year_min && y <= cfg.year_max => y,
            _ => {
                stats.rows_dropped_missing += 1;
                continue;
            }
        };
        let lat = field(lat_idx).parse::<f64>();
        let lon = field(lon_idx).parse::<f64>();
        let (lat, lon) = match (lat, lon) {
            (Ok(la), Ok(lo))
                if la.is_finite()
                    && lo.is_finite()
                    && la.abs() <= 90.0
                    && lo.abs() <= 180.0
                    && !(la == 0.0 && lo == 0.0) =>
            {
                (la, lo)
            }
            _ => {
                stats.rows_dropped_missing += 1;
                continue;
            }
        };
        let raw_type = field(type_idx);
        if raw_type.is_empty() {
            stats.rows_dropped_missing += 1;
            continue;
        }
        let Some(crime_type) = normalize_crime_type(raw_type, &cfg.type_map) else {
            stats.rows_dropped_unmapped_type += 1;
            continue;
        };
        if normalize_key(raw_type) != crime_type.portal_name() {
            stats.alias_merges += 1;
        }
        stats.rows_kept += 1;
        records.push(IncidentRecord { year, crime_type, lat, lon });
    }
    debug_assert!(stats.conserved());
    Ok((records, stats))
}

/// Writes records in the portal column layout. Floats print in shortest
/// round-trip form, so `parse_incidents` on the output reproduces the input
/// records exactly with zero drops.
pub fn write_incidents_csv(records: &[IncidentRecord], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Year", "Primary Type", "Latitude", "Longitude"])?;
    for r in records {
        w.write_record([
            r.year.to_string(),
            r.crime_type.portal_name().to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ID,Year,Primary Type,Latitude,Longitude\n";

    fn parse(body: &str) -> (Vec<IncidentRecord>, IngestStats) {
        let input = format!("{HEADER}{body}");
        parse_incidents(input.as_bytes(), &IngestConfig::default()).unwrap()
    }

    #[test]
    fn six_row_fixture_accounting() {
        let (records, stats) = parse(
            "1,2005,THEFT,41.8,-87.6\n\
             2,2006,ROBBERY,41.9,-87.7\n\
             3,2007,HOMICIDE,,-87.6\n\
             4,2008,BATTERY,41.8,-87.6\n\
             5,2009,ARSON,41.7,-87.5\n\
             6,2010,ASSAULT,41.6,-87.4\n",
        );
        assert_eq!(records.len(), 4);
        assert_eq!(stats.rows_read, 6);
        assert_eq!(stats.rows_kept, 4);
        assert_eq!(stats.rows_dropped_missing, 1);
        assert_eq!(stats.rows_dropped_unmapped_type, 1);
        assert!(stats.conserved());
    }

    #[test]
    fn alias_spellings_merge() {
        let (records, stats) = parse(
            "1,2005,CRIM SEXUAL ASSAULT,41.8,-87.6\n\
             2,2005,CRIMINAL SEXUAL ASSAULT,41.8,-87.6\n",
        );
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r.crime_type == CrimeType::CriminalSexualAssault));
        assert_eq!(stats.alias_merges, 1);
    }

    #[test]
    fn type_matching_ignores_case_and_spacing() {
        let map = TypeMap::default();
        assert_eq!(normalize_crime_type("theft", &map), Some(CrimeType::Theft));
        assert_eq!(normalize_crime_type("  Theft  ", &map), Some(CrimeType::Theft));
        assert_eq!(
            normalize_crime_type("motor  vehicle\ttheft", &map),
            Some(CrimeType::MotorVehicleTheft)
        );
        assert_eq!(normalize_crime_type("BATTERY", &map), None);
    }

    #[test]
    fn zero_zero_coordinates_are_missing() {
        let (records, stats) = parse("1,2005,THEFT,0,0\n2,2005,THEFT,0.0,0.0\n");
        assert!(records.is_empty());
        assert_eq!(stats.rows_dropped_missing, 2);
    }

    #[test]
    fn out_of_range_rows_are_missing() {
        // Year outside [2001, 2022], then latitude beyond 90.
        let (records, stats) = parse("1,1999,THEFT,41.8,-87.6\n2,2005,THEFT,95.0,-87.6\n");
        assert!(records.is_empty());
        assert_eq!(stats.rows_dropped_missing, 2);
    }

    #[test]
    fn empty_type_field_counts_as_missing() {
        let (_, stats) = parse("1,2005,,41.8,-87.6\n");
        assert_eq!(stats.rows_dropped_missing, 1);
        assert_eq!(stats.rows_dropped_unmapped_type, 0);
    }

    #[test]
    fn unparseable_latitude_is_missing() {
        let (_, stats) = parse("1,2005,THEFT,not-a-number,-87.6\n");
        assert_eq!(stats.rows_dropped_missing, 1);
    }

    #[test]
    fn header_only_input_yields_zero_stats() {
        let (records, stats) =
            parse_incidents(HEADER.as_bytes(), &IngestConfig::default()).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn missing_required_column_is_fatal() {
        let err =
            parse_incidents("Year,Latitude,Longitude\n".as_bytes(), &IngestConfig::default())
                .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "Primary Type"));
    }

    #[test]
    fn quoted_fields_parse() {
        let (records, _) = parse("1,2005,\"THEFT\",\"41.8\",\"-87.6\"\n");
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn serialization_round_trips_losslessly() {
        let (records, _) = parse(
            "1,2005,THEFT,41.812345678901234,-87.698765432109876\n\
             2,2011,CRIM SEXUAL ASSAULT,41.9,-87.7\n\
             3,2022,HOMICIDE,41.65001,-87.54999\n",
        );
        let mut buf = Vec::new();
        write_incidents_csv(&records, &mut buf).unwrap();
        let (back, stats) =
            parse_incidents(buf.as_slice(), &IngestConfig::default()).unwrap();
        assert_eq!(records, back);
        assert_eq!(stats.rows_read, stats.rows_kept);
        assert_eq!(stats.alias_merges, 0);
    }

    #[test]
    fn crime_type_from_str_accepts_both_spellings() {
        assert_eq!("MOTOR VEHICLE THEFT".parse::<CrimeType>().unwrap(), CrimeType::MotorVehicleTheft);
        assert_eq!("MotorVehicleTheft".parse::<CrimeType>().unwrap(), CrimeType::MotorVehicleTheft);
        assert!("MAYHEM".parse::<CrimeType>().is_err());
    }

    #[test]
    fn stats_serialize_flat() {
        let stats = IngestStats {
            rows_read: 6,
            rows_kept: 4,
            rows_dropped_missing: 1,
            rows_dropped_unmapped_type: 1,
            alias_merges: 0,
        };
        let json = serde_json::to_value(&stats).unwrap();
        assert_eq!(json["rows_read"], 6);
        assert_eq!(json["rows_dropped_unmapped_type"], 1);
    }
}
