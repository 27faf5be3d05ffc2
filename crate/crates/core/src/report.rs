//! Aggregation of labeled incidents into summary tables.
//!
//! Everything here is exact integer counting plus a thin statistical layer;
//! the tables cross-foot by construction and the tests verify it. Outliers
//! are reported as cluster 0 throughout. Empty cluster-year cells produce
//! undefined shares instead of fabricated zeros.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterLabeling;
use crate::ingest::{CrimeType, IncidentRecord};
use crate::stats::{mean, percentile_nearest_rank, population_std, sample_std};
use crate::{Error, Result};

const N_TYPES: usize = CrimeType::ALL.len();

/// Incident counts per year and crime type over a contiguous year range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YearlyTypeCounts {
    first_year: i32,
    /// One row per year, columns in `CrimeType::ALL` order.
    rows: Vec<[u64; N_TYPES]>,
}

impl YearlyTypeCounts {
    pub fn n_years(&self) -> usize {
        self.rows.len()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.rows.len()).map(move |i| self.first_year + i as i32)
    }

    /// Zero for years outside the table's range.
    pub fn count(&self, year: i32, t: CrimeType) -> u64 {
        let Ok(offset) = usize::try_from(year - self.first_year) else {
            return 0;
        };
        self.rows.get(offset).map_or(0, |row| row[t.ordinal()])
    }

    pub fn year_total(&self, year: i32) -> u64 {
        CrimeType::ALL.iter().map(|&t| self.count(year, t)).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    /// Columns: year, then one per crime type.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header_with("year"))?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(self.first_year + i as i32).to_string()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Serialize for YearlyTypeCounts {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            year: i32,
            robbery: u64,
            theft: u64,
            burglary: u64,
            motor_vehicle_theft: u64,
            assault: u64,
            criminal_sexual_assault: u64,
            arson: u64,
            homicide: u64,
        }
        ser.collect_seq(self.rows.iter().enumerate().map(|(i, r)| Row {
            year: self.first_year + i as i32,
            robbery: r[0],
            theft: r[1],
            burglary: r[2],
            motor_vehicle_theft: r[3],
            assault: r[4],
            criminal_sexual_assault: r[5],
            arson: r[6],
            homicide: r[7],
        }))
    }
}

/// Exact counts per year and type; years span the observed min..=max.
pub fn yearly_type_counts(records: &[IncidentRecord]) -> YearlyTypeCounts {
    let Some(first_year) = records.iter().map(|r| r.year).min() else {
        return YearlyTypeCounts { first_year: 0, rows: Vec::new() };
    };
    let last_year = records.iter().map(|r| r.year).max().expect("nonempty");
    let mut rows = vec![[0u64; N_TYPES]; (last_year - first_year) as usize + 1];
    for r in records {
        rows[(r.year - first_year) as usize][r.crime_type.ordinal()] += 1;
    }
    YearlyTypeCounts { first_year, rows }
}

/// Which standard deviation the yearly summaries report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// n-1 denominator.
    #[default]
    Sample,
    /// n denominator.
    Population,
}

/// Size and yearly-volume statistics for one cluster (0 = outliers).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub cluster_id: u32,
    pub share_of_total: f64,
    pub sum_years: u64,
    pub mean_years: f64,
    pub std_years: f64,
}

/// Per-cluster crime volume statistics across years.
///
/// Yearly totals are taken over `n_years` consecutive years starting at the
/// earliest observed year; years without incidents count zero. The mean is
/// exactly `sum / n_years`.
pub fn cluster_summary(
    labeling: &ClusterLabeling,
    records: &[IncidentRecord],
    n_years: usize,
    mode: StdMode,
) -> Result<Vec<ClusterSummary>> {
    if labeling.len() != records.len() {
        return Err(Error::SizeMismatch { left: labeling.len(), right: records.len() });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let first_year = records.iter().map(|r| r.year).min().expect("nonempty");
    let span = (records.iter().map(|r| r.year).max().expect("nonempty") - first_year) as usize + 1;
    if n_years < span {
        return Err(Error::InvalidParameter {
            name: "n_years",
            reason: format!("records span {span} years, got {n_years}"),
        });
    }

    let n_groups = labeling.n_clusters() as usize + 1;
    let mut yearly = vec![vec![0u64; n_years]; n_groups];
    for (i, r) in records.iter().enumerate() {
        let group = labeling.label(i).id() as usize;
        yearly[group][(r.year - first_year) as usize] += 1;
    }

    let grand_total = records.len() as f64;
    Ok(yearly
        .iter()
        .enumerate()
        .map(|(group, counts)| {
            let sum: u64 = counts.iter().sum();
            let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let std_years = match mode {
                StdMode::Sample => sample_std(&as_f),
                StdMode::Population => population_std(&as_f),
            };
            ClusterSummary {
                cluster_id: group as u32,
                share_of_total: sum as f64 / grand_total,
                sum_years: sum,
                mean_years: sum as f64 / n_years as f64,
                std_years,
            }
        })
        .collect())
}

/// Columns: cluster, share_of_total, sum_years, mean_years, std_years.
pub fn write_cluster_summary_csv<W: std::io::Write>(
    rows: &[ClusterSummary],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "share_of_total", "sum_years", "mean_years", "std_years"])?;
    for r in rows {
        w.write_record([
            r.cluster_id.to_string(),
            r.share_of_total.to_string(),
            r.sum_years.to_string(),
            r.mean_years.to_string(),
            r.std_years.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Incident counts per cluster and crime type; row 0 is the outliers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeTotals {
    rows: Vec<[u64; N_TYPES]>,
}

impl TypeTotals {
    /// Rows including the outlier row, so clusters + 1.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn count(&self, cluster_id: u32, t: CrimeType) -> u64 {
        self.rows[cluster_id as usize][t.ordinal()]
    }

    pub fn cluster_total(&self, cluster_id: u32) -> u64 {
        self.rows[cluster_id as usize].iter().sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    /// Columns: cluster, then one per crime type.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header_with("cluster"))?;
        for (c, row) in self.rows.iter().enumerate() {
            let mut rec = vec![c.to_string()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Serialize for TypeTotals {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            cluster: u32,
            robbery: u64,
            theft: u64,
            burglary: u64,
            motor_vehicle_theft: u64,
            assault: u64,
            criminal_sexual_assault: u64,
            arson: u64,
            homicide: u64,
        }
        ser.collect_seq(self.rows.iter().enumerate().map(|(c, r)| Row {
            cluster: c as u32,
            robbery: r[0],
            theft: r[1],
            burglary: r[2],
            motor_vehicle_theft: r[3],
            assault: r[4],
            criminal_sexual_assault: r[5],
            arson: r[6],
            homicide: r[7],
        }))
    }
}

/// Exact counts per (cluster, type) with outliers as row 0.
pub fn type_totals(labeling: &ClusterLabeling, records: &[IncidentRecord]) -> Result<TypeTotals> {
    if labeling.len() != records.len() {
        return Err(Error::SizeMismatch { left: labeling.len(), right: records.len() });
    }
    let mut rows = vec![[0u64; N_TYPES]; labeling.n_clusters() as usize + 1];
    for (i, r) in records.iter().enumerate() {
        rows[labeling.label(i).id() as usize][r.crime_type.ordinal()] += 1;
    }
    Ok(TypeTotals { rows })
}

/// One cluster-year-type cell of the composition breakdown.
///
/// `share` is the type's fraction of the cluster's incidents that year, or
/// `None` when the cluster had no incidents that year at all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionShare {
    pub cluster_id: u32,
    pub year: i32,
    pub crime_type: CrimeType,
    pub share: Option<f64>,
}

/// Per-cluster yearly type composition, every (cluster, year, type) cell
/// emitted in (cluster, year, type) order over the observed year range.
pub fn composition_shares(
    labeling: &ClusterLabeling,
    records: &[IncidentRecord],
) -> Result<Vec<CompositionShare>> {
    if labeling.len() != records.len() {
        return Err(Error::SizeMismatch { left: labeling.len(), right: records.len() });
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let first_year = records.iter().map(|r| r.year).min().expect("nonempty");
    let n_years =
        (records.iter().map(|r| r.year).max().expect("nonempty") - first_year) as usize + 1;
    let n_groups = labeling.n_clusters() as usize + 1;

    let mut counts = vec![[0u64; N_TYPES]; n_groups * n_years];
    for (i, r) in records.iter().enumerate() {
        let group = labeling.label(i).id() as usize;
        let cell = group * n_years + (r.year - first_year) as usize;
        counts[cell][r.crime_type.ordinal()] += 1;
    }

    let mut shares = Vec::with_capacity(n_groups * n_years * N_TYPES);
    for group in 0..n_groups {
        for y in 0..n_years {
            let cell = &counts[group * n_years + y];
            let total: u64 = cell.iter().sum();
            for t in CrimeType::ALL {
                let share = if total == 0 {
                    None
                } else {
                    Some(cell[t.ordinal()] as f64 / total as f64)
                };
                shares.push(CompositionShare {
                    cluster_id: group as u32,
                    year: first_year + y as i32,
                    crime_type: t,
                    share,
                });
            }
        }
    }
    Ok(shares)
}

/// Columns: cluster, year, crime_type, share; undefined shares are blank.
pub fn write_composition_csv<W: std::io::Write>(
    shares: &[CompositionShare],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "year", "crime_type", "share"])?;
    for s in shares {
        w.write_record([
            s.cluster_id.to_string(),
            s.year.to_string(),
            s.crime_type.snake_name().to_string(),
            s.share.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and percentile confidence intervals for one named group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStat {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    /// 16th to 84th percentile; `None` for single-member groups.
    pub ci68: Option<(f64, f64)>,
    /// 2.5th to 97.5th percentile; `None` for single-member groups.
    pub ci95: Option<(f64, f64)>,
}

/// Means with nearest-rank percentile intervals per group.
///
/// Single-member groups report the mean with both intervals undefined. A
/// two-member group's intervals span both values.
pub fn grouped_mean_ci(groups: &[(String, Vec<f64>)]) -> Result<Vec<GroupStat>> {
    groups
        .iter()
        .map(|(label, values)| {
            if values.is_empty() {
                return Err(Error::EmptyInput);
            }
            let mut sorted = values.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let (ci68, ci95) = if sorted.len() < 2 {
                (None, None)
            } else {
                (
                    Some((
                        percentile_nearest_rank(&sorted, 16.0),
                        percentile_nearest_rank(&sorted, 84.0),
                    )),
                    Some((
                        percentile_nearest_rank(&sorted, 2.5),
                        percentile_nearest_rank(&sorted, 97.5),
                    )),
                )
            };
            Ok(GroupStat {
                label: label.clone(),
                n: values.len(),
                mean: mean(values),
                ci68,
                ci95,
            })
        })
        .collect()
}

/// Columns: label, n, mean, ci68_low, ci68_high, ci95_low, ci95_high;
/// undefined intervals are blank.
pub fn write_group_stats_csv<W: std::io::Write>(rows: &[GroupStat], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "n", "mean", "ci68_low", "ci68_high", "ci95_low", "ci95_high"])?;
    for r in rows {
        let (l68, h68) = r.ci68.map_or((String::new(), String::new()), |(a, b)| {
            (a.to_string(), b.to_string())
        });
        let (l95, h95) = r.ci95.map_or((String::new(), String::new()), |(a, b)| {
            (a.to_string(), b.to_string())
        });
        w.write_record([
            r.label.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            l68,
            h68,
            l95,
            h95,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every table for one labeled dataset, serializable as one JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub yearly_type_counts: YearlyTypeCounts,
    pub cluster_summary: Vec<ClusterSummary>,
    pub type_totals: TypeTotals,
    pub composition_shares: Vec<CompositionShare>,
    pub std_mode: StdMode,
    pub n_years: usize,
}

impl ReportBundle {
    pub fn build(
        labeling: &ClusterLabeling,
        records: &[IncidentRecord],
        n_years: usize,
        mode: StdMode,
    ) -> Result<Self> {
        Ok(Self {
            yearly_type_counts: yearly_type_counts(records),
            cluster_summary: cluster_summary(labeling, records, n_years, mode)?,
            type_totals: type_totals(labeling, records)?,
            composition_shares: composition_shares(labeling, records)?,
            std_mode: mode,
            n_years,
        })
    }

    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)
            .map_err(|e| Error::InvalidParameter { name: "report", reason: e.to_string() })
    }
}

fn header_with(first: &str) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend(CrimeType::ALL.iter().map(|t| t.snake_name().to_string()));
    h
}
