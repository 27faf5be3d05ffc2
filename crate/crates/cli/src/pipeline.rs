//! Stage orchestration: artifacts, content-addressed caching, the manifest.
//!
//! Stages communicate through files in the output directory, so they can run
//! in one invocation or across several. Each stage stores a marker under
//! `.cache` keyed by a hash of its name, the binary version, its effective
//! configuration, and its input file hashes; a rerun whose key and outputs
//! still match skips the work. Outputs are byte-identical either way because
//! every random choice is seeded. Wall-clock timestamps appear only in the
//! manifest, never in stage outputs.
//!
//! Seeds derive from the master seed by fixed offsets: sampling uses +1, the
//! empty-space and nearest-neighbor bands +2 and +3, and the autocorrelation
//! of cluster `c` uses +16+c. The manifest records every seed a run used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read as _};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hotspot_core::cluster::{
    assign_by_envelope, compare_labelings, dbscan, sample_points, ClusterLabeling, DbscanParams,
    Label, LabelingComparison, Provenance,
};
use hotspot_core::density::{density_profile, rescale_matrix, scott_bandwidth, RescaleParams};
use hotspot_core::geometry::{pairwise_distances_with_budget, project, PlanarPointSet};
use hotspot_core::ingest::{parse_incidents, write_incidents_csv, IncidentRecord, IngestConfig};
use hotspot_core::report::{
    grouped_mean_ci, write_cluster_summary_csv, write_composition_csv, write_group_stats_csv,
    ReportBundle,
};
use hotspot_core::spatstat::{correlation_with_ci, ripley_curve, CurveStatistic, RadiiGrid};
use hotspot_core::ingest::CrimeType;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, Steepness};
use crate::error::CliError;
use crate::synth::SynthSpec;

pub const SEED_SAMPLE: u64 = 1;
pub const SEED_RIPLEY_F: u64 = 2;
pub const SEED_RIPLEY_G: u64 = 3;
/// The curve for cluster `c` uses offset `SEED_CORRELATE_BASE + c`.
pub const SEED_CORRELATE_BASE: u64 = 16;

/// Filenames inside the output directory.
pub struct Paths {
    out: PathBuf,
}

impl Paths {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    pub fn incidents(&self) -> PathBuf {
        self.out.join("incidents.csv")
    }

    pub fn ingest_stats(&self) -> PathBuf {
        self.out.join("ingest_stats.json")
    }

    pub fn labels(&self) -> PathBuf {
        self.out.join("labels.csv")
    }

    pub fn cluster_meta(&self) -> PathBuf {
        self.out.join("cluster_meta.json")
    }

    pub fn ripley_f(&self) -> PathBuf {
        self.out.join("ripley_f.csv")
    }

    pub fn ripley_g(&self) -> PathBuf {
        self.out.join("ripley_g.csv")
    }

    pub fn correlation(&self, cluster: u32) -> PathBuf {
        self.out.join(format!("correlation_cluster_{cluster}.csv"))
    }

    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }

    pub fn report_csv(&self, table: &str) -> PathBuf {
        self.out.join(format!("{table}.csv"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.out.join("manifest.json")
    }

    fn cache_dir(&self) -> PathBuf {
        self.out.join(".cache")
    }

    fn marker(&self, stage: &str) -> PathBuf {
        self.cache_dir().join(format!("{stage}.json"))
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.out).unwrap_or(path).display().to_string()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct CacheMarker {
    stage: String,
    key: String,
    outputs: Vec<FileHash>,
    rows: BTreeMap<String, u64>,
}

#[derive(Serialize)]
struct StageRecord {
    name: String,
    cache_key: String,
    cached: bool,
    rows: BTreeMap<String, u64>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    master_seed: u64,
    stage_seeds: &'a BTreeMap<String, u64>,
    config: &'a PipelineConfig,
    stages: &'a [StageRecord],
    outputs: BTreeMap<String, String>,
    started_unix: u64,
    finished_unix: u64,
}

struct StageOutcome {
    outputs: Vec<PathBuf>,
    rows: BTreeMap<String, u64>,
}

/// Everything written by the cluster stage besides the labels themselves.
#[derive(Serialize)]
struct ClusterMeta {
    /// Hash of the incidents file the labels align with.
    incidents_sha256: String,
    seed_sample: u64,
    sample_size_requested: usize,
    sample_size_used: usize,
    bandwidth: f64,
    steepness_used: f64,
    epsilon: f64,
    kappa: usize,
    envelope_radius: f64,
    n_clusters: u32,
    /// Index 0 counts outliers.
    cluster_sizes: Vec<u64>,
    sampled_outlier_share: f64,
    full_outlier_share: f64,
    baseline: BaselineMeta,
}

/// Plain-distance clustering on the same sample, for contrast.
#[derive(Serialize)]
struct BaselineMeta {
    n_clusters: u32,
    full_outlier_share: f64,
    comparison: LabelingComparison,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    paths: Paths,
    command: String,
    stage_seeds: BTreeMap<String, u64>,
    stages: Vec<StageRecord>,
    started_unix: u64,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, command: &str) -> Result<Self, CliError> {
        let paths = Paths::new(&cfg.out);
        fs::create_dir_all(paths.cache_dir())
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", cfg.out.display())))?;
        Ok(Self {
            cfg,
            paths,
            command: command.to_string(),
            stage_seeds: BTreeMap::new(),
            stages: Vec::new(),
            started_unix: unix_now(),
        })
    }

    fn seed_for(&mut self, name: &str, offset: u64) -> u64 {
        let seed = self.cfg.seed.wrapping_add(offset);
        self.stage_seeds.insert(name.to_string(), seed);
        seed
    }

    /// Runs `compute` unless a marker proves the same work already happened.
    /// Keys depend on input content, never input location, so runs into
    /// different output directories produce identical cache markers.
    fn run_stage<F>(
        &mut self,
        name: &'static str,
        stage_cfg: serde_json::Value,
        inputs: &[PathBuf],
        compute: F,
    ) -> Result<(), CliError>
    where
        F: FnOnce(&Self, &[String]) -> Result<StageOutcome, CliError>,
    {
        let input_hashes: Vec<String> =
            inputs.iter().map(|p| hash_file(p, name)).collect::<Result<_, _>>()?;
        let key_doc = json!({
            "stage": name,
            "version": env!("CARGO_PKG_VERSION"),
            "config": stage_cfg,
            "inputs": input_hashes,
        });
        let key = hex(&Sha256::digest(key_doc.to_string().as_bytes()));

        let marker_path = self.paths.marker(name);
        if let Some(marker) = read_marker(&marker_path) {
            if marker.key == key && marker_outputs_intact(&self.paths, &marker) {
                log::info!("stage {name}: unchanged, using cached outputs");
                self.stages.push(StageRecord {
                    name: name.to_string(),
                    cache_key: key,
                    cached: true,
                    rows: marker.rows,
                    outputs: marker.outputs.into_iter().map(|f| f.path).collect(),
                });
                return Ok(());
            }
        }

        let outcome = compute(self, &input_hashes)?;
        let outputs: Vec<FileHash> = outcome
            .outputs
            .iter()
            .map(|p| {
                hash_file(p, name).map(|h| FileHash { path: self.paths.relative(p), sha256: h })
            })
            .collect::<Result<_, _>>()?;
        let marker = CacheMarker {
            stage: name.to_string(),
            key: key.clone(),
            outputs: outputs.clone(),
            rows: outcome.rows.clone(),
        };
        write_json(&marker_path, &marker, name)?;
        self.stages.push(StageRecord {
            name: name.to_string(),
            cache_key: key,
            cached: false,
            rows: outcome.rows,
            outputs: outputs.into_iter().map(|f| f.path).collect(),
        });
        Ok(())
    }

    pub fn ingest(&mut self) -> Result<(), CliError> {
        let input = self.cfg.input.clone().ok_or_else(|| {
            CliError::usage("no input path given; pass --input or set `input` in the config")
        })?;
        if !input.is_file() {
            return Err(CliError::data(format!("input {} not found", input.display())));
        }
        let stage_cfg = json!({
            "columns": self.cfg.columns,
            "year_min": self.cfg.year_min,
            "year_max": self.cfg.year_max,
            "type_aliases": self.cfg.type_aliases,
        });
        self.run_stage("ingest", stage_cfg, &[input.clone()], |me, _| {
            let icfg = me.cfg.ingest_config()?;
            let file = fs::File::open(&input)
                .map_err(|e| CliError::data(format!("cannot open {}: {e}", input.display())))?;
            let (records, stats) = parse_incidents(std::io::BufReader::new(file), &icfg)
                .map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
            if records.is_empty() {
                return Err(CliError::data(format!(
                    "{}: no rows survive cleaning",
                    input.display()
                )));
            }
            let out_csv = me.paths.incidents();
            let w = fs::File::create(&out_csv)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_csv.display())))?;
            write_incidents_csv(&records, BufWriter::new(w)).map_err(|e| CliError::data(e.to_string()))?;
            write_json(&me.paths.ingest_stats(), &stats, "ingest")?;
            let rows = BTreeMap::from([
                ("rows_read".to_string(), stats.rows_read),
                ("rows_kept".to_string(), stats.rows_kept),
                ("rows_dropped_missing".to_string(), stats.rows_dropped_missing),
                ("rows_dropped_unmapped_type".to_string(), stats.rows_dropped_unmapped_type),
                ("alias_merges".to_string(), stats.alias_merges),
            ]);
            Ok(StageOutcome { outputs: vec![out_csv, me.paths.ingest_stats()], rows })
        })
    }

    pub fn cluster(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "cluster";
        let incidents = self.paths.incidents();
        if !incidents.is_file() {
            return Err(CliError::missing_artifact(STAGE, &incidents, "ingest"));
        }
        let seed_sample = self.seed_for("sample", SEED_SAMPLE);
        let stage_cfg = json!({
            "seed": self.cfg.seed,
            "sample_size": self.cfg.sample_size,
            "epsilon": self.cfg.epsilon,
            "kappa": self.cfg.kappa,
            "steepness": self.cfg.steepness,
            "envelope_radius": self.cfg.envelope_radius,
            "matrix_budget": self.cfg.matrix_budget,
        });
        self.run_stage(STAGE, stage_cfg, &[incidents.clone()], |me, input_hashes| {
            let records = read_incidents(&incidents, STAGE)?;
            let ps = project(&records).map_err(|e| CliError::stage(STAGE, e))?;

            let requested = me.cfg.sample_size;
            let used = requested.min(ps.len());
            if used < requested {
                log::warn!("sample size {requested} exceeds population {}; using every point", ps.len());
            }
            let (sample_ps, sample_map) =
                sample_points(&ps, used, seed_sample).map_err(|e| CliError::stage(STAGE, e))?;

            let bandwidth = scott_bandwidth(&sample_ps).map_err(|e| CliError::stage(STAGE, e))?;
            let profile =
                density_profile(&sample_ps, bandwidth).map_err(|e| CliError::stage(STAGE, e))?;
            let dm = pairwise_distances_with_budget(&sample_ps, me.cfg.matrix_budget)
                .map_err(|e| CliError::stage(STAGE, format!("{e}; lower sample_size or raise matrix_budget")))?;
            let rescale = match me.cfg.steepness {
                Steepness::Adaptive => RescaleParams::adaptive(&profile),
                Steepness::Fixed(k) => {
                    RescaleParams::fixed(k).map_err(|e| CliError::stage(STAGE, e))?
                }
            };
            let rescaled =
                rescale_matrix(&dm, &profile, rescale).map_err(|e| CliError::stage(STAGE, e))?;
            let params = DbscanParams::new(me.cfg.epsilon, me.cfg.kappa)
                .map_err(|e| CliError::stage(STAGE, e))?;

            let sampled = dbscan(&rescaled, params);
            let full = assign_by_envelope(&ps, &sampled, &sample_map, me.cfg.envelope_radius)
                .map_err(|e| CliError::stage(STAGE, e))?;

            let base_sampled = dbscan(&dm, params);
            let base_full =
                assign_by_envelope(&ps, &base_sampled, &sample_map, me.cfg.envelope_radius)
                    .map_err(|e| CliError::stage(STAGE, e))?;
            let comparison =
                compare_labelings(&full, &base_full).map_err(|e| CliError::stage(STAGE, e))?;

            let labels_path = me.paths.labels();
            write_labels(&labels_path, &full, STAGE)?;
            let meta = ClusterMeta {
                incidents_sha256: input_hashes[0].clone(),
                seed_sample,
                sample_size_requested: requested,
                sample_size_used: used,
                bandwidth,
                steepness_used: rescale.k,
                epsilon: me.cfg.epsilon,
                kappa: me.cfg.kappa,
                envelope_radius: me.cfg.envelope_radius,
                n_clusters: full.n_clusters(),
                cluster_sizes: full.sizes(),
                sampled_outlier_share: sampled.outlier_share(),
                full_outlier_share: full.outlier_share(),
                baseline: BaselineMeta {
                    n_clusters: base_full.n_clusters(),
                    full_outlier_share: base_full.outlier_share(),
                    comparison,
                },
            };
            write_json(&me.paths.cluster_meta(), &meta, STAGE)?;
            let rows = BTreeMap::from([
                ("points".to_string(), ps.len() as u64),
                ("sampled".to_string(), used as u64),
                ("clusters".to_string(), u64::from(full.n_clusters())),
                ("outliers".to_string(), full.sizes()[0]),
            ]);
            Ok(StageOutcome { outputs: vec![labels_path, me.paths.cluster_meta()], rows })
        })
    }

    pub fn ripley(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "ripley";
        let incidents = self.paths.incidents();
        if !incidents.is_file() {
            return Err(CliError::missing_artifact(STAGE, &incidents, "ingest"));
        }
        let stage_cfg = self.ripley_cfg(json!(null));
        self.run_stage(STAGE, stage_cfg, &[incidents.clone()], |me, _| {
            let records = read_incidents(&incidents, STAGE)?;
            let ps = project(&records).map_err(|e| CliError::stage(STAGE, e))?;
            me.ripley_curves(&ps, STAGE)
        })
    }

    /// Same curves over a generated pattern; cache-keyed by the generator spec.
    pub fn ripley_synthetic(&mut self, spec: &SynthSpec) -> Result<(), CliError> {
        const STAGE: &str = "ripley";
        let stage_cfg = self.ripley_cfg(json!({
            "kind": format!("{:?}", spec.kind),
            "n": spec.n,
            "seed": spec.seed,
            "window_m": spec.window_m,
            "sigma": spec.sigma,
            "blobs": spec.blobs,
            "separation": spec.separation,
        }));
        let ps = crate::synth::planar_pattern(spec)?;
        self.run_stage(STAGE, stage_cfg, &[], move |me, _| me.ripley_curves(&ps, STAGE))
    }

    fn ripley_cfg(&mut self, synthetic: serde_json::Value) -> serde_json::Value {
        let seed_f = self.seed_for("ripley_f", SEED_RIPLEY_F);
        let seed_g = self.seed_for("ripley_g", SEED_RIPLEY_G);
        json!({
            "seed_f": seed_f,
            "seed_g": seed_g,
            "bin_width": self.cfg.bin_width,
            "max_radius": self.cfg.ripley_max_radius,
            "sims": self.cfg.sims,
            "lattice_points": self.cfg.lattice_points,
            "synthetic": synthetic,
        })
    }

    fn ripley_curves(&self, ps: &PlanarPointSet, stage: &'static str) -> Result<StageOutcome, CliError> {
        let grid = RadiiGrid::with_max_radius(self.cfg.bin_width, self.cfg.ripley_max_radius)
            .map_err(|e| CliError::stage(stage, e))?;
        let f = ripley_curve(
            ps,
            &grid,
            CurveStatistic::EmptySpace { lattice_points: self.cfg.lattice_points },
            self.cfg.sims,
            self.cfg.seed.wrapping_add(SEED_RIPLEY_F),
        )
        .map_err(|e| CliError::stage(stage, e))?;
        let g = ripley_curve(
            ps,
            &grid,
            CurveStatistic::NearestNeighbor,
            self.cfg.sims,
            self.cfg.seed.wrapping_add(SEED_RIPLEY_G),
        )
        .map_err(|e| CliError::stage(stage, e))?;
        write_curve(&self.paths.ripley_f(), |w| f.write_csv(w), stage)?;
        write_curve(&self.paths.ripley_g(), |w| g.write_csv(w), stage)?;
        let rows = BTreeMap::from([
            ("points".to_string(), ps.len() as u64),
            ("bins".to_string(), grid.n_bins() as u64),
            ("sims".to_string(), self.cfg.sims as u64),
        ]);
        Ok(StageOutcome { outputs: vec![self.paths.ripley_f(), self.paths.ripley_g()], rows })
    }

    pub fn correlate(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "correlate";
        let incidents = self.paths.incidents();
        if !incidents.is_file() {
            return Err(CliError::missing_artifact(STAGE, &incidents, "ingest"));
        }
        let labels = self.paths.labels();
        if !labels.is_file() {
            return Err(CliError::missing_artifact(STAGE, &labels, "cluster"));
        }
        let stage_cfg = json!({
            "seed": self.cfg.seed,
            "bin_width": self.cfg.bin_width,
            "max_radius": self.cfg.correlate_max_radius,
            "runs": self.cfg.runs,
            "n_sample": self.cfg.n_sample,
        });
        self.run_stage(STAGE, stage_cfg, &[incidents.clone(), labels.clone()], |me, input_hashes| {
            check_labels_match(me, &input_hashes[0], STAGE)?;
            let records = read_incidents(&incidents, STAGE)?;
            let labeling = read_labels(&labels, STAGE)?;
            if labeling.len() != records.len() {
                return Err(CliError::stage(
                    STAGE,
                    format!(
                        "{} rows in labels but {} incidents; re-run `hotspot cluster`",
                        labeling.len(),
                        records.len()
                    ),
                ));
            }
            let ps = project(&records).map_err(|e| CliError::stage(STAGE, e))?;
            let grid =
                RadiiGrid::with_max_radius(me.cfg.bin_width, me.cfg.correlate_max_radius)
                    .map_err(|e| CliError::stage(STAGE, e))?;

            let mut outputs = Vec::new();
            let mut written = 0u64;
            let mut skipped = 0u64;
            for c in 0..=labeling.n_clusters() {
                let idx: Vec<usize> = (0..labeling.len())
                    .filter(|&i| labeling.label(i).id() == c)
                    .collect();
                if idx.len() < 2 {
                    log::warn!("cluster {c} has {} point(s); skipping its curve", idx.len());
                    skipped += 1;
                    continue;
                }
                let sub = ps.subset(&idx).map_err(|e| CliError::stage(STAGE, e))?;
                let seed = me.cfg.seed.wrapping_add(SEED_CORRELATE_BASE).wrapping_add(u64::from(c));
                let curve = correlation_with_ci(&sub, &grid, me.cfg.runs, me.cfg.n_sample, seed)
                    .map_err(|e| CliError::stage(STAGE, e))?;
                let path = me.paths.correlation(c);
                write_curve(&path, |w| curve.write_csv(w), STAGE)?;
                outputs.push(path);
                written += 1;
            }
            let rows = BTreeMap::from([
                ("clusters_written".to_string(), written),
                ("clusters_skipped".to_string(), skipped),
            ]);
            Ok(StageOutcome { outputs, rows })
        })?;
        // Seeds are only known per cluster after reading the labels; record
        // the base so a cached run still documents the derivation.
        self.stage_seeds
            .insert("correlate_base".to_string(), self.cfg.seed.wrapping_add(SEED_CORRELATE_BASE));
        Ok(())
    }

    pub fn report(&mut self, labels_override: Option<&Path>) -> Result<(), CliError> {
        const STAGE: &str = "report";
        let incidents = self.paths.incidents();
        if !incidents.is_file() {
            return Err(CliError::missing_artifact(STAGE, &incidents, "ingest"));
        }
        let labels = match labels_override {
            Some(p) => {
                if !p.is_file() {
                    return Err(CliError::stage(
                        STAGE,
                        format!("label file {} not found", p.display()),
                    ));
                }
                p.to_path_buf()
            }
            None => {
                let p = self.paths.labels();
                if !p.is_file() {
                    return Err(CliError::missing_artifact(STAGE, &p, "cluster"));
                }
                p
            }
        };
        let stage_cfg = json!({
            "year_min": self.cfg.year_min,
            "year_max": self.cfg.year_max,
            "std_mode": self.cfg.std_mode,
            "labels_override": labels_override.map(|p| p.display().to_string()),
        });
        self.run_stage(STAGE, stage_cfg, &[incidents.clone(), labels.clone()], |me, input_hashes| {
            if labels_override.is_none() {
                check_labels_match(me, &input_hashes[0], STAGE)?;
            }
            let records = read_incidents(&incidents, STAGE)?;
            let labeling = read_labels(&labels, STAGE)?;

            let span = year_span(&records);
            let mut n_years = me.cfg.n_years();
            if span > n_years {
                log::warn!("records span {span} years, wider than the configured {n_years}; using {span}");
                n_years = span;
            }
            let bundle = ReportBundle::build(&labeling, &records, n_years, me.cfg.std_mode)
                .map_err(|e| CliError::stage(STAGE, e))?;

            let mut outputs = Vec::new();
            let mut emit = |path: PathBuf, f: &mut dyn FnMut(&mut BufWriter<fs::File>) -> hotspot_core::Result<()>|
             -> Result<(), CliError> {
                let file = fs::File::create(&path)
                    .map_err(|e| CliError::stage(STAGE, format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                f(&mut w).map_err(|e| CliError::stage(STAGE, e))?;
                outputs.push(path);
                Ok(())
            };
            emit(me.paths.report_csv("yearly_type_counts"), &mut |w| {
                bundle.yearly_type_counts.write_csv(w)
            })?;
            emit(me.paths.report_csv("cluster_summary"), &mut |w| {
                write_cluster_summary_csv(&bundle.cluster_summary, w)
            })?;
            emit(me.paths.report_csv("type_totals"), &mut |w| {
                bundle.type_totals.write_csv(w)
            })?;
            emit(me.paths.report_csv("composition_shares"), &mut |w| {
                write_composition_csv(&bundle.composition_shares, w)
            })?;

            let first_year = records.iter().map(|r| r.year).min().expect("nonempty");
            let cluster_groups = yearly_totals_by_cluster(&labeling, &records, first_year, n_years);
            let cluster_stats =
                grouped_mean_ci(&cluster_groups).map_err(|e| CliError::stage(STAGE, e))?;
            emit(me.paths.report_csv("group_stats_clusters"), &mut |w| {
                write_group_stats_csv(&cluster_stats, w)
            })?;
            let type_groups = yearly_totals_by_type(&records, first_year, n_years);
            let type_stats =
                grouped_mean_ci(&type_groups).map_err(|e| CliError::stage(STAGE, e))?;
            emit(me.paths.report_csv("group_stats_types"), &mut |w| {
                write_group_stats_csv(&type_stats, w)
            })?;
            emit(me.paths.report_json(), &mut |w| bundle.write_json(w))?;

            let rows = BTreeMap::from([
                ("records".to_string(), records.len() as u64),
                ("clusters".to_string(), u64::from(labeling.n_clusters())),
                ("years".to_string(), n_years as u64),
            ]);
            Ok(StageOutcome { outputs, rows })
        })
    }

    /// Writes the manifest and hands back the path.
    pub fn finish(self) -> Result<PathBuf, CliError> {
        let mut outputs = BTreeMap::new();
        for stage in &self.stages {
            let marker = read_marker(&self.paths.marker(&stage.name));
            if let Some(m) = marker {
                for f in m.outputs {
                    outputs.insert(f.path, f.sha256);
                }
            }
        }
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            master_seed: self.cfg.seed,
            stage_seeds: &self.stage_seeds,
            config: &self.cfg,
            stages: &self.stages,
            outputs,
            started_unix: self.started_unix,
            finished_unix: unix_now(),
        };
        let path = self.paths.manifest();
        write_json(&path, &manifest, "manifest")?;
        Ok(path)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").expect("writing to a string cannot fail");
    }
    s
}

fn hash_file(path: &Path, stage: &'static str) -> Result<String, CliError> {
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::stage(stage, format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::stage(stage, format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn read_marker(path: &Path) -> Option<CacheMarker> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn marker_outputs_intact(paths: &Paths, marker: &CacheMarker) -> bool {
    marker.outputs.iter().all(|f| {
        let path = paths.out.join(&f.path);
        path.is_file() && hash_file(&path, "cache").map(|h| h == f.sha256).unwrap_or(false)
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::stage(stage, format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::stage(stage, format!("cannot write {}: {e}", path.display())))
}

fn write_curve<F>(path: &Path, write: F, stage: &'static str) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> hotspot_core::Result<()>,
{
    let file = fs::File::create(path)
        .map_err(|e| CliError::stage(stage, format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(|e| CliError::stage(stage, e))
}

/// The working CSV is already cleaned; any drop on re-read means damage.
fn read_incidents(path: &Path, stage: &'static str) -> Result<Vec<IncidentRecord>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::stage(stage, format!("cannot open {}: {e}", path.display())))?;
    let cfg = IngestConfig { year_min: i32::MIN, year_max: i32::MAX, ..IngestConfig::default() };
    let (records, stats) = parse_incidents(std::io::BufReader::new(file), &cfg)
        .map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display())))?;
    if stats.rows_kept != stats.rows_read || records.is_empty() {
        return Err(CliError::stage(
            stage,
            format!("{} is damaged; re-run `hotspot ingest`", path.display()),
        ));
    }
    Ok(records)
}

fn write_labels(path: &Path, labeling: &ClusterLabeling, stage: &'static str) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::stage(stage, format!("cannot create {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| CliError::stage(stage, e);
    w.write_record(["cluster", "provenance"]).map_err(io_err)?;
    for i in 0..labeling.len() {
        let prov = match labeling.provenance()[i] {
            Provenance::Sampled => "sampled",
            Provenance::EnvelopeAssigned => "envelope_assigned",
        };
        w.write_record([labeling.label(i).id().to_string(), prov.to_string()]).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::stage(stage, e))?;
    Ok(())
}

fn read_labels(path: &Path, stage: &'static str) -> Result<ClusterLabeling, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::stage(stage, format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let bad = |msg: String| CliError::stage(stage, format!("{}: {msg}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
    if headers.iter().take(2).collect::<Vec<_>>() != ["cluster", "provenance"] {
        return Err(bad("expected columns cluster,provenance".into()));
    }
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let id: u32 = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("row {}: bad cluster id", i + 1)))?;
        labels.push(Label::from_id(id));
        provenance.push(match row.get(1) {
            Some("sampled") => Provenance::Sampled,
            Some("envelope_assigned") => Provenance::EnvelopeAssigned,
            other => return Err(bad(format!("row {}: bad provenance {other:?}", i + 1))),
        });
    }
    ClusterLabeling::new(labels, provenance).map_err(|e| bad(e.to_string()))
}

/// Labels must describe the incidents file currently on disk.
fn check_labels_match(p: &Pipeline, incidents_sha256: &str, stage: &'static str) -> Result<(), CliError> {
    let meta_path = p.paths.cluster_meta();
    let Ok(text) = fs::read_to_string(&meta_path) else {
        return Ok(());
    };
    let Ok(meta) = serde_json::from_str::<serde_json::Value>(&text) else {
        return Ok(());
    };
    match meta.get("incidents_sha256").and_then(|v| v.as_str()) {
        Some(h) if h != incidents_sha256 => Err(CliError::stage(
            stage,
            "labels were computed from a different incidents file; re-run `hotspot cluster`",
        )),
        _ => Ok(()),
    }
}

fn year_span(records: &[IncidentRecord]) -> usize {
    let lo = records.iter().map(|r| r.year).min().unwrap_or(0);
    let hi = records.iter().map(|r| r.year).max().unwrap_or(0);
    (hi - lo) as usize + 1
}

fn yearly_totals_by_cluster(
    labeling: &ClusterLabeling,
    records: &[IncidentRecord],
    first_year: i32,
    n_years: usize,
) -> Vec<(String, Vec<f64>)> {
    let groups = labeling.n_clusters() as usize + 1;
    let mut counts = vec![vec![0.0; n_years]; groups];
    for (i, r) in records.iter().enumerate() {
        counts[labeling.label(i).id() as usize][(r.year - first_year) as usize] += 1.0;
    }
    counts.into_iter().enumerate().map(|(c, v)| (c.to_string(), v)).collect()
}

fn yearly_totals_by_type(
    records: &[IncidentRecord],
    first_year: i32,
    n_years: usize,
) -> Vec<(String, Vec<f64>)> {
    let mut counts = vec![vec![0.0; n_years]; CrimeType::ALL.len()];
    for r in records {
        counts[r.crime_type.ordinal()][(r.year - first_year) as usize] += 1.0;
    }
    counts
        .into_iter()
        .zip(CrimeType::ALL)
        .map(|(v, t)| (t.snake_name().to_string(), v))
        .collect()
}
