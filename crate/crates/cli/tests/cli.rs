//! End-to-end checks of the installed binary: exit codes, artifact layout,
//! caching, and determinism, all on small synthetic inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hotspot")
}

fn hotspot(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generates a small clustered dataset and returns its path.
fn make_input(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = hotspot(
        dir,
        &[
            "synthetic", "--kind", "blobs", "--n", &n.to_string(), "--seed", &seed.to_string(),
            "--out", "data.csv", "--window", "3000", "--sigma", "100", "--blobs", "3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("data.csv")
}

/// Small but nontrivial settings so every stage does real work quickly.
const FAST: &[&str] = &[
    "--sample-size", "400", "--epsilon", "50", "--kappa", "12", "--bin-width", "10",
    "--runs", "5", "--seed", "9",
];

fn run_all(dir: &Path, out_dir: &str) -> Output {
    let mut args = vec!["run", "--input", "data.csv", "--out", out_dir];
    args.extend_from_slice(FAST);
    hotspot(dir, &args)
}

fn hash_tree_excluding_manifest(root: &Path) -> BTreeMap<String, String> {
    fn walk(dir: &Path, root: &Path, acc: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(&path, root, acc);
            } else if path.file_name().is_some_and(|n| n != "manifest.json") {
                let rel = path.strip_prefix(root).expect("under root").display().to_string();
                let bytes = std::fs::read(&path).expect("readable file");
                acc.insert(rel, format!("{}:{}", bytes.len(), fletcher(&bytes)));
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

/// Cheap content fingerprint; collisions are irrelevant at this scale.
fn fletcher(bytes: &[u8]) -> u64 {
    let (mut a, mut b) = (1u64, 0u64);
    for &x in bytes {
        a = (a + u64::from(x)) % 65_521;
        b = (b + a) % 65_521;
    }
    (b << 32) | a
}

#[test]
fn bad_flags_exit_one_and_help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hotspot(tmp.path(), &["--garbage"])), 1);
    assert_eq!(code(&hotspot(tmp.path(), &["cluster", "--epsilon", "banana"])), 1);
    assert_eq!(code(&hotspot(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&hotspot(tmp.path(), &["ingest", "--out", "o"])), 1, "no input path");
}

#[test]
fn unreadable_input_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hotspot(tmp.path(), &["ingest", "--input", "nope.csv", "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn stages_out_of_order_exit_three_and_name_the_producer() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hotspot(tmp.path(), &["correlate", "--out", "o"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("hotspot ingest"), "{}", stderr(&out));

    make_input(tmp.path(), 300, 4);
    let out = hotspot(tmp.path(), &["ingest", "--input", "data.csv", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = hotspot(tmp.path(), &["correlate", "--out", "o"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("hotspot cluster"), "{}", stderr(&out));
    let out = hotspot(tmp.path(), &["report", "--out", "o"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("hotspot cluster"), "{}", stderr(&out));
}

#[test]
fn full_run_writes_every_artifact_and_an_honest_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 900, 4);
    let out = run_all(tmp.path(), "out");
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let odir = tmp.path().join("out");
    for name in [
        "incidents.csv", "ingest_stats.json", "labels.csv", "cluster_meta.json",
        "ripley_f.csv", "ripley_g.csv", "yearly_type_counts.csv", "cluster_summary.csv",
        "type_totals.csv", "composition_shares.csv", "group_stats_clusters.csv",
        "group_stats_types.csv", "report.json", "manifest.json",
    ] {
        assert!(odir.join(name).is_file(), "missing {name}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(odir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["stage_seeds"]["sample"], 10);
    assert_eq!(manifest["stage_seeds"]["ripley_f"], 11);
    assert_eq!(manifest["stage_seeds"]["ripley_g"], 12);

    let stages: Vec<&str> =
        manifest["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(stages, ["ingest", "cluster", "ripley", "correlate", "report"]);

    // The manifest's ingest rows must agree with the stats artifact.
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(odir.join("ingest_stats.json")).unwrap())
            .unwrap();
    let ingest = &manifest["stages"][0]["rows"];
    assert_eq!(ingest["rows_read"], stats["rows_read"]);
    assert_eq!(ingest["rows_kept"], stats["rows_kept"]);
    assert_eq!(stats["rows_kept"], 900);

    // Every output file the stages claim exists and is hashed.
    let outputs = manifest["outputs"].as_object().unwrap();
    assert!(outputs.len() >= 13);
    for (rel, hash) in outputs {
        assert!(odir.join(rel).is_file(), "listed output {rel} missing");
        assert_eq!(hash.as_str().unwrap().len(), 64);
    }

    // Labels align with incidents row for row.
    let incidents = std::fs::read_to_string(odir.join("incidents.csv")).unwrap();
    let labels = std::fs::read_to_string(odir.join("labels.csv")).unwrap();
    assert_eq!(incidents.lines().count(), labels.lines().count());

    // At least the outlier curve exists; clusters come from a 3-blob input.
    assert!(odir.join("correlation_cluster_0.csv").is_file());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(odir.join("cluster_meta.json")).unwrap())
            .unwrap();
    assert!(meta["n_clusters"].as_u64().unwrap() >= 1);
    assert!(meta["baseline"]["comparison"]["n_points"].as_u64().unwrap() == 900);
}

#[test]
fn rerun_hits_the_cache_and_leaves_bytes_identical() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 700, 6);
    assert_eq!(code(&run_all(tmp.path(), "out")), 0);
    let before = hash_tree_excluding_manifest(&tmp.path().join("out"));

    let out = run_all(tmp.path(), "out");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let after = hash_tree_excluding_manifest(&tmp.path().join("out"));
    assert_eq!(before, after);

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    for stage in manifest["stages"].as_array().unwrap() {
        assert_eq!(stage["cached"], true, "stage {} recomputed", stage["name"]);
    }
}

#[test]
fn two_fresh_runs_agree_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 700, 6);
    assert_eq!(code(&run_all(tmp.path(), "a")), 0);
    assert_eq!(code(&run_all(tmp.path(), "b")), 0);
    let a = hash_tree_excluding_manifest(&tmp.path().join("a"));
    let b = hash_tree_excluding_manifest(&tmp.path().join("b"));
    assert_eq!(a, b);
}

#[test]
fn changed_parameters_invalidate_only_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 600, 8);
    assert_eq!(code(&run_all(tmp.path(), "out")), 0);

    // Same input, different epsilon: ingest stays cached, cluster reruns.
    let mut args = vec!["run", "--input", "data.csv", "--out", "out"];
    args.extend_from_slice(FAST);
    let pos = args.iter().position(|a| *a == "--epsilon").unwrap();
    args[pos + 1] = "60";
    let out = hotspot(tmp.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    let cached: BTreeMap<&str, bool> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["name"].as_str().unwrap(), s["cached"].as_bool().unwrap()))
        .collect();
    assert_eq!(cached["ingest"], true);
    assert_eq!(cached["cluster"], false);
    assert_eq!(cached["ripley"], true, "ripley ignores epsilon");
    assert_eq!(cached["correlate"], false, "labels changed");
    assert_eq!(cached["report"], false, "labels changed");
}

#[test]
fn tampered_incidents_fail_the_label_consistency_check() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 500, 3);
    assert_eq!(code(&run_all(tmp.path(), "out")), 0);

    // Regenerate incidents from different data without re-clustering.
    make_input(tmp.path(), 400, 99);
    let out = hotspot(tmp.path(), &["ingest", "--input", "data.csv", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut args = vec!["correlate", "--out", "out"];
    args.extend_from_slice(FAST);
    let out = hotspot(tmp.path(), &args);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("hotspot cluster"), "{}", stderr(&out));
}

#[test]
fn report_accepts_an_external_label_file() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 300, 5);
    let out = hotspot(tmp.path(), &["ingest", "--input", "data.csv", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Hand-built labels: every point in one cluster, one outlier.
    let mut labels = String::from("cluster,provenance\n0,envelope_assigned\n");
    for _ in 1..300 {
        labels.push_str("1,sampled\n");
    }
    std::fs::write(tmp.path().join("mine.csv"), labels).unwrap();
    let out = hotspot(tmp.path(), &["report", "--out", "out", "--labels", "mine.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = std::fs::read_to_string(tmp.path().join("out/cluster_summary.csv")).unwrap();
    // Header plus the outlier row and cluster 1.
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn ripley_synthetic_needs_no_input_and_stays_inside_its_band() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hotspot(
        tmp.path(),
        &["ripley", "--synthetic", "csr", "--n", "500", "--out", "o", "--seed", "21"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let text = std::fs::read_to_string(tmp.path().join("o/ripley_f.csv")).unwrap();
    let mut inside = 0usize;
    let mut total = 0usize;
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (empirical, low, high) = (cols[1], cols[3], cols[4]);
        total += 1;
        if empirical >= low && empirical <= high {
            inside += 1;
        }
    }
    assert!(total > 0);
    assert!(inside as f64 >= 0.9 * total as f64, "{inside}/{total} bins inside the band");
}

#[test]
fn environment_variables_fill_in_missing_flags() {
    let tmp = tempfile::tempdir().unwrap();
    make_input(tmp.path(), 300, 5);
    let out = Command::new(bin())
        .args(["ingest", "--input", "data.csv"])
        .current_dir(tmp.path())
        .env_clear()
        .env("HOTSPOT_OUT", "envout")
        .output()
        .expect("binary runs");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("envout/incidents.csv").is_file());
}

#[test]
fn a_six_row_fixture_flows_through_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = "Year,Primary Type,Latitude,Longitude\n\
               2018,THEFT,41.881,-87.627\n\
               2018,theft,41.882,-87.628\n\
               2019,Robbery,41.8815,-87.6275\n\
               2020,HOMICIDE,41.75,-87.55\n\
               2021,ARSON,41.95,-87.70\n\
               2022,MOTOR VEHICLE THEFT,41.90,-87.65\n";
    std::fs::write(tmp.path().join("data.csv"), csv).unwrap();
    let out = hotspot(
        tmp.path(),
        &[
            "run", "--input", "data.csv", "--out", "out", "--sample-size", "6",
            "--epsilon", "120", "--kappa", "2", "--runs", "3", "--seed", "5",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let odir = tmp.path().join("out");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(odir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["stages"][0]["rows"]["rows_read"], 6);
    assert_eq!(manifest["stages"][0]["rows"]["rows_kept"], 6);
    let labels = std::fs::read_to_string(odir.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 7, "header plus one label per incident");
    assert!(odir.join("report.json").is_file());
}
