mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embclust_core::embedspace::{load_assignment, load_embeddings, PipelineConfig, RunResult};
use embclust_harness::ResultsTable;
use serde_json::json;

use common::{blob_bundle, write_bundle};

fn embclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embclust"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_bundle(dir.path(), &blob_bundle("toy", 3, 20, 8, 10.0, 0.5, 5));
    (dir, manifest)
}

#[test]
fn cluster_with_inline_config() {
    let (dir, manifest) = fixture();
    let labels = dir.path().join("labels.npy");
    let result = dir.path().join("result.json");
    let cfg = json!({"reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": "auto"}});
    let out = embclust(&[
        "cluster",
        "--manifest",
        s(&manifest),
        "--config",
        &cfg.to_string(),
        "--out-labels",
        s(&labels),
        "--out-result",
        s(&result),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let assignment = load_assignment(&labels).unwrap();
    assert_eq!(assignment.len(), 60);
    assert_eq!(assignment.n_clusters(), 3);
    let r: RunResult = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(r.ami, 1.0);
    assert!(r.silhouette_original.is_some());
}

#[test]
fn cluster_from_preset_prints_result() {
    let (_dir, manifest) = fixture();
    let out = embclust(&[
        "cluster",
        "--manifest",
        s(&manifest),
        "--encoder",
        "rn50-vicreg",
        "--clusterer",
        "spectral",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r: RunResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.n_clusters_pred, 3);
}

#[test]
fn reduce_writes_embeddings() {
    let (dir, manifest) = fixture();
    let target = dir.path().join("reduced.npy");
    let spec = dir.path().join("pca.json");
    std::fs::write(&spec, r#"{"kind": "pca", "dims": 2}"#).unwrap();
    let out = embclust(&[
        "reduce",
        "--manifest",
        s(&manifest),
        "--reduction",
        &format!("@{}", s(&spec)),
        "--out",
        s(&target),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let x = load_embeddings(&target).unwrap();
    assert_eq!((x.n_samples(), x.n_dims()), (60, 2));
}

#[test]
fn exit_codes() {
    let (dir, manifest) = fixture();
    let bad = json!({"reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": 0}});
    let out = embclust(&[
        "cluster",
        "--manifest",
        s(&manifest),
        "--config",
        &bad.to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    let ok = json!({"reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": 2}});
    let out = embclust(&[
        "cluster",
        "--manifest",
        s(&missing),
        "--config",
        &ok.to_string(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = embclust(&[
        "cluster",
        "--manifest",
        s(&manifest),
        "--encoder",
        "nobody",
        "--clusterer",
        "ap",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_records_failures_and_reports() {
    let (dir, manifest) = fixture();
    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        json!({
            "configs": {
                "kmeans": {"reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": "auto"}},
                "hdbscan": {"reduction": {"kind": "none"}, "clusterer": {"kind": "hdbscan", "min_cluster_size": 5}},
                "ap": {"reduction": {"kind": "pca", "dims": 50}, "clusterer": {"kind": "affinity_propagation"}}
            },
            "datasets": [{"encoder": "enc", "manifest": "toy/manifest.json"}]
        })
        .to_string(),
    )
    .unwrap();
    assert!(manifest.ends_with("toy/manifest.json"));
    let results = dir.path().join("results");
    let out = embclust(&["evaluate", "--grid", s(&grid), "--out-dir", s(&results)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let table = ResultsTable::load(&results.join("results.csv")).unwrap();
    assert_eq!(table.len(), 2);
    let from_json = ResultsTable::load(&results.join("results.json")).unwrap();
    assert_eq!(
        from_json.rows().collect::<Vec<_>>(),
        table.rows().collect::<Vec<_>>()
    );
    assert_eq!(from_json.failures().len(), 1);
    assert_eq!(from_json.failures()[0].clusterer, "ap");
    let failures = std::fs::read_to_string(results.join("failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2);

    let reports = dir.path().join("reports");
    let out = embclust(&[
        "report",
        "--table",
        s(&results.join("results.json")),
        "--out-dir",
        s(&reports),
        "--baseline",
        "enc",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["means.csv", "deltas.csv", "ranks.csv", "correlations.csv"] {
        assert!(reports.join(f).is_file(), "{f}");
    }
}

#[test]
fn search_writes_chosen_config() {
    let (dir, _manifest) = fixture();
    let spec = dir.path().join("search.json");
    std::fs::write(
        &spec,
        json!({
            "base": {"reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": 2}},
            "datasets": [{"manifest": "toy/manifest.json", "weight": 2.0}],
            "stages": [{"parameter": "clusterer.k", "candidates": [2, 3, 5]}]
        })
        .to_string(),
    )
    .unwrap();
    let chosen = dir.path().join("chosen.json");
    let report = dir.path().join("stages.json");
    let out = embclust(&[
        "search",
        "--spec",
        s(&spec),
        "--out",
        s(&chosen),
        "--report",
        s(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg: PipelineConfig =
        serde_json::from_str(&std::fs::read_to_string(&chosen).unwrap()).unwrap();
    let want: PipelineConfig = serde_json::from_value(json!({
        "reduction": {"kind": "none"}, "clusterer": {"kind": "kmeans", "k": 3}
    }))
    .unwrap();
    assert_eq!(cfg, want);
    let stages: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(stages[0]["chosen"], 1);
}
