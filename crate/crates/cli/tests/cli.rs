use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_salsa2d"));
    c.env_remove("SALSA2D_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// 10 x 10 region, a river along x = 2, presences crowding the river.
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let square = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]}}]}"#;
        std::fs::write(dir.path().join("region.geojson"), square).unwrap();
        let river = r#"{"type":"Feature","geometry":{"type":"LineString","coordinates":[[2,0],[2,10]]}}"#;
        std::fs::write(dir.path().join("river.geojson"), river).unwrap();

        let mut state: u64 = 0x2545_f491_4f6c_dd1d;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut text = String::from("x,y\n");
        for i in 0..70 {
            let (x, y) = if i < 55 { (0.2 + 3.6 * next(), 0.2 + 9.6 * next()) } else { (4.0 + 5.8 * next(), 0.2 + 9.6 * next()) };
            text.push_str(&format!("{x:.4},{y:.4}\n"));
        }
        std::fs::write(dir.path().join("presences.csv"), text).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn grid_single_spacing_writes_grid_only() {
    let f = Fixture::new();
    let out = f.out("grid");
    ok(&["grid", "--region", &f.path("region.geojson"), "--spacing", "2", "--out", out.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out.join("pseudo_absences.csv"));
    assert_eq!(header, vec!["x", "y"]);
    assert_eq!(rows.len(), 36);
    assert!(!out.join("convergence.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["status"], "succeeded");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["inputs"][0]["role"], "region");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["config"]["spacing"], 2.0);
}

#[test]
fn missing_region_is_an_input_error() {
    let f = Fixture::new();
    let out = f.out("missing");
    let missing = f.path("nope.geojson");
    let o = run(&["grid", "--region", &missing, "--spacing", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nope.geojson"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["exit_code"], 2);
}

#[test]
fn bad_flag_is_an_input_error() {
    let o = run(&["fit", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_convergence_ladder() {
    let f = Fixture::new();
    let out = f.out("conv");
    ok(&[
        "grid",
        "--region",
        &f.path("region.geojson"),
        "--presences",
        &f.path("presences.csv"),
        "--spacings",
        "5,4,3,2,1.5,1.25,1",
        "--probe-knots",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    let (header, rows) = csv_rows(&out.join("convergence.csv"));
    assert_eq!(header[0], "spacing");
    // 7 spacings x (5 knots x 2 bases)
    assert_eq!(rows.len(), 14);
    assert!(out.join("pseudo_absences.csv").exists());
    let chosen: Vec<&Vec<String>> = rows.iter().filter(|r| r[5] == "1").collect();
    assert_eq!(chosen.len(), 2);
}

fn fit_args<'a>(f: &'a Fixture, out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = [
        "fit",
        "--presences",
        &f.path("presences.csv"),
        "--region",
        &f.path("region.geojson"),
        "--spacing",
        "1",
        "--out",
        out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn ok_s(args: &[String]) -> Output {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&a)
}

#[test]
fn salsa_fit_is_reproducible() {
    let f = Fixture::new();
    let a = f.out("fit_a");
    let b = f.out("fit_b");
    let extra = ["--method", "salsa2d", "--basis", "exponential", "--distance", "euclidean", "--start-knots", "10"];
    ok_s(&fit_args(&f, a.to_str().unwrap(), &extra));
    ok_s(&fit_args(&f, b.to_str().unwrap(), &extra));
    for name in ["model.json", "trace.jsonl", "knots.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(a.join("model.json")).unwrap()).unwrap();
    assert_eq!(doc["method"], "salsa2d");
    assert_eq!(doc["basis"], "exponential");
    assert_eq!(doc["metric"], "euclidean");
    let k = doc["summary"]["n_knots"].as_u64().unwrap();
    assert!((2..=100).contains(&k));
    let trace = std::fs::read_to_string(a.join("trace.jsonl")).unwrap();
    assert!(trace.lines().count() >= 1);
    for line in trace.lines() {
        let e: Value = serde_json::from_str(line).unwrap();
        if e["accepted"] == true {
            assert!(e["after"].as_f64().unwrap() < e["before"].as_f64().unwrap());
        }
    }
    let m = manifest(&a);
    assert_eq!(m["summary"]["end_knots"].as_u64().unwrap(), k);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn averaging_writes_ensemble_summary() {
    let f = Fixture::new();
    let out = f.out("avg");
    ok_s(&fit_args(&f, out.to_str().unwrap(), &["--method", "average", "--k-list", "5,10", "--r-count", "4"]));
    let (header, rows) = csv_rows(&out.join("ensemble.csv"));
    assert_eq!(header, vec!["K", "r_index", "logPL", "AICc", "delta", "weight"]);
    // 2 knot counts x 4 ranges; members that fail to fit are reported, not averaged
    assert!((1..=8).contains(&rows.len()));
    if rows.len() < 8 {
        assert!(!manifest(&out)["warnings"].as_array().unwrap().is_empty());
    }
    let total: f64 = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-6);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(doc["method"], "average");
}

#[test]
fn sweep_has_forty_eight_rows() {
    let f = Fixture::new();
    let out = f.out("sweep");
    ok_s(&fit_args(&f, out.to_str().unwrap(), &["--sweep", "--spacing", "2", "--r-count", "3", "--max-outer", "2"]));
    let (header, rows) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(header, vec!["distance", "basis", "start_knots", "end_knots", "loglik", "bic", "minutes"]);
    assert_eq!(rows.len(), 48);
    assert_eq!(rows[0][..3], ["Euclidean", "Exponential", "5"]);
    assert_eq!(rows[47][..3], ["Geodesic", "Gaussian", "60"]);
}

#[test]
fn predict_flags_top_percent() {
    let f = Fixture::new();
    let fit = f.out("pfit");
    ok_s(&fit_args(&f, fit.to_str().unwrap(), &["--start-knots", "8"]));
    let grid = f.out("pgrid");
    ok(&["grid", "--region", &f.path("region.geojson"), "--spacing", "0.5", "--out", grid.to_str().unwrap()]);
    let out = f.out("pred");
    ok(&[
        "predict",
        "--model",
        fit.join("model.json").to_str().unwrap(),
        "--points",
        grid.join("pseudo_absences.csv").to_str().unwrap(),
        "--top-percent",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    let (header, rows) = csv_rows(&out.join("predictions.csv"));
    assert_eq!(header, vec!["x", "y", "intensity", "top"]);
    assert_eq!(rows.len(), 441);
    let n_top = rows.iter().filter(|r| r[3] == "true").count();
    assert!((20..=23).contains(&n_top), "{n_top} flagged");
    let lambda: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let threshold = lambda.iter().zip(&rows).filter(|(_, r)| r[3] == "true").map(|(l, _)| *l).fold(f64::INFINITY, f64::min);
    assert!(lambda.iter().zip(&rows).all(|(l, r)| r[3] == "true" || *l < threshold));
}

#[test]
fn null_model_predicts_a_constant() {
    let f = Fixture::new();
    let doc = serde_json::json!({
        "version": "0.1.0",
        "method": "fixed",
        "basis": "gaussian",
        "metric": "euclidean",
        "r_values": [1.0, 0.5],
        "candidates": [{"x": 1.0, "y": 1.0}],
        "members": [{
            "weight": 1.0,
            "labels": ["intercept"],
            "coefficients": [(0.7f64).ln()],
            "knots": [],
            "log_pl": -10.0,
            "bic": 20.0,
            "aicc": null
        }],
        "summary": {"log_pl": -10.0, "bic": 20.0, "aicc": null, "n_obs": 10, "n_params": 0, "n_knots": 0}
    });
    let model = f.out("null.json");
    std::fs::write(&model, doc.to_string()).unwrap();
    let out = f.out("nullpred");
    ok(&["predict", "--model", model.to_str().unwrap(), "--points", &f.path("presences.csv"), "--out", out.to_str().unwrap()]);
    let (_, rows) = csv_rows(&out.join("predictions.csv"));
    assert_eq!(rows.len(), 70);
    for r in rows {
        assert!((r[2].parse::<f64>().unwrap() - 0.7).abs() < 1e-12);
    }
}

#[test]
fn threshold_term_and_two_row_partial() {
    let f = Fixture::new();
    let fit = f.out("tfit");
    let river = format!("water={}", f.path("river.geojson"));
    ok_s(&fit_args(&f, fit.to_str().unwrap(), &["--start-knots", "5", "--feature", &river, "--threshold", "water=1,2,3,4,5"]));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(fit.join("model.json")).unwrap()).unwrap();
    assert_eq!(doc["terms"][0]["kind"], "threshold");
    let out = f.out("tpartial");
    ok(&["partial", "--model", fit.join("model.json").to_str().unwrap(), "--term", "water", "--out", out.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out.join("partial_water.csv"));
    assert_eq!(header, vec!["water", "intensity"]);
    assert_eq!(rows.len(), 2);
    // presences crowd the river, so being near it raises intensity
    let near: f64 = rows[0][1].parse().unwrap();
    let far: f64 = rows[1][1].parse().unwrap();
    assert!(near > far);

    // prediction needs the same covariate source
    let pred = f.out("tpred");
    ok(&[
        "predict",
        "--model",
        fit.join("model.json").to_str().unwrap(),
        "--points",
        &f.path("presences.csv"),
        "--feature",
        &river,
        "--out",
        pred.to_str().unwrap(),
    ]);
    let o = run(&[
        "predict",
        "--model",
        fit.join("model.json").to_str().unwrap(),
        "--points",
        &f.path("presences.csv"),
        "--out",
        f.out("tpred2").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let f = Fixture::new();
    let cfg = f.out("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# fit settings\npresences = {}\nregion = {}\nspacing = 1\nbasis = gaussian\nstart_knots = 6\nmax_outer = 2\n",
            f.path("presences.csv"),
            f.path("region.geojson")
        ),
    )
    .unwrap();
    let out = f.out("cfgfit");
    ok(&["fit", "--config", cfg.to_str().unwrap(), "--basis", "exponential", "--out", out.to_str().unwrap()]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(doc["basis"], "exponential");
    let m = manifest(&out);
    assert_eq!(m["config"]["start_knots"], 6);
    assert!(m["inputs"].as_array().unwrap().iter().any(|i| i["role"] == "config"));
}

#[test]
fn thread_count_from_environment_and_flag() {
    let f = Fixture::new();
    let out = f.out("threads");
    let o = bin()
        .env("SALSA2D_THREADS", "1")
        .args(["grid", "--region", &f.path("region.geojson"), "--spacing", "2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(manifest(&out)["config"]["threads"], 1);
    let o = bin()
        .env("SALSA2D_THREADS", "1")
        .args(["grid", "--region", &f.path("region.geojson"), "--spacing", "2", "--threads", "2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(manifest(&out)["config"]["threads"], 2);
}

#[test]
fn numerical_failure_exits_with_one() {
    let f = Fixture::new();
    let out = f.out("numfail");
    let args = fit_args(&f, out.to_str().unwrap(), &["--start-knots", "6", "--min-knots", "6", "--max-vif", "1.000001"]);
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(&a);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["status"], "failed");
    assert!(!out.join("model.json").exists());
}
