use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const FLAT: &str = r#"{
  "medium": { "m1": 2.0, "m2": 2.0, "energy": 1.0 },
  "curve": { "family": "Flat", "params": [] },
  "n_c": 32,
  "sources": [ { "pos": [0.0, 2.5], "side": "Omega2" } ]
}"#;

fn edgewave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgewave")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_three_files_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "flat.json", FLAT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = edgewave(&["--serial", "solve", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["densities.csv", "report.json", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    assert_eq!(fs::read(a.join("densities.csv")).unwrap(), fs::read(b.join("densities.csv")).unwrap());

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["serial"], true);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["densities.csv", "report.json", "manifest.json"]);
    assert_eq!(manifest["config"]["medium"]["energy"], 1.0);

    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["diagnostics"]["jump"]["value"].as_f64().unwrap() < 1e-5);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let bad = write_config(tmp.path(), "bad.json", &FLAT.replace("\"energy\": 1.0", "\"energy\": 2.5"));
    let o = edgewave(&["solve", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("|E| < min(m1, m2)"), "{}", stderr(&o));

    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&edgewave(&["solve", "--config", s(&missing), "--out", s(&out)])), 4);

    let capped = write_config(tmp.path(), "capped.json", &FLAT.replace("\"n_c\": 32", "\"n_c\": 32, \"gmres_max_iter\": 2"));
    let o = edgewave(&["solve", "--config", s(&capped), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(out.join("densities.csv").is_file(), "outputs are written before reporting non-convergence");

    let cfg = write_config(tmp.path(), "flat.json", FLAT);
    let o = edgewave(&["solve", "--config", s(&cfg), "--out", s(&out), "--ncmax", "16"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&edgewave(&["solve", "--config", s(&cfg), "--out", s(&out), "--tol", "-1"])), 2);
    assert_eq!(code(&edgewave(&["solve", "--bogus"])), 2);

    // output path blocked by a regular file
    let blocker = write_config(tmp.path(), "file", "x");
    assert_eq!(code(&edgewave(&["solve", "--config", s(&cfg), "--out", s(&blocker.join("sub"))])), 4);
}

fn field_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn grid_values_masking_and_refinement() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "flat.json", FLAT);
    let far = tmp.path().join("far");
    let o = edgewave(&["grid", "--config", s(&cfg), "--out", s(&far), "--grid", "3,4,2,5,6,2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = field_rows(&far.join("field.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[5] == "0" && r[2].parse::<f64>().unwrap().is_finite()));
    assert!(far.join("interface.csv").is_file());

    let coarse = tmp.path().join("coarse");
    let fine = tmp.path().join("fine");
    edgewave(&["grid", "--config", s(&cfg), "--out", s(&coarse), "--grid=-2,2,3,-1,1,3"]);
    edgewave(&["grid", "--config", s(&cfg), "--out", s(&fine), "--grid=-2,2,5,-1,1,5"]);
    let c = field_rows(&coarse.join("field.csv"));
    let f = field_rows(&fine.join("field.csv"));
    // y = 0 row lies on the interface
    let masked: Vec<_> = c.iter().filter(|r| r[5] == "1").collect();
    assert_eq!(masked.len(), 3);
    assert!(masked.iter().all(|r| r[2].is_empty() && r[1].parse::<f64>().unwrap() == 0.0));
    for r in c.iter().filter(|r| r[5] == "0") {
        let g = f.iter().find(|q| q[0] == r[0] && q[1] == r[1]).expect("shared point");
        for k in [2, 3] {
            let (x, y): (f64, f64) = (r[k].parse().unwrap(), g[k].parse().unwrap());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-3), "{x} vs {y}");
        }
    }
    assert_eq!(code(&edgewave(&["grid", "--config", s(&cfg), "--out", s(&fine), "--grid", "1,2,3"])), 2);
}

#[test]
fn converge_ladders() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "flat.json", FLAT);
    let out = tmp.path().join("conv");
    let o = edgewave(&["converge", "--config", s(&cfg), "--out", s(&out), "--nc", "16,32", "--reference", "sommerfeld"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "study,n_c,tau,probe,x,y,re_u,im_u,re_ref,im_ref,rel_err,reference,n_iter,converged,wall_s"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[11] == "sommerfeld" && r[10].parse::<f64>().unwrap() < 1e-6));

    let o = edgewave(&["converge", "--config", s(&cfg), "--out", s(&out), "--nc", "32"]);
    assert_eq!(code(&o), 2, "single-entry ladder is a config error");

    let o = edgewave(&[
        "converge", "--config", s(&cfg), "--out", s(&out), "--taus", "0.5,1", "--tau-nc", "16", "--ncmax", "32",
        "--probes", "1,1;-2,3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("tau,16,")).count(), 4);
}

#[test]
fn scatter_and_selftest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sc");
    let o = edgewave(&["scatter", "--out", s(&out), "--b-grid", "0.1,3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][1] < 1e-2 && rows[1][1] > 0.9);
    assert!(out.join("manifest.json").is_file());

    assert_eq!(code(&edgewave(&["scatter", "--out", s(&out), "--b-grid=-1:2:4"])), 2);
    let cfg = write_config(tmp.path(), "flat.json", FLAT);
    assert_eq!(code(&edgewave(&["scatter", "--config", s(&cfg), "--out", s(&out), "--b-grid", "1"])), 2);

    let o = edgewave(&["selftest"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 5 && stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
}

#[test]
fn thread_env_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_edgewave")).env("EDGEWAVE_THREADS", "zero").arg("selftest").output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("EDGEWAVE_THREADS"));
}
