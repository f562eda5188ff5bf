use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn protoclust(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protoclust"))
        .args(args)
        .current_dir(dir)
        .env_remove("PROTOCLUST_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = protoclust(tmp.path(), &["generate", "lines", "--n", "1000", "--segments", "10", "--seed", "7", "-o", name]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("N=1000 A=2 L=10"));
    }
    let a = fs::read(tmp.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1001);
}

#[test]
fn generate_defaults_to_out_dir() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_protoclust"))
        .args(["generate", "simple", "--n", "5", "--d", "3"])
        .current_dir(tmp.path())
        .env("PROTOCLUST_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("from-env/simple.csv").exists());
}

#[test]
fn unknown_generator_lists_valid_names() {
    let tmp = TempDir::new().unwrap();
    let out = protoclust(tmp.path(), &["generate", "spiral"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lines, banana, highleyman, spherical, simple"));
}

#[test]
fn missing_dataset_exits_2_with_path() {
    let tmp = TempDir::new().unwrap();
    let out = protoclust(tmp.path(), &["run", "--method", "kmeans", "--dataset", "no/such/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no/such/data.csv"));
}

#[test]
fn bad_config_exits_2_with_field() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[soinn]\nlambda = 0\n").unwrap();
    let out = protoclust(tmp.path(), &["run", "--config", "bad.toml", "--method", "soinn", "--dataset", "gen:simple"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("soinn.lambda"), "{}", stderr(&out));
}

#[test]
fn run_writes_report_and_row() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("exp.toml"), "[experiment]\nmethod = \"kmeans\"\ndataset = \"gen:simple:n=20,d=8\"\nruns = 5\n").unwrap();
    for _ in 0..2 {
        let out = protoclust(tmp.path(), &["run", "--config", "exp.toml", "--runs", "3", "--folds", "4", "--report", "r.json", "--csv", "rows.csv"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["entropies"].as_array().unwrap().len(), 3);
    assert_eq!(report["method"], "kmeans");
    let rows = fs::read_to_string(tmp.path().join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.starts_with("method,dataset,min,max,mean,std,ci_low,ci_high\n"));
}

#[test]
fn matrix_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = |dir: &'static str| {
        vec![
            "matrix", "--methods", "kmeans,somk,asca", "--dataset", "gen:simple:n=20,d=8", "--dataset", "gen:lines:n=60,segments=3",
            "--runs", "3", "--folds", "3", "--seed", "11", "--out-dir", dir,
        ]
    };
    for dir in ["one", "two"] {
        let out = protoclust(tmp.path(), &args(dir));
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let mut compared = 0;
    for entry in fs::read_dir(tmp.path().join("one")).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "timings.csv" {
            continue;
        }
        let a = fs::read(tmp.path().join("one").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("two").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
        compared += 1;
    }
    assert_eq!(compared, 6);
    let table = fs::read_to_string(tmp.path().join("one/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    let ci = fs::read_to_string(tmp.path().join("one/ci_plot_simple_n_20_d_8.csv")).unwrap();
    assert!(ci.starts_with("method,mean,lo,hi\n"));
    let echoed = fs::read_to_string(tmp.path().join("one/config.toml")).unwrap();
    assert!(echoed.contains("seed = 11"));

    let out = protoclust(tmp.path(), &["report", "one"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pairs differ"));
}

#[test]
fn matrix_records_failed_cells() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("plain.csv"), "1,2\n3,4\n5,6\n7,8\n").unwrap();
    let out = protoclust(
        tmp.path(),
        &["matrix", "--methods", "kmeans,som", "--dataset", "plain.csv?header=no&label=none", "--runs", "2", "--folds", "2", "--out-dir", "b"],
    );
    assert_eq!(out.status.code(), Some(2));
    let reports = fs::read_to_string(tmp.path().join("b/reports.json")).unwrap();
    assert!(reports.contains("no class labels"));
}
