use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symquad_cli::ResultTable;
use symquad_core::geometry::{so3_quadrature_euler, write_quadrature};

fn symquad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symquad"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_names_every_experiment() {
    let out = symquad(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["approx-rates", "quad-sweep", "random-sweep", "compare", "drift", "regularity-sweep", "distributions-preview"] {
        assert!(text.contains(id), "missing {id}");
    }
}

#[test]
fn run_writes_csv_and_svg_under_the_experiment_id() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "experiment = \"random-sweep\"\nname = \"small\"\nd = 1\ndegrees = [2]\ndistributions = [\"UUU\"]\n\
         n_train = 40\nn_test = 10\nt_values = [4, 8]\ntrials = 2\ntarget_degree = 6\n",
    );
    let out_dir = dir.path().join("out");
    let out = symquad(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("random-sweep/small.csv")).unwrap();
    assert!(out_dir.join("random-sweep/small.svg").exists());
    let table = ResultTable::from_csv(&csv).unwrap();
    assert_eq!(table.select("dist=UUU,K=2", "eps_sym").len(), 2);
    assert!(csv.starts_with("# experiment=small\n# config_sha256="));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "missing.toml", "experiment = \"random-sweep\"\nd = 1\n");
    let out = symquad(&["run", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires field"));

    let unknown = write(dir.path(), "unknown.toml", "experiment = \"drift\"\neps = [0.0]\nbogus = 1\n");
    assert_eq!(symquad(&["run", &unknown]).status.code(), Some(2));

    let bad_dist = write(
        dir.path(),
        "bad.toml",
        "experiment = \"approx-rates\"\nd = 1\ndegrees = [2]\ndistributions = [\"dH1U\"]\n",
    );
    assert_eq!(symquad(&["run", &bad_dist]).status.code(), Some(2));
    assert_eq!(symquad(&["run", dir.path().join("absent.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_quadrature_reports_the_degree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rule.txt");
    write_quadrature(&so3_quadrature_euler(3), &path).unwrap();
    let out = symquad(&["verify-quadrature", path.to_str().unwrap(), "--lmax", "6"]);
    assert!(out.status.success());
    let degree: usize = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(degree >= 3);
}

#[test]
fn drift_subcommand_writes_table_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = symquad(&[
        "drift",
        "--eps",
        "0,0.1",
        "--steps",
        "2000",
        "--record-every",
        "100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let drift_dir = dir.path().join("drift");
    let trajectories = fs::read_dir(&drift_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("_eps"))
        .count();
    assert_eq!(trajectories, 2);
    let bad = symquad(&["drift", "--dt", "-1", "--steps", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bundled_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for dir in [root.clone(), root.join("acceptance")] {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let cfg = symquad_cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                seen += 1;
            }
        }
    }
    assert!(seen >= 10);
}
