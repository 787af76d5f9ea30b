use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use eoam::config::MatrixSpec;
use eoam::exit;
use eoam::output::RunSummary;
use eoam::sweep::run_cell;
use eoam::tables::TableSet;
use eoam_core::scenario::{run_scenario, Planner};
use tempfile::TempDir;

const GRID: &str = r#"
speeds = [26.0, 30.0, 34.0, 38.0]
mus = [1.0, 0.3]
"#;

const SCENARIO: &str = r#"
[scenario]
ego_speed_kmh = 120.0
mu = 1.0
parked_cars_enabled = true
"#;

const MATRIX: &str = r#"
speeds_kmh = [120.0, 110.0]
mus = [1.0, 0.3]
oncoming = ["none", 300.0]
"#;

fn eoam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eoam"))
        .args(args)
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Small precomputed table set shared by every test in this file.
fn workspace() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("grid.toml"), GRID).unwrap();
        fs::write(p.join("scenario.toml"), SCENARIO).unwrap();
        fs::write(p.join("matrix.toml"), MATRIX).unwrap();
        let vehicle = configs().join("vehicle.toml");
        let out = eoam(&[
            "precompute",
            "--vehicle",
            vehicle.to_str().unwrap(),
            "--grid",
            p.join("grid.toml").to_str().unwrap(),
            "--out",
            p.join("tables").to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        dir
    })
    .path()
}

fn path(rel: &str) -> String {
    workspace().join(rel).to_str().unwrap().to_string()
}

fn run_into(out: &str) -> Output {
    eoam(&[
        "run",
        "--scenario",
        &path("scenario.toml"),
        "--tables",
        &path("tables"),
        "--out",
        &path(out),
    ])
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(eoam(&[]).status.code(), Some(exit::USAGE));
    assert_eq!(
        eoam(&["run", "--scenario"]).status.code(),
        Some(exit::USAGE)
    );
    assert_eq!(eoam(&["frobnicate"]).status.code(), Some(exit::USAGE));
    assert_eq!(eoam(&["--help"]).status.code(), Some(exit::OK));
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "speeds = []\n").unwrap();
    let vehicle = configs().join("vehicle.toml");
    let out = eoam(&[
        "precompute",
        "--vehicle",
        vehicle.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::USAGE));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[scenario]\nmu = 1.0\nego_speed_kmh = \"fast\"\n").unwrap();
    let out = eoam(&[
        "run",
        "--scenario",
        bad.to_str().unwrap(),
        "--tables",
        &path("tables"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::DATA));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:3:"), "{err}");

    fs::write(&bad, "[scenario]\nmu = 1.0\nwarp_drive = true\n").unwrap();
    let out = eoam(&[
        "run",
        "--scenario",
        bad.to_str().unwrap(),
        "--tables",
        &path("tables"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp_drive"));
}

#[test]
fn missing_page_and_tables_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    fs::write(&sc, "[scenario]\nmu = 0.1\n").unwrap();
    let out = eoam(&[
        "run",
        "--scenario",
        sc.to_str().unwrap(),
        "--tables",
        &path("tables"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::DATA));
    let out = eoam(&[
        "run",
        "--scenario",
        &path("scenario.toml"),
        "--tables",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::DATA));
}

#[test]
fn tampered_tables_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(path("tables")).unwrap() {
        let e = entry.unwrap();
        fs::copy(e.path(), dir.path().join(e.file_name())).unwrap();
    }
    let t = dir.path().join("tables.txt");
    let text = fs::read_to_string(&t).unwrap();
    fs::write(&t, text.replacen("plane y_target", "plane y_target ", 1)).unwrap();
    let out = eoam(&["validate", "--tables", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::DATA));
    let out = eoam(&["validate", "--tables", &path("tables")]);
    assert_eq!(
        out.status.code(),
        Some(exit::OK),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn run_writes_outputs_and_exit_code() {
    let out = eoam(&[
        "run",
        "--scenario",
        &path("scenario.toml"),
        "--tables",
        &path("tables"),
        "--out",
        &path("run_plots"),
        "--dump-plots",
    ]);
    assert_eq!(
        out.status.code(),
        Some(exit::OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = workspace().join("run_plots");
    for f in [
        "timeseries.csv",
        "phase_trace.csv",
        "outcome.toml",
        "manifest.toml",
        "plots/speed.csv",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let manifest = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    let ts = fs::read_to_string(dir.join("timeseries.csv")).unwrap();
    let hash = ts
        .lines()
        .next()
        .unwrap()
        .strip_prefix("# manifest ")
        .unwrap();
    assert!(manifest.contains(hash));
    assert!(fs::read_to_string(dir.join("outcome.toml"))
        .unwrap()
        .contains("outcome = \"green\""));
}

#[test]
fn repeated_runs_are_byte_identical() {
    assert!(run_into("a").status.success());
    assert!(run_into("b").status.success());
    for f in ["timeseries.csv", "phase_trace.csv", "outcome.toml"] {
        assert_eq!(
            fs::read(path(&format!("a/{f}"))).unwrap(),
            fs::read(path(&format!("b/{f}"))).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_ignores_worker_count() {
    let sweep = |out: &str, workers: &str| {
        let o = eoam(&[
            "sweep",
            "--matrix",
            &path("matrix.toml"),
            "--tables",
            &path("tables"),
            "--out",
            &path(out),
            "--parallel",
            workers,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(path(&format!("{out}/sweep.csv"))).unwrap()
    };
    let one = sweep("s1", "1");
    assert_eq!(one, sweep("s3", "3"));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 2 + 8);
}

#[test]
fn one_cell_sweep_matches_single_run() {
    let ts = TableSet::load(&workspace().join("tables")).unwrap();
    let spec: MatrixSpec = toml::from_str(MATRIX).unwrap();
    for cell in spec.cells().iter().filter(|c| c.mu == 1.0) {
        let planner = Planner {
            table: &ts.table,
            diagrams: &ts.diagrams,
            params: &ts.vehicle,
            runtime: &spec.runtime,
        };
        let direct = RunSummary::new(&run_scenario(&cell.config, &planner).unwrap(), "m");
        assert_eq!(run_cell(cell, &ts, &spec, "m").unwrap(), direct);
    }
}
