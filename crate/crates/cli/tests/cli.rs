use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn arratia(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arratia"))
        .args(args)
        .arg("--output-root")
        .arg(root)
        .env_remove("ARRATIA_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_dirs(root: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

const SMOKE: &str = "seed = 42\n\n[grid]\nm_space = 5\nk_time = 100\nhorizon = 0.2\n";

#[test]
fn simulate_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SMOKE);
    let out = arratia(&["simulate", "--config", cfg.to_str().unwrap()], &tmp.path().join("runs"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dirs = run_dirs(&tmp.path().join("runs"), "simulate-");
    assert_eq!(dirs.len(), 1);
    let manifest = fs::read_to_string(dirs[0].join("manifest.toml")).unwrap();
    assert!(manifest.contains("[manifest]") && manifest.contains("seed = 42"));
    let csv = fs::read_to_string(dirs[0].join("path.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,u,value,mass"));
    assert_eq!(csv.lines().count(), 1 + 101 * 5);
    for f in ["merges.csv", "initial.csv", "report.json"] {
        assert!(dirs[0].join(f).exists(), "{f}");
    }
}

#[test]
fn compare_writes_both_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 3\nreplicas = 40\n[grid]\nm_space = 16\nk_time = 50\nhorizon = 0.2\n[compare]\nsigmas = [0.2]\nepsilons = [0.01]\n";
    let cfg = write(tmp.path(), "c.toml", text);
    let root = tmp.path().join("runs");
    let out = arratia(&["compare", "--config", cfg.to_str().unwrap()], &root);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = &run_dirs(&root, "compare-")[0];
    assert!(dir.join("coalescing.csv").exists());
    assert!(dir.join("smooth-sigma0.2-eps0.01.csv").exists());
    assert!(dir.join("compare.json").exists());
}

#[test]
fn verify_is_byte_identical_across_roots() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 9\nreplicas = 100\n[grid]\nm_space = 4\nk_time = 40\nhorizon = 0.2\n";
    let cfg = write(tmp.path(), "v.toml", text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for root in [&a, &b] {
        let out = arratia(&["verify", "--config", cfg.to_str().unwrap()], root);
        assert!(matches!(out.status.code(), Some(0 | 1)));
    }
    let da = &run_dirs(&a, "verify-")[0];
    let db = &run_dirs(&b, "verify-")[0];
    assert_eq!(da.file_name(), db.file_name());
    assert_eq!(snapshot(da), snapshot(db));
}

#[test]
fn rerun_from_manifest_reuses_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SMOKE);
    let root = tmp.path().join("runs");
    arratia(&["simulate", "--config", cfg.to_str().unwrap()], &root);
    let dir = run_dirs(&root, "simulate-").remove(0);
    let before = snapshot(&dir);
    let manifest = dir.join("manifest.toml");
    let out = arratia(&["simulate", "--config", manifest.to_str().unwrap()], &root);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(run_dirs(&root, "simulate-"), vec![dir.clone()]);
    assert_eq!(snapshot(&dir), before);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SMOKE);
    let root = tmp.path().join("runs");
    arratia(&["simulate", "--config", cfg.to_str().unwrap()], &root);
    arratia(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "43"], &root);
    assert_eq!(run_dirs(&root, "simulate-").len(), 2);
}

#[test]
fn tampered_run_directory_is_reported_and_left_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SMOKE);
    let root = tmp.path().join("runs");
    arratia(&["simulate", "--config", cfg.to_str().unwrap()], &root);
    let dir = run_dirs(&root, "simulate-").remove(0);
    fs::write(dir.join("path.csv"), "edited\n").unwrap();
    let out = arratia(&["simulate", "--config", cfg.to_str().unwrap()], &root);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(fs::read_to_string(dir.join("path.csv")).unwrap(), "edited\n");
}

#[test]
fn config_errors_exit_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &format!("{SMOKE}colour = \"blue\"\n"));
    let out = arratia(&["simulate", "--config", cfg.to_str().unwrap()], &tmp.path().join("runs"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7") && err.contains("colour"), "{err}");

    let smooth = write(tmp.path(), "smooth.toml", &format!("{SMOKE}[flow]\nkind = \"smooth\"\n[smooth]\nsigma = 0.2\n"));
    let out = arratia(&["simulate", "--config", smooth.to_str().unwrap()], &tmp.path().join("runs"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn failing_check_exits_1_and_names_report() {
    // a window that cannot contain the exponent
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 1\nreplicas = 20\n[grid]\nm_space = 8\nk_time = 40\nhorizon = 0.4\n[mass]\ntimes = [0.1, 0.2, 0.4]\nexponent_window = [5.0, 6.0]\n";
    let cfg = write(tmp.path(), "m.toml", text);
    let out = arratia(&["mass-stats", "--config", cfg.to_str().unwrap()], &tmp.path().join("runs"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("report.json"));
    let dir = &run_dirs(&tmp.path().join("runs"), "mass-stats-")[0];
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    let failed: Vec<&str> = report
        .as_array()
        .unwrap()
        .iter()
        .filter(|t| t["pass"] == false)
        .map(|t| t["test_name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["mass/exponent-off-window"]);
}

#[test]
fn sheet_dump_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 5\nreplicas = 200\n[grid]\nm_space = 4\nk_time = 4\nhorizon = 1.0\n[sheet]\ndump_binary = true\nnegative_control = false\n";
    let cfg = write(tmp.path(), "s.toml", text);
    let root = tmp.path().join("runs");
    let out = arratia(&["sheet-check", "--config", cfg.to_str().unwrap()], &root);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let dir = &run_dirs(&root, "sheet-check-")[0];
    let bytes = fs::read(dir.join("sheet.bin")).unwrap();
    let sheet = arratia_core::SheetGrid::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(sheet.spec().m_space, 4);
    assert_eq!(bytes.len(), 32 + 16 * 8);
}
