use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kbl(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("exp.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_kbl"))
        .args(args)
        .args(["--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .env_remove("KBL_WORKERS")
        .output()
        .unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn lln_check_passes_for_the_limit_case() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["lln-check"], "[model]\nsteps = 50\n[run]\nn = 100000\nreplicas = 2\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(tmp.path().join("lln_check.csv"));
    assert_eq!(rows[0], ["t", "mass", "mass_se", "analytic_mass", "distance"]);
    assert_eq!(rows.len(), 52);
}

#[test]
fn unattainable_tolerance_is_a_check_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["lln-check"], "[run]\nn = 10\nreplicas = 2\n[lln]\ntolerance = 1e-6\n");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_killing_keeps_full_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(
        tmp.path(),
        &["lln-check"],
        "[model]\nzeta = { kind = \"constant\", c = 0.0 }\nsteps = 20\n[run]\nn = 1000\nreplicas = 2\n",
    );
    assert_eq!(out.status.code(), Some(0));
    for row in &csv_rows(tmp.path().join("lln_check.csv"))[1..] {
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn varrep_default_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["varrep-check"], "");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(tmp.path().join("varrep.csv"));
    assert_eq!(rows[0], ["case", "lhs", "rhs", "gap", "u_star", "lambda_star", "quadrature_error"]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn empty_frontier_family_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["rate-frontier"], "[frontier]\ncontrols = []\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("frontier.csv").exists());
}

#[test]
fn constant_functional_has_no_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(
        tmp.path(),
        &["laplace-compare"],
        "[model]\nsteps = 20\n[run]\nreplicas = 4\n[laplace]\nsizes = [200]\nfunctional = { intercept = 0.3, slope = 0.0, lower = 0.3, upper = 0.3 }\n",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(tmp.path().join("laplace.csv"));
    assert_eq!(rows[0], ["n", "mc", "se", "upper", "gap", "upper_se", "best_control"]);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.3);
    assert!((rows[1][3].parse::<f64>().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["simulate"], "[run]\nparticles = 10\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("particles"));
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["simulate", "--dry-run", "--seed", "99"], "[run]\nn = 10\n");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("seed = 99"), "{text}");
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn simulate_writes_paths_and_kill_times() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(
        tmp.path(),
        &["simulate"],
        "[model]\nsteps = 10\n[run]\nn = 50\nreplicas = 2\n[simulate]\nkill_times = true\n",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = csv_rows(tmp.path().join("measure_paths.csv"));
    assert_eq!(paths[0], ["replica", "t", "mass", "zeta_mean"]);
    assert_eq!(paths.len(), 1 + 2 * 11);
    let kills = csv_rows(tmp.path().join("kill_times.csv"));
    assert_eq!(kills[0], ["replica", "particle", "threshold", "kill_time"]);
    assert_eq!(kills.len(), 1 + 2 * 50);
}

#[test]
fn zero_workers_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kbl(tmp.path(), &["simulate", "--workers", "0"], "[run]\nn = 10\n");
    assert_eq!(out.status.code(), Some(2));
}
