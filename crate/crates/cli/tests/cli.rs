use std::f64::consts::{FRAC_PI_6, PI};
use std::path::Path;
use std::process::{Command, Output};

use orbitforge::dynamics::{preset_configuration, Preset};
use orbitforge::minimize::MinimizeOptions;
use orbitforge::{FourierLoop, MassSystem};
use orbitforge_cli::config::Resolution;
use orbitforge_cli::orbit::{Payload, Provenance};
use orbitforge_cli::OrbitFile;
use tempfile::TempDir;

const EIGHT: &str = r#"
[loop]
n = 3
period = 12.0
symmetry = "d6_eight"
starts = 3
"#;

fn orbitforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitforge"))
        .current_dir(dir)
        .args(args)
        .env_remove("ORBITFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn solved_eight() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eight.toml"), EIGHT).unwrap();
    let o = orbitforge(dir.path(), &["solve", "--config", "eight.toml", "--out", "eight.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn eight_solves_below_the_lagrange_comparison_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eight.toml"), EIGHT).unwrap();
    let o = orbitforge(dir.path(), &["solve", "--config", "eight.toml", "--out", "eight.json"]);
    assert_eq!(o.status.code(), Some(0));
    let report = json(&o);
    let action = report["best"]["action"].as_f64().unwrap();
    let lagrange = report["comparison_action"].as_f64().unwrap();
    let bound = 12.0 * 2f64.powf(-5.0 / 3.0) * 3f64.powf(2.0 / 3.0) * PI.powf(2.0 / 3.0) * 12f64.cbrt();
    assert!((lagrange - bound).abs() < 1e-12);
    assert!(action < bound, "{action} vs {bound}");

    let v = orbitforge(dir.path(), &["verify", "eight.json"]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    let checks = json(&v)["checks"].as_array().unwrap().clone();
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in [
        "closure",
        "energy_drift",
        "lagrange_jacobi",
        "invariance",
        "min_distance",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eight.toml"), EIGHT).unwrap();
    let a = orbitforge(
        dir.path(),
        &["solve", "--config", "eight.toml", "--seed", "7", "--out", "a.json"],
    );
    let b = Command::new(env!("CARGO_BIN_EXE_orbitforge"))
        .current_dir(dir.path())
        .args(["solve", "--config", "eight.toml", "--seed", "7", "--out", "b.json"])
        .env("ORBITFORGE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let fa = std::fs::read(dir.path().join("a.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn four_body_preset_on_three_bodies_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), EIGHT.replace("d6_eight", "hip_hop")).unwrap();
    let o = orbitforge(dir.path(), &["solve", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("hip_hop") && err.contains("bad.toml"), "{err}");
    assert!(!dir.path().join("orbit.json").exists());
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        EIGHT.replace("period = 12.0", "period = \"twelve\""),
    )
    .unwrap();
    let o = orbitforge(dir.path(), &["solve", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn corrupted_coefficients_fail_verification() {
    let dir = solved_eight();
    let path = dir.path().join("eight.json");
    let mut file = OrbitFile::read(&path).unwrap();
    if let Payload::Fourier { coefficients, .. } = &mut file.payload {
        for (k, c) in coefficients.iter_mut().enumerate() {
            *c *= 1.0 + 0.2 * ((k % 5) as f64 - 2.0);
        }
    }
    file.write(&dir.path().join("broken.json")).unwrap();
    let o = orbitforge(dir.path(), &["verify", "broken.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let report = json(&o);
    let closure = &report["checks"][0];
    assert_eq!(closure["name"], "closure");
    assert_eq!(closure["pass"], false);
    if let Some(v) = closure["value"].as_f64() {
        assert!(v > 1e-2, "{v}");
    }
}

#[test]
fn relative_equilibrium_closes() {
    let dir = tempfile::tempdir().unwrap();
    let ms = MassSystem::equal(3, 2).unwrap();
    // ω² a³ = 3 with ω = 1 for unit masses
    let side = 3f64.cbrt();
    let cfg = preset_configuration(Preset::Equilateral { side }, &ms).unwrap();
    let lp = FourierLoop::rigid_rotation(&cfg, 2.0 * PI, 1, 2).unwrap();
    let prov = Provenance::new(&MinimizeOptions::default(), &Resolution::default());
    OrbitFile::from_loop(&ms, &lp, None, prov)
        .write(&dir.path().join("lagrange.json"))
        .unwrap();
    let o = orbitforge(dir.path(), &["verify", "lagrange.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let closure = json(&o)["checks"][0]["value"].as_f64().unwrap();
    assert!(closure < 1e-6, "{closure}");
}

#[test]
fn schema_mismatch_is_an_input_error() {
    let dir = solved_eight();
    let text = std::fs::read_to_string(dir.path().join("eight.json")).unwrap();
    std::fs::write(
        dir.path().join("old.json"),
        text.replace("\"schema_version\": 1", "\"schema_version\": 0"),
    )
    .unwrap();
    let o = orbitforge(dir.path(), &["verify", "old.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema version 0"));
}

#[test]
fn eight_plot_is_one_curve_shared_by_all_bodies() {
    let dir = solved_eight();
    let o = orbitforge(dir.path(), &["plot", "eight.json", "--samples", "300", "--out", "fig"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,body,x,y,z"));
    let mut pts = vec![Vec::new(); 3];
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        pts[f[1] as usize].push([f[2], f[3], f[4]]);
    }
    assert!(pts.iter().all(|p| p.len() == 300));
    // body i+1 runs a third of a period behind body i, up to the symmetry
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        let direct = (0..300).all(|k| close(&pts[i][k], &pts[j][(k + 100) % 300]));
        let back = (0..300).all(|k| close(&pts[i][k], &pts[j][(k + 200) % 300]));
        assert!(direct || back, "bodies {i} and {j} do not share a curve");
    }
    let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

fn close(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-8)
}

#[test]
fn action_eval_matches_solve() {
    let dir = solved_eight();
    let o = orbitforge(dir.path(), &["action-eval", "eight.json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let action = r["action"].as_f64().unwrap();
    assert!((action - 30.2383).abs() < 1e-3, "{action}");
    let split = r["kinetic"].as_f64().unwrap() + r["potential"].as_f64().unwrap();
    assert!((split - action).abs() < 1e-12);
}

#[test]
fn empty_sweep_is_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitforge(dir.path(), &["sweep-p12"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn sweep_rows_stay_below_the_comparison_arc() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("p12.toml"),
        "[p12]\nu = 0.0\nperiod = 12.0\n\n[resolution]\ninterior = 48\n",
    )
    .unwrap();
    let grid = format!("0.2,0.45,{}", FRAC_PI_6);
    let o = orbitforge(
        dir.path(),
        &["sweep-p12", "--config", "p12.toml", "--u", &grid, "--out", "sweep.csv"],
    );
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let num = |r: &Vec<String>, name: &str| r[col(name)].parse::<f64>().unwrap();
    for r in &rows {
        assert!(num(r, "action") <= num(r, "bound") * (1.0 + 1e-9), "{r:?}");
    }
    assert!(num(&rows[1], "hessian") < 0.0);
    assert!(num(&rows[2], "hessian").abs() < 1e-12);
    let ok = rows.iter().all(|r| r[col("termination")] == "converged");
    assert_eq!(o.status.code(), Some(if ok { 0 } else { 1 }));
}

#[test]
fn sweep_outside_range_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitforge(dir.path(), &["sweep-p12", "--u", "0.1,0.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn marchal_demo_approaches_two_in_space() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitforge(dir.path(), &["marchal-demo", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rho,t0,A,A_m,normalized"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r[3] < r[2]));
    let last = rows.last().unwrap()[4];
    assert!((last.abs() - 2.0).abs() < 0.2, "{last}");
}

#[test]
fn marchal_demo_takes_explicit_radii() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitforge(dir.path(), &["marchal-demo", "--dim", "2", "--rho", "0.01,0.005"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn unconverged_fixed_end_solve_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[fixed-ends]
dim = 2
masses = [1.0, 1.0]
duration = 1.0
start = [[1.0, 0.0], [-1.0, 0.0]]
end = [[0.0, 1.0], [0.0, -1.0]]

[resolution]
interior = 32

[solver]
max_iter = 1
"#;
    std::fs::write(dir.path().join("f.toml"), cfg).unwrap();
    let o = orbitforge(dir.path(), &["solve", "--config", "f.toml", "--out", "f.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["best"]["termination"], "max-iter");
    assert!(dir.path().join("f.json").exists());
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_orbitforge"))
        .current_dir(dir.path())
        .args(["marchal-demo"])
        .env("ORBITFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
