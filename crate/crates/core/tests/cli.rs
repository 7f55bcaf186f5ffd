use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixedpath"))
        .current_dir(configs())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn numbers(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn enumerate_small_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["enumerate", "--config", "figure2.json"], dir.path());
    assert!(out.status.success());
    let paths = read_json(&dir.path().join("paths.json"));
    assert_eq!(paths["paths"].as_array().unwrap().len(), 3);
    assert_eq!(numbers(&paths["paths"][1]), vec![0.0, 0.5, 1.0]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("paths: 3"));
    assert!(dir.path().join("enumerate-summary.txt").exists());
}

#[test]
fn single_element_solve() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "hamiltonian": {"kind": "free", "mass": 1.0},
          "time": {"t_start": 0.0, "t_end": 1.0, "n_steps": 1},
          "space": {"kind": "uniform", "start": 0.0, "spacing": 1.0, "count": 2},
          "endpoints": {"q_i": 0.0, "q_f": 1.0},
          "matrix": {"kind": "explicit", "rows": [[2.0]]}
        }"#,
    );
    let out = run(
        &["solve", "--config", config.to_str().unwrap(), "--oracle"],
        &dir.path().join("o"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sol = read_json(&dir.path().join("o/solution.json"));
    assert!((sol["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    for key in ["alpha0", "beta0"] {
        assert!((numbers(&sol[key])[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }
}

#[test]
fn seeded_solve_matches_baseline() {
    let baseline = read_json(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/seeded_game_baseline.json"),
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["solve", "--config", "seeded_game.json", "--oracle"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("action_matrix.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let expected: Vec<Vec<f64>> = baseline["matrix"]
        .as_array()
        .unwrap()
        .iter()
        .map(numbers)
        .collect();
    assert_eq!(rows, expected);

    let value = baseline["value"].as_f64().unwrap();
    let tol = 2.0 / baseline["resolution"].as_f64().unwrap();
    let oracle = read_json(&dir.path().join("brute_force.json"));
    assert!((oracle["best"]["value"].as_f64().unwrap() - value).abs() <= 1e-9);
    let sol = read_json(&dir.path().join("solution.json"));
    assert!((sol["value"].as_f64().unwrap() - value).abs() <= tol);

    // The extremal pair is fixed up to a common sign.
    let best: Vec<f64> = [
        numbers(&oracle["best"]["alpha0"]),
        numbers(&oracle["best"]["beta0"]),
    ]
    .concat();
    let base: Vec<f64> = [numbers(&baseline["alpha0"]), numbers(&baseline["beta0"])].concat();
    let same = best.iter().zip(&base).all(|(x, y)| (x - y).abs() <= 1e-6);
    let flipped = best.iter().zip(&base).all(|(x, y)| (x + y).abs() <= 1e-6);
    assert!(same || flipped, "{best:?} vs {base:?}");
}

#[test]
fn single_path_modulus_is_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "hamiltonian": {"kind": "free", "mass": 1.0},
          "time": {"t_start": 0.0, "t_end": 1.0, "n_steps": 1},
          "space": {"kind": "uniform", "start": 0.0, "spacing": 0.5, "count": 3},
          "endpoints": {"q_i": 0.0, "q_f": 1.0},
          "phase_constant": "standard"
        }"#,
    );
    let out = run(
        &["propagate", "--config", config.to_str().unwrap()],
        &dir.path().join("o"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let p = &read_json(&dir.path().join("o/propagator.json"))["propagator"];
    assert_eq!(p["n_paths"].as_u64(), Some(1));
    let k = numbers(&p["k"]);
    let a = p["magnitude"].as_f64().unwrap();
    assert!((k[0].hypot(k[1]) - a).abs() <= 1e-15);
    assert!((a - (1.0 / (2.0 * std::f64::consts::PI)).sqrt()).abs() <= 1e-15);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str], name: &str| run(args, &dir.path().join(name)).status.code();

    assert_eq!(
        code(&["propagate", "--config", "caustic.json"], "caustic"),
        Some(4)
    );
    assert_eq!(code(&["enumerate"], "missing"), Some(2));
    assert_eq!(code(&["fermion-check", "--force-fail"], "forced"), Some(1));
    assert_eq!(code(&["fermion-check"], "fermion"), Some(0));

    let unknown = write_config(
        dir.path(),
        r#"{"hamiltonian": {"kind": "free", "mass": 1.0}, "bogus": 1}"#,
    );
    assert_eq!(
        code(
            &["enumerate", "--config", unknown.to_str().unwrap()],
            "unknown"
        ),
        Some(2)
    );

    let big = write_config(
        dir.path(),
        r#"{
          "hamiltonian": {"kind": "free", "mass": 1.0},
          "time": {"t_start": 0.0, "t_end": 1.0, "n_steps": 4},
          "space": {"kind": "oracle"},
          "endpoints": {"q_i": 0.0, "q_f": 1.0},
          "limits": {"path_cap": 1000}
        }"#,
    );
    assert_eq!(
        code(&["propagate", "--config", big.to_str().unwrap()], "cap"),
        Some(3)
    );

    let stuck = write_config(
        dir.path(),
        r#"{
          "hamiltonian": {"kind": "free", "mass": 1.0},
          "time": {"t_start": 0.0, "t_end": 1.0, "n_steps": 1},
          "space": {"kind": "uniform", "start": 0.0, "spacing": 1.0, "count": 2},
          "endpoints": {"q_i": 0.0, "q_f": 1.0},
          "matrix": {"kind": "random", "n": 2, "low": -5, "high": 5},
          "seed": 0
        }"#,
    );
    let out = run(
        &["solve", "--config", stuck.to_str().unwrap()],
        &dir.path().join("stuck"),
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(dir.path().join("stuck/solution.json").exists());
}

#[test]
fn fermion_check_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fermion-check"], dir.path());
    assert!(out.status.success());
    let report = read_json(&dir.path().join("fermion_check.json"));
    assert!(report.to_string().contains("associativity"));
}
