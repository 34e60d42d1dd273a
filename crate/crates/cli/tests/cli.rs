use std::path::Path;
use std::process::{Command, Output};

fn semigap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semigap"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    std::fs::write(dir.join(name), json).unwrap();
    name.to_string()
}

fn gap_line(o: &Output) -> (f64, f64) {
    let line = stdout(o);
    let mut parts = line.trim().split(' ');
    let gap = parts
        .next()
        .unwrap()
        .strip_prefix("gap=")
        .unwrap()
        .parse()
        .unwrap();
    let c_p = parts
        .next()
        .unwrap()
        .strip_prefix("C_P=")
        .unwrap()
        .parse()
        .unwrap();
    (gap, c_p)
}

#[test]
fn gap_on_ou_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ou.json",
        r#"{"backend": {"kind": "ou", "m": 8}}"#,
    );
    let o = semigap(dir.path(), &["gap", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "gap=1 C_P=1");
    let rates = std::fs::read_to_string(dir.path().join("out/rates.csv")).unwrap();
    assert_eq!(rates.lines().next(), Some("index,rate"));
    assert_eq!(rates.lines().count(), 9);

    let o = semigap(dir.path(), &["gap", "--backend", "grid"]);
    assert_eq!(code(&o), 0);
    let (_, c_p) = gap_line(&o);
    assert!((c_p - 1.0).abs() < 0.01, "{c_p}");

    let cfg = write_config(
        dir.path(),
        "uniform.json",
        r#"{"backend": {"kind": "grid", "potential": {"kind": "uniform"}, "interval": [0, 1], "n": 101}}"#,
    );
    let (gap, _) = gap_line(&semigap(dir.path(), &["gap", "--config", &cfg]));
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((gap - pi2).abs() < 0.02 * pi2, "{gap}");
}

#[test]
fn bounds_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = semigap(dir.path(), &["bounds", "--p", "4,3,1.3333333333333333"]);
    assert_eq!(code(&o), 0);
    let bounds: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bounds.json")).unwrap())
            .unwrap();
    let rows = bounds.as_array().unwrap();
    let find = |p: f64, source: &str| {
        rows.iter()
            .filter(|r| (r["p"].as_f64().unwrap() - p).abs() < 1e-12 && r["source"] == source)
            .map(|r| (r["lambda"].as_f64().unwrap(), r["K"].as_f64().unwrap()))
            .collect::<Vec<_>>()
    };
    assert_eq!(find(4.0, "thm-grand"), vec![(0.5, 2.0)]);
    assert!(find(4.0 / 3.0, "dual").iter().any(|(_, k)| *k == 2.0));

    let dominance: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/dominance.json")).unwrap(),
    )
    .unwrap();
    assert!(dominance.as_array().unwrap().iter().any(|d| d["p"] == 3.0
        && d["dominant"] == "interpolated"
        && d["dominated"] == "thm-grand"));

    let rec = std::fs::read_to_string(dir.path().join("out/c_recursion.json")).unwrap();
    assert!(rec.contains("\"numerator\": \"108\""));
}

#[test]
fn evolve_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"family": {"kind": "eigen-mixtures", "count": 3}, "p": [2, 4]}"#,
    );
    let o = semigap(dir.path(), &["evolve", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/curves.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,value,quantity,p,f_id"));
    // 3 members × 4 quantities × 41 times
    assert_eq!(csv.lines().count(), 1 + 3 * 4 * 41);
    assert!(csv.lines().any(|l| l.ends_with(",log_norm2,,mode-1")));
}

#[test]
fn verify_fails_on_inflated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"family": {"count": 30}, "custom_bounds": [{"p": 2, "lambda": 2, "K": 1, "source": "custom"}]}"#,
    );
    let o = semigap(dir.path(), &["verify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    let failed: Vec<&serde_json::Value> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "failed")
        .collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["witness"]
        .as_str()
        .unwrap()
        .starts_with("mode-1 "));
    assert!(dir.path().join("out/report.csv").exists());
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"sweep": {"axis": "p", "values": [2, 4, 8, 16]}}"#,
    );
    assert_eq!(code(&semigap(dir.path(), &["sweep", "--config", &cfg])), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("axis,p,lambda_observed,lambda_bound,K_bound,worst_ratio,C_P")
    );
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - 2.0 / v[1]).abs() < 1e-15);
        assert!(v[2] >= v[3] * (1.0 - 1e-8), "{line}");
    }

    let cfg = write_config(
        dir.path(),
        "n.json",
        r#"{"backend": {"kind": "grid"}, "family": {"count": 10}, "p": [2],
            "sweep": {"axis": "n", "values": [101, 201, 401]}}"#,
    );
    assert_eq!(code(&semigap(dir.path(), &["sweep", "--config", &cfg])), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let errors: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| (l.rsplit(',').next().unwrap().parse::<f64>().unwrap() - 1.0).abs())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&semigap(d, &["frobnicate"])), 64);
    assert_eq!(code(&semigap(d, &["gap", "--seed", "x"])), 64);
    assert_eq!(code(&semigap(d, &["bounds", "--p", "1"])), 64);
    assert_eq!(code(&semigap(d, &["gap", "--backend", "torus"])), 64);
    assert_eq!(code(&semigap(d, &["--help"])), 0);
    assert_eq!(code(&semigap(d, &["--version"])), 0);
    assert_eq!(code(&semigap(d, &["gap", "--config", "missing.json"])), 64);

    let cfg = write_config(d, "t.json", r#"{"times": {"count": 0}}"#);
    assert_eq!(code(&semigap(d, &["sweep", "--config", &cfg])), 64);
    let cfg = write_config(d, "e.json", r#"{"sweep": {"axis": "p", "values": []}}"#);
    assert_eq!(code(&semigap(d, &["sweep", "--config", &cfg])), 64);
    let cfg = write_config(
        d,
        "u.json",
        r#"{"backend": {"kind": "ou", "m": 8}, "typo": 1}"#,
    );
    assert_eq!(code(&semigap(d, &["gap", "--config", &cfg])), 64);
    let cfg = write_config(d, "n.json", r#"{"backend": {"kind": "grid", "n": 2}}"#);
    assert_eq!(code(&semigap(d, &["gap", "--config", &cfg])), 64);

    let cfg = write_config(
        d,
        "f.json",
        r#"{"backend": {"kind": "file", "path": "nowhere.json"}}"#,
    );
    assert_eq!(code(&semigap(d, &["gap", "--config", &cfg])), 3);

    // two disconnected pairs of states
    let generator = r#"{"kind": "matrix", "n": 4, "points": [0, 1, 2, 3], "weights": [0.25, 0.25, 0.25, 0.25],
        "matrix": [-1, 1, 0, 0, 1, -1, 0, 0, 0, 0, -1, 1, 0, 0, 1, -1]}"#;
    write_config(d, "split.json", generator);
    let cfg = write_config(
        d,
        "s.json",
        r#"{"backend": {"kind": "file", "path": "split.json"}}"#,
    );
    let o = semigap(d, &["gap", "--config", &cfg]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"backend": {"kind": "grid", "n": 51}, "out": "elsewhere"}"#,
    );
    let o = semigap(
        dir.path(),
        &["gap", "--config", &cfg, "--backend", "ou", "--out", "here"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "gap=1 C_P=1");
    assert!(dir.path().join("here/rates.csv").exists());
    assert!(!dir.path().join("elsewhere").exists());
}
