use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn l1tik(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1tik"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SOLVE_CONFIG: &str = r#"{
  "problem": { "n": 64, "sigma": 1e-3 },
  "solver": { "method": "l1_admm", "alpha": 1e-4 },
  "seed": 7
}"#;

fn body(csv: &str) -> &str {
    let start = csv.find("x,u\n").expect("header row");
    &csv[start..]
}

#[test]
fn solve_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SOLVE_CONFIG);
    let out = dir.path().join("u.csv");
    let res = l1tik(&["solve", "--config", &cfg, "--output", path_str(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(&out).unwrap();
    for key in ["objective=", "primal_residual=", "iterations="] {
        assert!(
            csv.lines().any(|l| l.starts_with('#') && l.contains(key)),
            "missing {key}"
        );
    }
    let rows: Vec<&str> = body(&csv).lines().skip(1).collect();
    assert_eq!(rows.len(), 64);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
        assert!(cols[0] > 0.0 && cols[0] < 1.0 && cols[1].is_finite());
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("u.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["config"]["problem"]["n"], 64);
    assert_eq!(manifest["config"]["solver"]["rho"], 1.0);
}

#[test]
fn solve_is_deterministic_and_reproducible_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SOLVE_CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert_eq!(
        l1tik(&["solve", "--config", &cfg, "--output", path_str(&a)])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        l1tik(&["solve", "--config", &cfg, "--output", path_str(&b)])
            .status
            .code(),
        Some(0)
    );
    let manifest = dir.path().join("a.csv.manifest.json");
    assert_eq!(
        l1tik(&["solve", "--config", path_str(&manifest), "--output", path_str(&c)])
            .status
            .code(),
        Some(0)
    );
    let a = fs::read_to_string(a).unwrap();
    assert_eq!(body(&a), body(&fs::read_to_string(b).unwrap()));
    assert_eq!(a, fs::read_to_string(c).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SOLVE_CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    l1tik(&["solve", "--config", &cfg, "--output", path_str(&a)]);
    l1tik(&["solve", "--config", &cfg, "--seed", "8", "--output", path_str(&b)]);
    let b = fs::read_to_string(b).unwrap();
    assert!(b.contains("# seed=8"));
    assert_ne!(body(&fs::read_to_string(a).unwrap()), body(&b));
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_alpha = write_config(dir.path(), "a.json", r#"{"solver": {"alpha": 0.0}}"#);
    let res = l1tik(&["solve", "--config", &bad_alpha]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("alpha"));

    let unknown = write_config(dir.path(), "u.json", r#"{"problem": {"n": 8, "sigmma": 1.0}}"#);
    let res = l1tik(&["solve", "--config", &unknown]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sigmma"));

    let malformed = write_config(dir.path(), "m.json", "{ not json");
    assert_eq!(l1tik(&["solve", "--config", &malformed]).status.code(), Some(2));
    assert_eq!(
        l1tik(&["solve", "--config", "/nonexistent/c.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        l1tik(&["rates", "--jobs", "0", "--output", path_str(dir.path())])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(l1tik(&["rates"]).status.code(), Some(2));
}

#[test]
fn rates_writes_plot_data_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{
          "problem": { "n": 33 },
          "solver": { "max_iter": 300 },
          "experiment": {
            "methods": ["l1_adlpmm", "l2"],
            "sigmas": [1e-2, 1e-3, 1e-4],
            "alpha_grid": { "lo": 1e-8, "hi": 1e-1, "count": 8 },
            "runs": 2
          },
          "seed": 3
        }"#,
    );
    let out = dir.path().join("out");
    let res = l1tik(&["rates", "--config", &cfg, "--output", path_str(&out), "--jobs", "2"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    for file in ["adlpmm.dat", "L2.dat"] {
        let dat = fs::read_to_string(out.join(file)).unwrap();
        let rows: Vec<&str> = dat.lines().collect();
        assert_eq!(rows.len(), 3);
        let mut last = 0.0;
        for row in rows {
            let cols: Vec<&str> = row.split(' ').collect();
            assert_eq!(cols.len(), 2);
            for c in &cols {
                // %.6e: one digit, six decimals, signed two-digit exponent
                assert_eq!(c.len(), 12, "{c}");
                assert!(c.as_bytes()[8] == b'e' && matches!(c.as_bytes()[9], b'+' | b'-'));
            }
            let sigma: f64 = cols[0].parse().unwrap();
            assert!(sigma > last);
            last = sigma;
        }
    }
    assert!(!out.join("admm.dat").exists());

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("method,sigma,alpha_opt,rmse,slope"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(["l1_adlpmm", "l2"].contains(&r[0]));
        assert!(r[4].parse::<f64>().unwrap().is_finite());
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["command"], "rates");

    let again = dir.path().join("again");
    let res = l1tik(&[
        "rates",
        "--config",
        path_str(&out.join("manifest.json")),
        "--output",
        path_str(&again),
    ]);
    assert_eq!(res.status.code(), Some(0));
    for file in ["adlpmm.dat", "L2.dat", "summary.csv"] {
        assert_eq!(
            fs::read(out.join(file)).unwrap(),
            fs::read(again.join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn moments_checks_pass_and_missing_flags_fail() {
    let res = l1tik(&[
        "moments", "--sigma", "1", "--lambda", "1", "--r", "1", "--n", "100", "--trials", "10000", "--seed", "1",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.matches("pass").count(), 2, "{stdout}");
    assert!(!stdout.contains("FAIL"));

    let res = l1tik(&[
        "moments", "--sigma", "1", "--lambda", "0", "--r", "3", "--trials", "100",
    ]);
    let stdout = String::from_utf8(res.stdout).unwrap();
    let bounds: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("E["))
        .map(|l| l.split_whitespace().nth(3).unwrap())
        .collect();
    assert_eq!(bounds, ["0.000000e+00", "1.000000e+00"]);

    assert_eq!(l1tik(&["moments", "--sigma", "1", "--r", "1"]).status.code(), Some(2));
    assert_eq!(
        l1tik(&["moments", "--sigma", "-1", "--lambda", "1", "--r", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn exponents_table() {
    let res = l1tik(&[
        "exponents",
        "--a",
        "2",
        "--s",
        "1.5",
        "--d",
        "1",
        "--k",
        "2",
        "--p",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("norm_rate     0.375000"));
    assert!(stdout.contains("consistent    true"));

    let res = l1tik(&["exponents", "--a", "2", "--s", "1", "--d", "1", "--k", "2", "--p", "2"]);
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("theta         1.333333"));
    assert!(stdout.contains("norm_rate     0.285714"));

    let res = l1tik(&["exponents", "--a", "1", "--s", "2", "--d", "1", "--k", "2", "--p", "2"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(l1tik(&["--help"]).status.code(), Some(0));
    assert_eq!(l1tik(&["--version"]).status.code(), Some(0));
    assert_eq!(l1tik(&["frobnicate"]).status.code(), Some(2));
}
