use std::path::Path;
use std::process::{Command, Output};

fn nsmpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsmpi")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(csv: &[u8]) -> Vec<String> {
    let text = String::from_utf8(csv.to_vec()).unwrap();
    text.split("\r\n").skip(1).filter(|l| !l.is_empty()).map(str::to_owned).collect()
}

#[test]
fn tight_equality_exits_zero() {
    for (ell, m) in [("1", "0"), ("2", "3")] {
        let out = nsmpi(&["tight", "--ell", ell, "--m", m]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = data_rows(&out.stdout);
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("1")));
    }
}

#[test]
fn tight_without_errors_has_zero_loss() {
    let out = nsmpi(&["tight", "--ell", "2", "--m", "3", "--epsilon", "0"]);
    assert!(out.status.success());
    for row in data_rows(&out.stdout) {
        let loss: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(loss, 0.0);
    }
}

#[test]
fn tight_rejects_short_chain() {
    let out = nsmpi(&["tight", "--ell", "2", "--m", "3", "--states", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_tight_chain_with_policy_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("tight.json");
    assert!(nsmpi(&["tight", "--ell", "2", "--m", "1", "--write-mdp", path(&mdp)]).status.success());
    let out = nsmpi(&["solve", path(&mdp), "--method", "pi"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 1);
    let loss: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn solve_garnet_with_nsmpi() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("garnet.json");
    let trace = dir.path().join("trace.json");
    let csv = dir.path().join("solve.csv");
    let out = nsmpi(&["gen-garnet", "--states", "15", "--actions", "3", "--seed", "9", "--out", path(&mdp)]);
    assert!(out.status.success());
    let out = nsmpi(&[
        "solve", path(&mdp), "--method", "nsmpi", "--m", "2", "--ell", "2", "--iterations", "300",
        "--out", path(&csv), "--trace", path(&trace),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&std::fs::read(&csv).unwrap());
    assert_eq!(rows.len(), 300);
    let value_error: f64 = rows.last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(value_error <= 1e-9, "{value_error}");
    let parsed: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    assert_eq!(parsed["config"]["ell"], 2);
    assert_eq!(parsed["records"].as_array().unwrap().len(), 300);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"num_states": 1, "num_actions": 1, "discount": 0.9, "rewards": [[0]], "transitions": [[[[0, 0.5]]]]}"#).unwrap();
    assert_eq!(nsmpi(&["solve", path(&bad)]).status.code(), Some(2));
    assert_eq!(nsmpi(&["solve", path(&dir.path().join("missing.json"))]).status.code(), Some(2));

    let mdp = dir.path().join("garnet.json");
    assert!(nsmpi(&["gen-garnet", "--gamma", "0.99", "--out", path(&mdp)]).status.success());
    let out = nsmpi(&["solve", path(&mdp), "--method", "vi", "--iterations", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not converged"));
}

#[test]
fn sweep_row_count_and_determinism() {
    let args = [
        "sweep", "--source", "garnet", "--states", "10", "--actions", "3", "--ells", "1,2", "--ms", "1,2",
        "--runs", "2", "--iterations", "5", "--epsilon", "0.5",
    ];
    let first = nsmpi(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(data_rows(&first.stdout).len(), 2 * 2 * 2 * 5);
    assert_eq!(first.stdout, nsmpi(&args).stdout);
    let header = String::from_utf8_lossy(&first.stdout);
    assert!(header.starts_with("ell,m,run,k,loss_sup,loss_mean,bound,seconds\r\n"));
}

#[test]
fn sweep_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    let out_csv = dir.path().join("out.csv");
    std::fs::write(
        &config,
        format!(
            "source = \"tight\"\nells = [1, 2]\nms = [0, \"inf\"]\nepsilon = 0.1\ngamma = 0.9\niterations = 4\nruns = 3\nout = {:?}\n",
            path(&out_csv)
        ),
    )
    .unwrap();
    let out = nsmpi(&["sweep", "--config", path(&config), "--runs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&std::fs::read(&out_csv).unwrap());
    assert_eq!(rows.len(), 2 * 2 * 4);
    assert!(rows.iter().any(|r| r.starts_with("2,inf,0,")));
    for row in rows {
        let f: Vec<f64> = row.split(',').skip(4).take(3).map(|x| x.parse().unwrap()).collect();
        assert!((f[0] - f[2]).abs() <= 1e-9, "{row}");
    }

    let json = dir.path().join("sweep.json");
    std::fs::write(&json, r#"{"source": "garnet", "ells": [1], "ms": ["inf"], "iterations": 2, "runs": 1}"#).unwrap();
    let out = nsmpi(&["sweep", "--config", path(&json)]);
    assert!(out.status.success());
    assert_eq!(data_rows(&out.stdout).len(), 2);
}

#[test]
fn sweep_fixed_budget_and_bad_config() {
    let out = nsmpi(&[
        "sweep", "--source", "garnet", "--ells", "1,2,3,6", "--budget", "6", "--runs", "1", "--iterations", "3",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 4 * 3);
    assert!(rows[0].starts_with("1,6,") && rows[11].starts_with("6,1,"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "ells = []\n").unwrap();
    assert_eq!(nsmpi(&["sweep", "--config", path(&config)]).status.code(), Some(2));
    assert_eq!(nsmpi(&["sweep", "--ms", "lots"]).status.code(), Some(2));
}

#[test]
fn sweep_timing_column() {
    let out = nsmpi(&["sweep", "--source", "garnet", "--ells", "1", "--ms", "1", "--runs", "1", "--iterations", "2", "--timing"]);
    for row in data_rows(&out.stdout) {
        assert!(row.rsplit(',').next().unwrap().parse::<f64>().is_ok(), "{row}");
    }
}

#[test]
fn bench_dynloc_small() {
    let out = nsmpi(&["bench-dynloc", "--n", "4", "--iterations", "10", "--runs", "2", "--ells", "1,2", "--ms", "1,inf", "--window", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&out.stdout).len(), 2 * 2 * 2 * 10);
    let summary = String::from_utf8_lossy(&out.stderr);
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn gen_garnet_is_reproducible() {
    let a = nsmpi(&["gen-garnet", "--seed", "3"]);
    let b = nsmpi(&["gen-garnet", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let parsed: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(parsed["num_states"], 20);
    assert_eq!(nsmpi(&["gen-garnet", "--branching", "50"]).status.code(), Some(2));
}
