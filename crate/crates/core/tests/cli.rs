use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tepower(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_tepower")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, "K = 2\nC = 3\nQ = 4\neps = 0.05\niterations = 5000\ntrials = 2\nseed = 3\n").unwrap();
    path.to_str().unwrap().to_owned()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn analyze_grid_has_one_row_per_valid_combo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    tepower(&["analyze", "--K", "2,3", "--C", "3,4", "--Q", "6", "--target", "both", "--out", out.to_str().unwrap()]);
    // (2,3), (2,4), (3,4) are valid; (3,3) is skipped.
    let r = rows(&out);
    assert_eq!(r.len(), 6);
    for row in &r {
        let lo: f64 = row[12].parse().unwrap();
        let hi: f64 = row[13].parse().unwrap();
        let exact: f64 = row[14].parse().unwrap();
        assert!(lo <= exact && exact <= hi);
    }
}

#[test]
fn simulate_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let sim_dir = dir.path().join("sim");
    tepower(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    let occ = rows(&sim_dir.join("occupancy.csv"));
    assert_eq!(occ.len(), 2);
    assert!(occ.iter().all(|r| (0.0..=1.0).contains(&r[6].parse::<f64>().unwrap())));
    assert_eq!(rows(&sim_dir.join("passage.csv")).len(), 2);

    let analysis = dir.path().join("a.csv");
    tepower(&["analyze", "--K", "2", "--C", "3", "--Q", "4", "--eps", "0.05", "--target", "both", "--out", analysis.to_str().unwrap()]);
    let joined = dir.path().join("j.csv");
    tepower(&[
        "compare",
        "--sim",
        sim_dir.join("occupancy.csv").to_str().unwrap(),
        "--analysis",
        analysis.to_str().unwrap(),
        "--out",
        joined.to_str().unwrap(),
    ]);
    let j = rows(&joined);
    assert_eq!(j.len(), 2);
    assert_eq!(&j[0][7], j[0].iter().next_back().unwrap());
}

#[test]
fn same_seed_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = tepower(&["trace", "--config", &cfg, "--iters", "50"]).stdout;
    let b = tepower(&["trace", "--config", &cfg, "--iters", "50"]).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("iteration,player,mood,channel,power_index,utility,benchmark_utility"));
    assert_eq!(text.lines().count(), 1 + 50 * 2);
}

#[test]
fn instance_gains_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ray.toml");
    fs::write(&cfg, "K = 2\nC = 2\nQ = 3\nchannel = \"rayleigh\"\nseed = 9\n").unwrap();
    let gains = dir.path().join("g.csv");
    tepower(&["instance", "--config", cfg.to_str().unwrap(), "--gains", gains.to_str().unwrap()]);
    assert_eq!(rows(&gains).len(), 2 * 2 * 2);
    let direct = tepower(&["equilibria", "--config", cfg.to_str().unwrap()]).stdout;
    let loaded =
        tepower(&["equilibria", "--config", cfg.to_str().unwrap(), "--load-gains", gains.to_str().unwrap()]).stdout;
    let (a, b): (serde_json::Value, serde_json::Value) =
        (serde_json::from_slice(&direct).unwrap(), serde_json::from_slice(&loaded).unwrap());
    assert_eq!(a["nash"], b["nash"]);
    assert_eq!(a["max_satisfiable"], b["max_satisfiable"]);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_tepower"))
        .args(["analyze", "--K", "3", "--C", "4", "--Q", "6", "--eps", "1.5"])
        .output()
        .unwrap();
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success() || err.contains("skipping"), "{err}");
}
