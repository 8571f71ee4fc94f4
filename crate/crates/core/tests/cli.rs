use std::path::Path;
use std::process::{Command, Output};

use eqpt::io;
use eqpt::linalg::random_unitary;
use eqpt::metrics::nrmse;

fn eqpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqpt"))
        .args(args)
        .env_remove("EQPT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn reported_nrmse(o: &Output) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("nrmse"))
        .and_then(|v| v.trim().parse().ok())
        .expect("nrmse line")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_writes_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u_hat.txt");
    let o = eqpt(&[
        "estimate",
        "--method",
        "eqpt3",
        "--qubits",
        "4",
        "--width",
        "1e-3",
        "--seed",
        "5",
        "--output",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = reported_nrmse(&o);
    assert!(e > 0.0 && e < 0.1);

    let u_hat = io::read_matrix(&out).unwrap();
    assert_eq!(u_hat.nrows(), 16);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(io::manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["base_seed"], 5);
    assert_eq!(manifest["config"]["method"], "eqpt3");
    let recorded = manifest["results"]["trial"]["nrmse"].as_f64().unwrap();
    assert!((recorded - e).abs() <= 1e-6 * e);
}

#[test]
fn estimate_from_matrix_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("u.txt");
    let out = dir.path().join("u_hat.txt");
    let u = random_unitary(4, 99);
    io::write_matrix(&input, u.as_ref()).unwrap();
    let o = eqpt(&[
        "estimate",
        "--method",
        "eqpt2",
        "--matrix",
        path_str(&input),
        "--output",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(reported_nrmse(&o) < 1e-10);
    let u_hat = io::read_matrix(&out).unwrap();
    assert!(nrmse(u.as_ref(), u_hat.as_ref()).unwrap() < 1e-10);
}

#[test]
fn seed_comes_from_environment() {
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_eqpt"))
            .args([
                "estimate", "--method", "eqpt1", "--qubits", "2", "--width", "1e-2",
            ])
            .env("EQPT_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        reported_nrmse(&o)
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        eqpt(&["estimate", "--method", "eqpt7", "--qubits", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        eqpt(&["estimate", "--method", "eqpt2", "--qubits", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        eqpt(&["estimate", "--method", "eqpt1", "--qubits", "2", "--width", "-1"])
            .status
            .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2\n1 1 1.0 0.0\n1 2 zero 0.0\n").unwrap();
    let o = eqpt(&["estimate", "--method", "eqpt1", "--matrix", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains(":3:"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let missing = dir.path().join("missing.txt");
    assert_eq!(
        eqpt(&[
            "estimate",
            "--method",
            "eqpt1",
            "--matrix",
            path_str(&missing)
        ])
        .status
        .code(),
        Some(5)
    );

    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, "trials = 2\nsurprise = 1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let o = eqpt(&[
        "bench",
        "--config",
        path_str(&config),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_csv_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "methods = [\"eqpt1\", \"eqpt2\", \"eqpt5\"]\nqubits = [2, 3, 4]\nwidths = [0.0, 1e-3]\ntrials = 3\nbase_seed = 17\n",
    )
    .unwrap();
    let run = |name: &str, jobs: &str| {
        let csv = dir.path().join(name);
        let o = eqpt(&[
            "--jobs",
            jobs,
            "bench",
            "--config",
            path_str(&config),
            "--no-timing",
            "--csv",
            path_str(&csv),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(&csv).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(io::CSV_HEADER));
    // eqpt2 at 3 qubits and eqpt5 at 2 qubits are incompatible and skipped
    assert_eq!(text.lines().count(), 1 + 2 * (3 + 2 + 2));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("c.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["parallelism"], 4);
    assert_eq!(manifest["results"]["skipped"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_flags_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let svg = dir.path().join("t.svg");
    let o = eqpt(&[
        "bench",
        "--methods",
        "eqpt1,eqpt3",
        "--qubits",
        "2,4",
        "--widths",
        "1e-3,1e-2",
        "--trials",
        "2",
        "--seed",
        "8",
        "--csv",
        path_str(&csv),
        "--svg",
        path_str(&svg),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(
        text.lines().skip(1).all(|l| !l.ends_with(',')),
        "timings recorded by default"
    );
    let chart = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(chart.matches("<polyline").count(), 4);
}

#[test]
fn demo_runs_and_checks_noiseless_recovery() {
    let o = eqpt(&["demo", "--trials", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("noiseless check passed"), "{text}");
    assert!(text.contains("eqpt5"));
    assert_eq!(eqpt(&["demo", "--trials", "21"]).status.code(), Some(2));
}
