//! End-to-end runs of the `shoal` binary: real processes, real pools,
//! real worker children.

use std::path::Path;
use std::process::{Command, Output};

fn shoal() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shoal"));
    for var in [
        "SHOAL_POOL_DIR",
        "SHOAL_QUBITS",
        "SHOAL_CHUNK_BYTES",
        "SHOAL_WORKERS",
        "SHOAL_CACHE_BYTES",
        "SHOAL_BACKEND",
        "SHOAL_CIRCUIT",
        "SHOAL_SEED",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(!out.status.success(), "expected failure, got success");
    out
}

fn init_pool(dir: &Path, qubits: u32, extra: &[&str]) -> String {
    run_ok(shoal()
        .arg("init")
        .args(["--pool-dir", dir.to_str().unwrap()])
        .args(["--qubits", &qubits.to_string()])
        .args(extra))
}

#[test]
fn init_run_verify_round_trip_with_worker_processes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = init_pool(dir.path(), 10, &["--chunk-bytes", "256"]);
    assert!(stdout.contains("initialized"), "init said: {stdout}");
    assert!(stdout.contains("16,384 bytes"), "init said: {stdout}");

    let csv_path = dir.path().join("metrics.csv");
    let stdout = run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--workers", "2"])
        .args(["--csv", csv_path.to_str().unwrap()]));
    assert!(stdout.contains("direct"), "summary said: {stdout}");

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "framework,node,gate_seq,gate_label,compute_ms,read_ms,write_ms,writeback_ms,total_ms,speed_mb_s"
    );
    // Built-in two-gate circuit, two workers: 2 worker rows + 1 round
    // row per gate.
    assert_eq!(lines.count(), 6);
    assert!(csv.contains(",all,0,round,"));
    assert!(csv.contains(",all,1,round,"));

    // A fresh process must see the flushed state and verify it.
    let stdout = run_ok(shoal()
        .arg("verify")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--random-gates", "8"])
        .args(["--seed", "3"]));
    assert!(stdout.contains("PASS"), "verify said: {stdout}");
}

#[test]
fn worker_threads_mode_produces_the_same_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 9, &["--chunk-bytes", "128"]);
    let csv_path = dir.path().join("metrics.csv");
    run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--workers", "4", "--worker-threads", "--sequential"])
        .args(["--csv", csv_path.to_str().unwrap()]));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    // 4 worker rows + 1 round row per gate, 2 gates, 1 header.
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn csv_dash_streams_to_stdout_without_summary() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let stdout = run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--worker-threads", "--csv", "-"]));
    assert!(stdout.starts_with("framework,node,gate_seq,"), "stdout: {stdout}");
    assert_eq!(stdout.lines().count(), 7, "header plus six rows, no table");
}

#[test]
fn repetitions_extend_the_gate_sequence() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let csv_path = dir.path().join("metrics.csv");
    let json_path = dir.path().join("report.json");
    run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--reps", "3", "--worker-threads"])
        .args(["--csv", csv_path.to_str().unwrap()])
        .args(["--json", json_path.to_str().unwrap()]));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    // Three passes of the two-gate built-in circuit in one session.
    for gate_seq in 0..6 {
        assert!(csv.contains(&format!(",all,{gate_seq},round,")), "missing round {gate_seq}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["rounds"].as_array().unwrap().len(), 6);
    assert_eq!(report["framework"], "direct");
}

#[test]
fn verify_catches_injected_corruption_with_first_index() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let out = run_err(shoal()
        .arg("verify")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--random-gates", "0", "--inject-corruption"]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("FAIL") && stdout.contains("first mismatch at amplitude index"),
        "verify said: {stdout}"
    );
}

#[test]
fn one_qubit_pool_with_empty_circuit_verifies_clean() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = init_pool(dir.path(), 1, &[]);
    // Requested default basis clamps into the 2-amplitude space.
    assert!(stdout.contains("state |1>"), "init said: {stdout}");
    let stdout = run_ok(shoal()
        .arg("verify")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--random-gates", "0"]));
    assert!(stdout.contains("PASS"), "verify said: {stdout}");
}

#[test]
fn reinit_needs_force_and_explicit_bad_basis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let out = run_err(shoal()
        .arg("init")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--qubits", "8"]));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("--force"),
        "expected a hint about --force"
    );
    init_pool(dir.path(), 8, &["--chunk-bytes", "64", "--force"]);

    let out = run_err(shoal()
        .arg("init")
        .args(["--pool-dir", dir.path().join("other").to_str().unwrap()])
        .args(["--qubits", "10", "--basis-index", "8192"]));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("below"),
        "expected a range complaint"
    );
}

#[test]
fn missing_circuit_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let out = run_err(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--circuit", dir.path().join("absent.txt").to_str().unwrap()]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn circuit_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64", "--basis-index", "0"]);
    let circuit = dir.path().join("circ.txt");
    std::fs::write(&circuit, "# flip then entangle\nx 0\ncx 0 7\nh 3\n").unwrap();
    let csv_path = dir.path().join("metrics.csv");
    run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--circuit", circuit.to_str().unwrap()])
        .args(["--workers", "2"])
        .args(["--csv", csv_path.to_str().unwrap()]));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.contains("X q0"), "labels: {csv}");
    assert!(csv.contains("CX q0 q7"), "labels: {csv}");
    assert!(csv.contains("H q3"), "labels: {csv}");

    let stdout = run_ok(shoal()
        .arg("verify")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--circuit", circuit.to_str().unwrap()]));
    assert!(stdout.contains("PASS"), "verify said: {stdout}");
}

#[test]
fn emulated_backend_flag_reaches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let csv_path = dir.path().join("metrics.csv");
    run_ok(shoal()
        .arg("run")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--backend", "emulated", "--latency-ms", "0.05"])
        .args(["--worker-threads"])
        .args(["--csv", csv_path.to_str().unwrap()]));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("emulated,")), "csv: {csv}");
}

#[test]
fn bench_prints_grid_speedups_and_reference_line() {
    let dir = tempfile::tempdir().unwrap();
    init_pool(dir.path(), 8, &["--chunk-bytes", "64"]);
    let json_path = dir.path().join("bench.json");
    let stdout = run_ok(shoal()
        .arg("bench")
        .args(["--pool-dir", dir.path().to_str().unwrap()])
        .args(["--reps", "2", "--latency-ms", "0.2"])
        .args(["--json", json_path.to_str().unwrap()]));
    assert!(stdout.contains("direct"), "bench said: {stdout}");
    assert!(stdout.contains("emulated"), "bench said: {stdout}");
    assert!(stdout.contains("direct over emulated at"), "bench said: {stdout}");
    assert!(stdout.contains("cache doubling moves"), "bench said: {stdout}");
    assert!(
        stdout.contains(
            "reference deployment: 207.5 MB/s local pool vs 44.5 MB/s replicated remote store, \
             a 4.66x gap (+366%)"
        ),
        "bench said: {stdout}"
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    assert_eq!(report["reps"], 2);
}

#[test]
fn analyze_reports_the_reference_figures() {
    let stdout = run_ok(shoal().arg("analyze").args(["--workload", "10000", "1000", "86400"]));
    for expected in [
        "17,592,186,044,416 bytes",
        "227.3737 gates/s",
        "1.1500 gates/s",
        "0.5750 gates/s",
        "0.2274 gates/s",
        "14073.7 s",
        "1407.4 s",
        "$81,920",
        "$327,680",
        "$98,304",
        "320,000 to 1",
        "needs 115.7407 gates/s",
    ] {
        assert!(stdout.contains(expected), "missing {expected:?} in:\n{stdout}");
    }
}

#[test]
fn analyze_scales_down_to_the_two_gigabyte_state() {
    let stdout = run_ok(shoal().arg("analyze").args(["--qubits", "27"]));
    assert!(stdout.contains("2,147,483,648 bytes"), "analyze said: {stdout}");
}

#[test]
fn env_variables_stand_in_for_flags() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(shoal()
        .arg("init")
        .env("SHOAL_POOL_DIR", dir.path())
        .env("SHOAL_QUBITS", "8")
        .env("SHOAL_CHUNK_BYTES", "64"));
    let stdout = run_ok(shoal()
        .arg("verify")
        .env("SHOAL_POOL_DIR", dir.path())
        .env("SHOAL_SEED", "11")
        .args(["--random-gates", "4"]));
    assert!(stdout.contains("PASS"), "verify said: {stdout}");
}

#[test]
fn worker_subcommand_stays_out_of_help() {
    let stdout = run_ok(shoal().arg("--help"));
    assert!(
        !stdout.lines().any(|l| l.trim_start().starts_with("worker")),
        "help leaks the internal command:\n{stdout}"
    );
    for public in ["init", "run", "bench", "verify", "analyze"] {
        assert!(
            stdout.lines().any(|l| l.trim_start().starts_with(public)),
            "help misses {public}:\n{stdout}"
        );
    }
}
