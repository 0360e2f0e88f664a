use std::process::{Command, Output};

use cowu_cli::commands::{EnergyRow, QRow, ZetaRow};
use cowu_cli::output::render;
use cowu_cli::spec::Format;

const SMALL: &[&str] = &["--N", "6", "--M", "12", "--q", "0.01", "--range", "5:8", "--L", "2", "--p", "0.3"];

fn cowu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cowu")).args(args).output().expect("binary runs")
}

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(SMALL).copied().collect()
}

fn read_csv<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Vec<T> {
    csv::Reader::from_reader(bytes).deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn zeta_sweep_has_one_row_per_deadline() {
    let out = cowu(&with_small(&["zeta-sweep", "--zeta-max", "50", "--rounds", "200"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<ZetaRow> = read_csv(&out.stdout);
    assert_eq!(rows.len(), 50);
    assert_eq!(rows.first().unwrap().zeta, 1);
    assert_eq!(rows.last().unwrap().zeta, 50);
    assert!(rows.iter().all(|r| r.gamma_simulated.is_some()));

    let out = cowu(&with_small(&["zeta-sweep", "--zeta-max", "20", "--no-sim"]));
    let rows: Vec<ZetaRow> = read_csv(&out.stdout);
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.gamma_simulated.is_none() && r.ci.is_none()));
}

#[test]
fn csv_round_trips_byte_for_byte() {
    let out = cowu(&with_small(&["zeta-sweep", "--zeta-max", "30", "--rounds", "100"]));
    let rows: Vec<ZetaRow> = read_csv(&out.stdout);
    assert_eq!(render(&rows, Format::Csv).unwrap(), out.stdout);

    let out = cowu(&with_small(&["q-sweep", "--zeta-max", "40", "--q-values", "0.01,0.05", "--q-hat-values", "0.02"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<QRow> = read_csv(&out.stdout);
    assert_eq!(rows.len(), 4);
    assert_eq!(render(&rows, Format::Csv).unwrap(), out.stdout);
}

#[test]
fn json_output_parses() {
    let out = cowu(&with_small(&["energy", "--rounds", "50", "--format", "json"]));
    assert!(out.status.success());
    let rows: Vec<EnergyRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].scheme, "round-robin");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let args = with_small(&["zeta-sweep", "--zeta-max", "40", "--rounds", "300", "--seed", seed]);
        let mut args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        args.extend(["--out".into(), path.display().to_string()]);
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        assert!(cowu(&argv).status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "9");
    let b = run("b.csv", "9");
    let c = run("c.csv", "10");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn trace_file_has_one_record_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let trace_arg = trace.display().to_string();
    let out = cowu(&with_small(&["energy", "--rounds", "75", "--trace", &trace_arg]));
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().count(), 76);
    assert!(text.starts_with("round,w,w_s,exact_match,energy_j,completion_slot"));
}

#[test]
fn full_range_costs_at_least_one_frame_per_node() {
    // Every node wakes, so each spends at least one frame transmitting.
    let out = cowu(&["energy", "--N", "10", "--M", "5", "--range", "1:5", "--L", "4", "--p", "0.2", "--rounds", "300"]);
    assert!(out.status.success());
    let rows: Vec<EnergyRow> = read_csv(&out.stdout);
    let floor_mj = 10.0 * 4.0 * 320e-6 * 0.055 * 1e3;
    assert!((rows[0].mean_energy_mj - floor_mj).abs() < 1e-9);
    assert!(rows[1].mean_energy_mj >= floor_mj);
}

#[test]
fn exit_codes() {
    let bad_q = cowu(&["zeta-sweep", "--q", "0.9", "--no-sim"]);
    assert_eq!(bad_q.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_q.stderr).contains("`q`"));

    assert_eq!(cowu(&["energy", "--p", "0"]).status.code(), Some(2));
    assert_eq!(cowu(&["energy", "--range", "9:3"]).status.code(), Some(2));
    assert_eq!(cowu(&["energy", "--config", "/nonexistent/exp.toml"]).status.code(), Some(3));
    assert_eq!(cowu(&["energy", "--rounds", "5", "--out", "/nonexistent/dir/out.csv"]).status.code(), Some(3));
    assert_eq!(cowu(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "rounds = 40\nseed = 3\nformat = \"json\"\n[scenario]\nN = 5\nM = 8\nq = 0.02\nrange = [3, 5]\nL = 2\np = 0.25\nzeta_max = 15\n",
    )
    .unwrap();
    let out = cowu(&["zeta-sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<ZetaRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 15);
}

#[test]
fn validate_passes() {
    let out = cowu(&["validate"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 20);
    assert!(!text.contains("FAIL"));
}
