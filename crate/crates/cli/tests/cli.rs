//! Behavioral tests of the `dcrb` binary: output layout, determinism
//! across thread counts, and error handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dcrb_core::circuit::Circuit;

fn dcrb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcrb"))
        .args(args)
        .env_remove("DCRB_SEED")
        .output()
        .expect("binary should launch")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_writes_curves_and_fits_with_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let res = dcrb(&[
        "run",
        "--block", "z_c0,delay",
        "--dd", "none",
        "--lengths", "0,2,4",
        "--k", "1",
        "--seeds", "2",
        "--shots", "20",
        "--seed", "3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_ok(&res);

    for name in ["curves_z_c0_none.csv", "curves_delay_none.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# dcrb"));
        let config = lines.next().unwrap();
        assert!(config.starts_with("# config: {"));
        assert!(config.contains("\"master_seed\":3"));
        assert_eq!(lines.next().unwrap(), "n_blocks,qubit,mean,stderr");
        let data: Vec<&str> = lines.collect();
        assert_eq!(data.len(), 3, "one row per length in {name}");
        for row in data {
            assert_eq!(row.split(',').count(), 4);
        }
    }

    let fits = fs::read_to_string(out.join("fits.jsonl")).unwrap();
    let lines: Vec<&str> = fits.lines().collect();
    assert_eq!(lines.len(), 3, "config record plus one fit per block");
    let head: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(head["record"], "config");
    for line in &lines[1..] {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["record"], "fit");
        let obj = v.as_object().unwrap();
        for key in [
            "block", "dd", "data_qubit", "measured_qubit", "A", "B", "alpha",
            "alpha_err", "epsilon", "epsilon_err", "converged", "alpha_ref",
            "predicted",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
    }
}

#[test]
fn thread_count_never_changes_the_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path, jobs: &str| {
        vec![
            "run".to_string(),
            "--block".into(), "h_cnot".into(),
            "--lengths".into(), "0,2,4,6".into(),
            "--k".into(), "2".into(),
            "--seeds".into(), "3".into(),
            "--shots".into(), "25".into(),
            "--seed".into(), "11".into(),
            "--jobs".into(), jobs.into(),
            "--out".into(), out.to_str().unwrap().into(),
        ]
    };
    let serial = dir.path().join("serial");
    let threaded = dir.path().join("threaded");
    let a: Vec<String> = args(&serial, "1");
    let b: Vec<String> = args(&threaded, "4");
    assert_ok(&dcrb(&a.iter().map(|s| s.as_str()).collect::<Vec<_>>()));
    assert_ok(&dcrb(&b.iter().map(|s| s.as_str()).collect::<Vec<_>>()));

    for name in ["curves_h_cnot_none.csv", "fits.jsonl"] {
        let x = fs::read(serial.join(name)).unwrap();
        let y = fs::read(threaded.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between --jobs 1 and --jobs 4");
    }
}

#[test]
fn seed_env_variable_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let res = Command::new(env!("CARGO_BIN_EXE_dcrb"))
        .args([
            "run",
            "--block", "delay",
            "--lengths", "0,2",
            "--k", "1",
            "--seeds", "1",
            "--shots", "5",
            "--fix-b", "0.5",
            "--out", out.to_str().unwrap(),
        ])
        .env("DCRB_SEED", "42")
        .output()
        .unwrap();
    assert_ok(&res);
    let fits = fs::read_to_string(out.join("fits.jsonl")).unwrap();
    assert!(fits.lines().next().unwrap().contains("\"master_seed\":42"));
}

#[test]
fn invalid_config_leaves_no_files_behind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    // 3 is not divisible by k = 2.
    let res = dcrb(&[
        "run",
        "--lengths", "0,3",
        "--k", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("divisible"));
    assert!(!out.exists(), "failed run must not create output files");
}

#[test]
fn unknown_block_name_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = dcrb(&[
        "run",
        "--block", "cz_teleport",
        "--out", dir.path().join("res").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("cz_teleport"));
}

#[test]
fn zero_jobs_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = dcrb(&[
        "run",
        "--jobs", "0",
        "--out", dir.path().join("res").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("jobs"));
}

#[test]
fn dumped_circuits_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let res = dcrb(&[
        "run",
        "--block", "z_c1",
        "--dd", "ffdd",
        "--lengths", "0,2,4",
        "--k", "2",
        "--seeds", "1",
        "--shots", "5",
        "--fix-b", "0.5",
        "--out", out.to_str().unwrap(),
        "--dump-circuits",
    ]);
    assert_ok(&res);
    for n in [0, 1, 2] {
        let path = out.join(format!("circuits/z_c1_ffdd_n{n}_s0.txt"));
        let text = fs::read_to_string(&path).unwrap();
        let circuit = Circuit::from_text(&text).unwrap();
        assert_eq!(circuit.n_qubits(), 2);
    }
}

#[test]
fn sweep_demands_grid_values() {
    let res = dcrb(&["sweep", "--axis", "eps_r"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("--values"));
}

#[test]
fn sweep_tabulates_each_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let res = dcrb(&[
        "sweep",
        "--axis", "eps_r",
        "--values", "0.01,0.05",
        "--block", "z_c0",
        "--lengths", "0,2,4",
        "--k", "1",
        "--seeds", "2",
        "--shots", "20",
        "--out", out.to_str().unwrap(),
    ]);
    assert_ok(&res);
    let text = fs::read_to_string(out.join("sweep_eps_r.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip_while(|l| l.starts_with('#')).collect();
    assert_eq!(rows[0], "value,block,dd,epsilon,epsilon_err,predicted");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0.01,z_c0,none,"));
    assert!(rows[2].starts_with("0.05,z_c0,none,"));
}

#[test]
fn sweep_rejects_unknown_axis() {
    let dir = tempfile::tempdir().unwrap();
    let res = dcrb(&[
        "sweep",
        "--axis", "t1",
        "--values", "1e-4",
        "--out", dir.path().join("res").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("axis"));
}

#[test]
fn oracle_prints_closed_form_prediction() {
    let res = dcrb(&[
        "oracle",
        "--block", "h_cnot",
        "--eps-r", "0.03",
        "--t1", "inf",
        "--t2", "inf",
        "--depth", "2",
    ]);
    assert_ok(&res);
    let stdout = String::from_utf8_lossy(&res.stdout);
    let predicted: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("predicted block error: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((predicted - 0.02).abs() < 1e-12);
    let survival_1: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("1 "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((survival_1 - 0.98).abs() < 1e-12);
}

#[test]
fn noise_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.toml");
    fs::write(&noise, "p01 = 0.2\np10 = 0.2\ndepol_1q = 0.0\n").unwrap();
    let out = dir.path().join("res");
    let res = dcrb(&[
        "run",
        "--block", "delay",
        "--lengths", "0,2",
        "--k", "1",
        "--seeds", "1",
        "--shots", "5",
        "--fix-b", "0.5",
        "--noise", noise.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert_ok(&res);
    let fits = fs::read_to_string(out.join("fits.jsonl")).unwrap();
    assert!(fits.lines().next().unwrap().contains("\"p01\":0.2"));
}
