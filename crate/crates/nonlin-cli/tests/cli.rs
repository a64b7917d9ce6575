//! End-to-end checks of the command-line interface: exit codes, output
//! files and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonlin"))
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let dir = std::env::temp_dir().join(format!(
            "nonlin-cli-test-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }

    fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.file(name);
        std::fs::write(&path, content).unwrap();
        path
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[test]
fn basin_writes_grid_report_and_image() {
    let dir = TempDir::new("basin");
    let config = dir.write(
        "basin.json",
        r#"{
            "problem": "rf5",
            "method": "enr",
            "policy": {"type": "scalar", "phi": 2.0},
            "resolution": [24, 24],
            "seed": 5
        }"#,
    );
    let out = dir.file("out");
    let status = binary()
        .args(["basin", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(grid.starts_with("ix,iy,x0,x1,status,iterations\n"));
    assert_eq!(grid.lines().count(), 1 + 24 * 24);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("coverage_percent"));
    let ppm = std::fs::read(out.join("basin.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n24 24\n255\n"));
    assert_eq!(ppm.len(), b"P6\n24 24\n255\n".len() + 3 * 24 * 24);
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let dir = TempDir::new("determinism");
    let config = dir.write(
        "basin.json",
        r#"{
            "problem": "exp",
            "method": "enr",
            "policy": {"type": "scalar", "phi": 0.5},
            "resolution": [16, 16]
        }"#,
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.file(run);
        let status = binary()
            .args(["basin", "--config"])
            .arg(&config)
            .args(["--seed", "9", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            std::fs::read(out.join("grid.csv")).unwrap(),
            std::fs::read(out.join("basin.ppm")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new("config-error");
    // Unknown problem name.
    let config = dir.write("bad.json", r#"{"problem": "nope", "method": "nr"}"#);
    let status = binary()
        .args(["basin", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Malformed JSON.
    let config = dir.write("malformed.json", "{");
    let status = binary()
        .args(["basin", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Missing config file.
    let status = binary()
        .args(["basin", "--config"])
        .arg(dir.file("missing.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn beam_writes_iteration_table() {
    let dir = TempDir::new("beam");
    let out = dir.file("out");
    let status = binary().args(["beam", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(out.join("beam.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "iteration,theta,delta_theta");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,2000,290.54"));
    assert!(lines[4].starts_with("3,2339.92"));
}

#[test]
fn fem_forward_reports_deformed_shape() {
    let dir = TempDir::new("fem-forward");
    let config = dir.write(
        "vw.json",
        r#"{
            "material": {"family": "veronda-westmann", "params": [2.48446e6, 0.1686]},
            "body": 10e6,
            "traction": 5e6,
            "method": "enr",
            "phi": 4.0,
            "seed": 1
        }"#,
    );
    let out = dir.file("out");
    let status = binary()
        .args(["fem-forward", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let shape = std::fs::read_to_string(out.join("shape.csv")).unwrap();
    assert!(shape.starts_with("node,X,x,lambda,P\n"));
    assert_eq!(shape.lines().count(), 1 + 6);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let length_line = summary
        .lines()
        .find(|l| l.starts_with("total_length,"))
        .unwrap();
    let length: f64 = length_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((length - 4.4519).abs() < 0.01, "total length {length}");
}

#[test]
fn mingrid_rateorder_phisweep_and_inverse_write_csv() {
    let dir = TempDir::new("rest");
    let out = dir.file("out");

    let config = dir.write(
        "mingrid.json",
        r#"{
            "model": "gn1",
            "method": "gn",
            "distances": {"log10_min": 0.0, "log10_max": 1.0, "count": 3},
            "snr_db": [null, 30.0],
            "seed": 4
        }"#,
    );
    let status = binary()
        .args(["mingrid", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let grid = std::fs::read_to_string(out.join("mingrid.csv")).unwrap();
    assert!(grid.starts_with("distance,snr_db,mean_steps,converged_runs\n"));
    assert_eq!(grid.lines().count(), 1 + 6);
    // The noiseless rows of the linear model converge in one step.
    for line in grid.lines().skip(1).take(3) {
        assert!(line.ends_with(",1,3"), "noiseless row: {line}");
    }

    let config = dir.write(
        "rateorder.json",
        r#"{"model": "gn2", "theta0": [10, 10, 10, 10, 10], "seed": 40}"#,
    );
    let status = binary()
        .args(["rateorder", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rates = std::fs::read_to_string(out.join("rateorder.csv")).unwrap();
    assert!(rates.starts_with("n,gn_q,gn_mu,cgn_q,cgn_mu\n"));
    assert!(rates.lines().count() > 4);

    let config = dir.write(
        "sweep.json",
        r#"{
            "material": {"family": "mooney-rivlin", "params": [5.289e6, 0.6417]},
            "body": -40e6,
            "traction": -20e6,
            "phi_start": 0.1,
            "phi_end": 0.5,
            "phi_step": 0.1,
            "seed": 22
        }"#,
    );
    let status = binary()
        .args(["phisweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let sweep = std::fs::read_to_string(out.join("phisweep.csv")).unwrap();
    assert!(sweep.starts_with("phi,converged,iterations\n"));
    assert_eq!(sweep.lines().count(), 1 + 5);

    let config = dir.write(
        "inverse.json",
        r#"{
            "family": "veronda-westmann",
            "true_params": [2.48446e6, 0.1686],
            "lambda_range": [2.0, 10.0],
            "seed": 13
        }"#,
    );
    let status = binary()
        .args(["fem-inverse", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["gn_fit.csv", "cgn_fit.csv", "summary.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("gn_status,Converged"));
    assert!(summary.contains("cgn_status,Converged"));
}
