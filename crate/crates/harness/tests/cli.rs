use std::fs;
use std::path::Path;
use std::process::Command;

use cutdg_harness::experiments::{run_ablation, run_convergence, run_perturbation};
use cutdg_harness::{run_to_file, Experiment, ExperimentConfig};

fn cutdg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cutdg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small() -> ExperimentConfig {
    ExperimentConfig {
        levels: vec![0],
        delta_samples: 2,
        cond: false,
        ..Default::default()
    }
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["convergence", "--degree", "4", "--out", out],
        vec!["convergence", "--levels", "3,1", "--out", out],
        vec!["perturbation", "--delta-samples", "0", "--out", out],
        vec!["solve", "--geometry", "cube", "--out", out],
        vec!["solve", "--solver", "gmres", "--out", out],
        vec!["solve", "--config", "/nonexistent/cutdg.cfg", "--out", out],
        vec!["frobnicate"],
    ] {
        let o = cutdg(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "geometry = torus\nlevels = 0\ndegree = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = cutdg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--degree",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("solve.csv")).unwrap();
    assert!(csv.contains("# geometry: torus\n"));
    assert!(csv.contains("# degree: 1\n"));
    assert_eq!(data_lines(&csv).len(), 2);
}

fn run_cli(dir: &Path, args: &[&str]) -> String {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", dir.to_str().unwrap()]);
    let o = cutdg(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(dir.join(format!("{}.csv", args[0]))).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["perturbation", "--levels", "0", "--delta-samples", "2", "--seed", "7"];
    assert_eq!(run_cli(a.path(), &args), run_cli(b.path(), &args));
}

#[test]
fn single_level_has_empty_eoc() {
    let t = run_convergence(&small()).unwrap();
    assert_eq!(t.rows.len(), 1);
    let row = &t.rows[0];
    assert_eq!(row[t.column("eoc_l2").unwrap()], "");
    assert_eq!(row[t.column("eoc_sd").unwrap()], "");
    assert_eq!(
        t.header,
        ["level", "h", "ndofs", "l2_error", "sd_error", "eoc_l2", "eoc_sd", "converged"]
    );
}

#[test]
fn repeated_mesh_level_has_empty_eoc() {
    let cfg = ExperimentConfig {
        levels: vec![0, 1],
        ..small()
    };
    let t = run_convergence(&cfg).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0][1..5], t.rows[1][1..5]);
    assert_eq!(t.rows[1][5], "");
}

#[test]
fn single_delta_sample_is_unshifted() {
    let cfg = ExperimentConfig {
        delta_samples: 1,
        ..small()
    };
    let t = run_perturbation(&cfg).unwrap();
    assert_eq!(t.header, ["delta", "sd_error", "iters", "converged"]);
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.values("delta"), vec![Some(0.0)]);
    assert_eq!(t.rows[0][3], "true");
}

#[test]
fn ablation_variants_and_default_match_perturbation() {
    let cfg = small();
    let ablation = run_ablation(&cfg).unwrap();
    let perturbation = run_perturbation(&cfg).unwrap();
    let v = ablation.column("variant").unwrap();
    let mut names: Vec<&str> = ablation.rows.iter().map(|r| r[v].as_str()).collect();
    names.dedup();
    assert_eq!(names, ["default", "gamman=0", "gamma0=0", "gamma1=0"]);
    let default: Vec<Vec<String>> = ablation
        .rows
        .iter()
        .filter(|r| r[v] == "default")
        .map(|r| r[1..].to_vec())
        .collect();
    assert_eq!(default, perturbation.rows);
}

#[test]
fn files_record_solver_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output: dir.path().join("nested"),
        tolerance: 1e-9,
        ..small()
    };
    let path = run_to_file(Experiment::Perturbation, &cfg).unwrap();
    let csv = fs::read_to_string(path).unwrap();
    assert!(csv.contains("# solver: bicgstab\n"));
    assert!(csv.contains("# preconditioner: jacobi\n"));
    assert!(csv.contains("# tolerance: 1.000000000000000e-9\n"));
    for line in data_lines(&csv).iter().skip(1) {
        let sd = line.split(',').nth(1).unwrap();
        assert!(sd.contains('e') && sd.contains('.'), "{sd}");
    }
}

#[test]
fn condition_rows_are_positive() {
    let cfg = ExperimentConfig {
        levels: vec![0],
        ..Default::default()
    };
    let t = Experiment::Condition.run(&cfg).unwrap();
    assert_eq!(t.header, ["h", "ndofs", "sigma_max", "sigma_min", "cond"]);
    let cond = t.values("cond")[0].unwrap();
    let smax = t.values("sigma_max")[0].unwrap();
    let smin = t.values("sigma_min")[0].unwrap();
    assert!(cond > 1.0 && (cond - smax / smin).abs() < 1e-9 * cond);
}
