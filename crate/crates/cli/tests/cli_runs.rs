//! End-to-end runs of the `critmin` binary: artifact schemas, determinism,
//! exit codes, and the failure paths of the configuration layer.

use std::path::Path;
use std::process::{Command, Output};

use critmin_core::mesh::Mesh;
use critmin_core::spectral::dirichlet_spectrum;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critmin"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).expect("config written");
    path.to_str().expect("utf-8 path").to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn spectrum_reports_the_radial_and_box_clusters() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = ball\ndomain.resolution = 300\n",
    );
    let out = run(&["spectrum", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = read(&tmp.path().join("spectrum.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,lambda,Lambda_cluster,multiplicity"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    let first: Vec<&str> = rows[0].split(',').collect();
    let lambda1: f64 = first[1].parse().expect("float field");
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(
        ((lambda1 - pi2) / pi2).abs() <= 1.0e-3,
        "first radial eigenvalue {lambda1} vs pi^2"
    );
    assert!(rows.iter().all(|r| r.ends_with(",1")), "radial spectrum is simple");

    let cfg = write_config(
        tmp.path(),
        "domain.kind = box\ndomain.resolution = 12\ndomain.box_lengths = 1,1,1\n",
    );
    let out = run(&["spectrum", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = read(&tmp.path().join("spectrum.csv"));
    let second: Vec<&str> = csv.lines().nth(2).expect("second eigenvalue row").split(',').collect();
    assert_eq!(second[3], "3", "second box cluster has multiplicity 3");
}

#[test]
fn minimize_reruns_are_byte_identical_and_certified() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = ball\n\
         domain.resolution = 100\n\
         problem.lambda = 7.895683520871486\n\
         relax.eps_schedule = 1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8\n\
         relax.fp_tol = 1e-8\n\
         relax.f_tol = 1e-12\n\
         seed = 11\n",
    );
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    for dir in [&dir_a, &dir_b] {
        let out = run(&["minimize", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }

    let json_a = read(&dir_a.join("minimizer.json"));
    let json_b = read(&dir_b.join("minimizer.json"));
    assert_eq!(json_a, json_b, "rerun with the same config and seed must be byte-identical");
    assert_eq!(
        read(&dir_a.join("solution.csv")),
        read(&dir_b.join("solution.csv"))
    );

    assert!(json_a.contains("\"attained\": true"));
    assert!(json_a.contains("\"nodal_domains\": 1"));
    let energy: f64 = json_a
        .lines()
        .find_map(|l| l.trim().strip_prefix("\"energy\": "))
        .and_then(|v| v.trim_end_matches(',').parse().ok())
        .expect("energy field");
    assert!(energy < 12.81, "energy {energy} must undercut the non-attainment level");

    let csv = read(&dir_a.join("solution.csv"));
    assert_eq!(csv.lines().next(), Some("node,r,u,phi,psi"));
    assert_eq!(csv.lines().count(), 101, "header plus one row per node");
}

#[test]
fn unknown_config_keys_fail_before_any_file_is_written() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = ball\ndomain.resolutoin = 100\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["spectrum", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("domain.resolutoin"), "stderr names the bad key: {stderr}");
    assert!(!out_dir.exists(), "no partial artifacts on a config error");
}

#[test]
fn probes_too_close_to_the_boundary_are_rejected_by_name() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = box\n\
         domain.resolution = 16\n\
         domain.box_lengths = 1,1,1\n\
         problem.lambda = 20.0\n\
         mass.probes = node:8,8,8; node:0,8,8\n",
    );
    let out = run(&["mass", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("node:0,8,8") && stderr.contains("too close"),
        "stderr lists the offending probe: {stderr}"
    );
}

#[test]
fn sweep_runs_remaining_points_when_one_lambda_sits_on_the_spectrum() {
    let mesh = Mesh::radial_ball(80).expect("mesh");
    let table = dirichlet_spectrum(&mesh, 1).expect("spectrum");
    let lambda1 = table.eigenvalues[0];

    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "domain.kind = ball\n\
             domain.resolution = 80\n\
             problem.lambda_grid = {:.12}, {:.12}, {:.12}\n\
             relax.eps_schedule = 1e-1,1e-2,1e-3,1e-4\n",
            0.4 * lambda1,
            lambda1,
            0.7 * lambda1
        ),
    );
    let out = run(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        tmp.path().to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "on-spectrum points are reported, not fatal");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sweep: lambda"), "failed point lands on stderr: {stderr}");

    let csv = read(&tmp.path().join("sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,i,k,mu_star,energy,attained,wall_time")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "two of three grid points produce rows");
    let mu: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(mu[0] > mu[1], "minimum value decreases along the grid");
}

#[test]
fn lambda_star_brackets_the_center_mass_sign_change() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = ball\n\
         domain.resolution = 200\n\
         problem.interval = 0\n\
         mass.probes = center\n\
         mass.bisect_tol = 1e-4\n",
    );
    let out = run(&["lambda-star", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = read(&tmp.path().join("lambda_star.json"));
    let star: f64 = json
        .lines()
        .find_map(|l| l.trim().strip_prefix("\"lambda_star\": "))
        .and_then(|v| v.trim_end_matches(',').parse().ok())
        .expect("lambda_star field");
    let exact = std::f64::consts::PI.powi(2) / 4.0;
    assert!(
        ((star - exact) / exact).abs() <= 1.0e-2,
        "threshold {star} vs pi^2/4 = {exact}"
    );
}

#[test]
fn verify_passes_clean_and_fails_only_under_fault_injection() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = run(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = read(&tmp.path().join("verify.json"));
    assert!(json.contains("\"failures\": 0"), "clean run has no failures: {json}");

    let out = run(&[
        "verify",
        "--out",
        tmp.path().to_str().unwrap(),
        "--inject-fault",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let json = read(&tmp.path().join("verify.json"));
    assert!(json.contains("\"failures\": 1"), "exactly one inverted verdict: {json}");
}

#[test]
fn verify_skips_mass_checks_when_lambda_sits_on_the_spectrum() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(
        tmp.path(),
        "domain.kind = ball\ndomain.resolution = 400\nproblem.lambda = 9.8696\n",
    );
    let out = run(&["verify", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "skips are not failures");
    let json = read(&tmp.path().join("verify.json"));
    assert!(json.contains("\"skips\": 2"), "both mass checks skip: {json}");
    assert!(json.contains("sits on the Dirichlet spectrum"));
}
