use std::path::Path;
use std::process::{Command, Output};

use mmdesign::operator::io::{read_vector, write_real_vector_mm};

fn mmdesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmdesign"))
        .args(args)
        .env_remove("MMDESIGN_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Sidecar for `alpha diag(d)` with a hand-written diagonal.
fn write_diag_majorizer(dir: &Path, stem: &str, d: &[f64], alpha: f64) -> String {
    write_real_vector_mm(&dir.join(format!("{stem}_d.mtx")), d).unwrap();
    let toml = format!(
        "k = \"identity\"\nd = \"{stem}_d.mtx\"\nalpha = {alpha:?}\ncertification = \"analytic\"\ncertified = true\ndim = {}\n",
        d.len()
    );
    let path = dir.join(format!("{stem}.toml"));
    std::fs::write(&path, toml).unwrap();
    path.display().to_string()
}

#[test]
fn design_recovers_the_diagonal_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mmdesign(&["design", "--H", "diag:1..8", "--K", "identity", "--iters", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_vector(&out.join("majorizer_d.mtx")).unwrap();
    for (k, v) in d.iter().enumerate() {
        assert!((v.re - (k + 1) as f64).abs() <= 1e-4, "d = {d:?}");
    }
    let trace = std::fs::read_to_string(out.join("majorizer_trace.csv")).unwrap();
    assert!(trace.starts_with("iter,dual_value,grad_norm\n"));
    let sidecar = std::fs::read_to_string(out.join("majorizer.toml")).unwrap();
    assert!(sidecar.contains("alpha = 3.0"));
    assert!(sidecar.contains("seed = 0"));
}

#[test]
fn missing_h_file_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mmdesign(&["design", "--H", dir.path().join("nope.mtx").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn designed_toeplitz_majorizer_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mmdesign(&[
        "design",
        "--H",
        "toeplitz:N=128",
        "--K",
        "stacked:dft+identity",
        "--cert",
        "factor3",
        "--iters",
        "128",
        "--name",
        "tz",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = out.join("tz.toml");
    let v = mmdesign(&["verify", "--M", m.to_str().unwrap(), "--H", "toeplitz:N=128"]);
    assert!(v.status.success(), "{}", stdout(&v));
    assert!(stdout(&v).contains("majorization holds"));
    let l = mmdesign(&["verify", "--M", m.to_str().unwrap(), "--H", "toeplitz:N=128", "--mode", "lanczos"]);
    assert!(l.status.success(), "{}", stdout(&l));
}

#[test]
fn verify_exit_status_follows_majorization() {
    let dir = tempfile::tempdir().unwrap();
    let two = write_diag_majorizer(dir.path(), "two", &[2.0; 4], 1.0);
    let o = mmdesign(&["verify", "--M", &two, "--H", "diag:1,1,1,1"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "min_eig 1"), "{}", stdout(&o));

    let one = write_diag_majorizer(dir.path(), "one", &[1.0; 4], 1.0);
    let o = mmdesign(&["verify", "--M", &one, "--H", "diag:2,2,2,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILS"));
}

#[test]
fn spectrum_of_the_hessian_itself_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_diag_majorizer(dir.path(), "m", &[1.0, 2.0, 3.0, 4.0, 5.0], 1.0);
    let out = dir.path().join("spec");
    let o = mmdesign(&["spectrum", "--M", &m, "--H", "diag:1..5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 5);
    assert!(values.iter().all(|v| (v - 1.0).abs() <= 1e-10));
}

#[test]
fn output_directory_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("envout");
    let o = Command::new(env!("CARGO_BIN_EXE_mmdesign"))
        .args(["design", "--H", "diag:1..3", "--iters", "50"])
        .env("MMDESIGN_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("majorizer.toml").is_file());
}

#[test]
fn small_toeplitz_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tz");
    let o = mmdesign(&["toeplitz", "--N", "16", "--iters", "64", "--mm-iters", "3000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("toeplitz_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    for arm in ["lipschitz", "sqs", "design-diag", "design-circ-diag", "circ"] {
        assert!(out.join(format!("toeplitz_{arm}_trace.csv")).is_file());
        assert!(out.join(format!("toeplitz_{arm}_spectrum.csv")).is_file());
    }
}

#[test]
fn small_ct_demo_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ct.toml");
    std::fs::write(&cfg, "n = 16\nn_views = 24\nn_channels = 24\ndesign_iters = 32\n").unwrap();
    let out = dir.path().join("ct");
    let o = mmdesign(&["ct-demo", "--config", cfg.to_str().unwrap(), "--iters", "3", "--reference", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("ct_summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[..3].iter().all(|l| l.split(',').nth(1) == Some("3")));
    assert!(rows[3].starts_with("reference,6,"));
    let image = std::fs::read_to_string(out.join("ct_down_image.csv")).unwrap();
    assert!(image.starts_with("16,16\n"));
    let m = out.join("ct_down_majorizer.toml");
    assert!(m.is_file() && out.join("ct_down_geometry.toml").is_file());

    std::fs::write(&cfg, "n = 16\nbogus_key = 1\n").unwrap();
    let bad = mmdesign(&["ct-demo", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("bad").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn malformed_arguments_are_rejected() {
    assert!(!mmdesign(&["design", "--H", "diag:5..1"]).status.success());
    assert!(!mmdesign(&["design", "--H", "diag:1..3", "--K", "dft2"]).status.success());
    assert!(!mmdesign(&["design", "--H", "diag:1..3", "--cert", "maybe"]).status.success());
}
