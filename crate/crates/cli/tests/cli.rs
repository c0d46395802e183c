use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fbm-sfde"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fbm-sfde")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

/// A convergence run small enough for a unit test.
const SMALL: &[&str] = &["--M", "4,8", "--n-paths", "64", "--refinement", "2", "--substeps", "4"];

#[test]
fn no_arguments_prints_usage() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn hurst_out_of_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["convergence", "--H", "0.3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("H must be in (1/2, 1)"), "{}", stderr(&o));
    assert!(!dir.path().join("run.cfg").exists(), "nothing runs before validation");
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "H = 0.7\nnum_pathz = 10\n").unwrap();
    let o = run(&["convergence", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("num_pathz"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.in");
    let out = dir.path().join("out");
    fs::write(&cfg, "n_paths = 5000\nseed = 11\nM = 4,8\nrefinement = 2\nsubsteps = 4\n").unwrap();
    let o = run(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--n-paths",
        "32",
        "--out",
        &out_arg(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(out.join("run.cfg")).unwrap();
    assert!(echo.contains("n-paths = 32\n"), "{echo}");
    assert!(echo.contains("seed = 11\n"), "{echo}");
    assert!(echo.contains("# seed: 11\n"));
    assert!(echo.starts_with("# fbm-sfde "));
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",32")), "{csv}");
}

#[test]
fn convergence_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["convergence", "--out"];
    let out = out_arg(dir.path());
    args.push(&out);
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("function,delta,estimator,error,stderr,n_paths"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("fitted_order = "));
    assert!(summary.contains("theoretical_order = "));
}

#[test]
fn toy_default_quick_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["convergence", "--quick", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("cos1,") && l.ends_with(",1000")), "{csv}");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("theoretical_order = 4.4999999999999996e-1"), "{summary}");
    assert!(summary.contains("conditions_pass = false"));
    assert!(summary.contains("warning = "));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let mut args = vec!["convergence", "--seed", "5", "--out"];
    let out = out_arg(&first);
    args.push(&out);
    args.extend_from_slice(SMALL);
    assert!(run(&args).status.success());
    let second = dir.path().join("b");
    let o = run(&[
        "convergence",
        "--config",
        first.join("run.cfg").to_str().unwrap(),
        "--out",
        &out_arg(&second),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("errors.csv")).unwrap(),
        fs::read(second.join("errors.csv")).unwrap()
    );
}

#[test]
fn csv_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "1"].iter().enumerate() {
        let out = dir.path().join(format!("t{i}"));
        let out_s = out_arg(&out);
        let mut args = vec!["convergence", "--threads", threads, "--n-paths", "600", "--out", &out_s];
        args.extend_from_slice(&SMALL[..2]);
        args.extend_from_slice(&SMALL[4..]);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(out.join("errors.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn unwritable_output_dir_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("sub");
    let mut args = vec!["convergence", "--out"];
    let out_s = out_arg(&out);
    args.push(&out_s);
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("I/O error"));
}

#[test]
fn check_operators_default_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-operators", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(csv.contains("composition_I0.3_I0.4_n16384,"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn check_operators_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-operators", "--quick", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("check,value,tolerance,pass"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn wrong_covariance_constant_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-operators", "--quick", "--ch-scale", "1.01", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    let failing: Vec<&str> = csv.lines().filter(|l| l.ends_with(",false")).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|l| l.starts_with("covariance_reconstruction")), "{failing:?}");
}

#[test]
fn check_conditions_toy_small_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "check-conditions",
        "--tau",
        "5e-4",
        "--T",
        "1e-3",
        "--M",
        "8,16",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("conditions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("assumptions.csv").exists());
}

#[test]
fn check_conditions_fail_at_unit_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-conditions", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("conditions.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.contains("false")));
}

#[test]
fn paths_dump_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "paths",
        "--model",
        "hamiltonian",
        "--M",
        "4,8",
        "--n-paths",
        "2",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for p in 0..2 {
        for name in [format!("fbm_{p}.csv"), format!("reference_{p}.csv"), format!("em_M4_{p}.csv"), format!("em_M8_{p}.csv")] {
            assert!(dir.path().join(&name).exists(), "{name}");
        }
    }
    let reference = fs::read_to_string(dir.path().join("reference_0.csv")).unwrap();
    assert_eq!(reference.lines().next(), Some("t,x0,x1"));
    let first: Vec<f64> = reference.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], -0.5);
}

#[test]
fn unknown_model_lists_builtins() {
    let o = run(&["paths", "--model", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("toy"), "{}", stderr(&o));
}
