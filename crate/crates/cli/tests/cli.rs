use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shape-geodesics"))
        .args(args)
        .current_dir(cwd)
        .env("SHAPE_GEODESICS_THREADS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn config_errors_exit_with_two_and_list_every_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "p = 0\nfoo = 1\np = 2\n").unwrap();
    let out = run(&["run", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1") && err.contains("line 2") && err.contains("line 3"), "{err}");
    assert!(err.contains("p >= 1"), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "absent.cfg"], dir.path()).status.code(), Some(4));
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["experiment", "warp"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zigzag"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_shape-geodesics"))
        .args(["experiment", "zigzag"])
        .current_dir(dir.path())
        .env("SHAPE_GEODESICS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_frames_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.cfg"),
        "# coarse bump\nn = 11\ndt = 0.1\nt_final = 0.3\noutput_dir = out\n",
    )
    .unwrap();
    let out = run(&["run", "small.cfg", "--set", "momentum_expr=0.5 * sin(u) * sin(v)"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let obj = std::fs::read_to_string(dir.path().join("out/frame_00003.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 121);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 200);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS] energy drift"));
}

#[test]
fn experiments_report_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["experiment", "spheres", "--set", "p=2", "--set", "t_final=0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(": complete"), "{stdout}");
    assert!(dir.path().join("output/spheres/report.txt").exists());

    let out = run(&["experiment", "zigzag", "--set", "zigzag_levels=4,8,16"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS] zigzag monotone"));
}
