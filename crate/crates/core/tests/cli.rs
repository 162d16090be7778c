use std::process::Command;

fn genlip() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_genlip"));
    c.env_remove("GENLIP_OUT_DIR");
    c
}

#[test]
fn run_writes_one_csv_per_seed_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = genlip()
        .args(["run", "--problem", "lower:sgd_I", "--opt", "adamw_exp", "--seeds", "0..2", "--k", "500"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    assert!(names.iter().any(|n| n == "manifest.txt"), "{names:?}");
    let first_csv = names.iter().find(|n| n.ends_with(".csv")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(first_csv)).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("run_id,seed,k,")));
}

#[test]
fn env_var_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let out = genlip()
        .env("GENLIP_OUT_DIR", &target)
        .args(["run", "--problem", "lower:sgd_I", "--seeds", "0", "--k", "100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("manifest.txt").exists());
}

#[test]
fn regime_violation_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never");
    let out = genlip().args(["run", "--eps", "0"]).arg("--out").arg(&target).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("regime"));
    assert!(!target.exists());
}

#[test]
fn config_errors_name_the_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "problem = lower:sgd_I\nseeds = banana\n").unwrap();
    let out = genlip().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("seeds"), "{err}");
}

#[test]
fn compare_prints_a_ranked_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = genlip()
        .args([
            "compare",
            "--problem",
            "lower:sgd_I",
            "--methods",
            "adamw_exp,sgd_const",
            "--seeds",
            "0..1",
            "--k",
            "2000",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("adamw_exp") && text.contains("sgd_const"), "{text}");
    assert!(dir.path().join("compare.txt").exists());
}
