use std::process::Command;

fn symbiosr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_symbiosr")).args(args).output().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = symbiosr(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["sweep-ser", "sweep-power", "mc-verify", "selftest"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn unknown_scheme_is_a_usage_error() {
    let dir = tempdir();
    let out = symbiosr(&["sweep-ser", "--schemes", "proposed,best", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempdir();
    let out = symbiosr(&["sweep-ser", "--config", "/nonexistent/scenario.toml", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn selftest_passes_and_writes_its_sweep() {
    let dir = tempdir();
    let out = symbiosr(&["selftest", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.join("selftest_runs.csv").exists());
    assert!(dir.join("selftest_summary.csv").exists());
}

fn tempdir() -> std::path::PathBuf {
    let d = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{}", std::thread::current().name().unwrap_or("t").replace("::", "-")));
    std::fs::create_dir_all(&d).unwrap();
    d
}
