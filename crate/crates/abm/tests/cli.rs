//! End-to-end checks of the command-line interface: exit codes, stderr
//! wording, and a staged run driven entirely through the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn abm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_abm"))
}

fn write_smoke_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        r#"
[model]
n_explore = 60
[planner]
horizon = 3
[data]
n_real = 40
n_imagined = 30
master_seed = 2026
[tree.outcome]
min_samples_leaf = 5
min_samples_split = 10
[tree.strategy]
min_samples_leaf = 5
min_samples_split = 10
"#,
    )
    .unwrap();
    path
}

#[test]
fn run_then_staged_rerun_exit_zero_and_write_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_smoke_config(dir.path());
    let out = dir.path().join("out");

    let status = abm()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("report.json").exists());
    assert!(out.join("report.txt").exists());

    // Re-running single stages against the existing artifacts succeeds too.
    for stage in ["fit-tree", "evaluate", "export-dot"] {
        let status = abm()
            .args(["run", "--stage", stage, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "stage {stage} failed");
    }
}

#[test]
fn config_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    // No seed anywhere.
    let output = abm().arg("run").arg("--out").arg(dir.path().join("a")).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("seed"), "stderr should mention the missing seed: {stderr}");

    // Unknown key in the file.
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[data]\nmaster_seed = 1\nn_reel = 10\n").unwrap();
    let output = abm()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Invalid value.
    let bad = dir.path().join("invalid.toml");
    fs::write(&bad, "[data]\nmaster_seed = 1\ntest_fraction = 1.5\n").unwrap();
    let output = abm()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn stage_failures_exit_3_and_name_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let output = abm()
        .args(["evaluate", "--seed", "1", "--out"])
        .arg(dir.path().join("empty"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("stage") && stderr.contains("evaluate"),
        "stderr should blame the evaluate stage: {stderr}"
    );

    let output = abm()
        .args(["run", "--stage", "no-such-stage", "--seed", "1", "--out"])
        .arg(dir.path().join("empty"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}
