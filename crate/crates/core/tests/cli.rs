use std::fs;
use std::process::{Command, Output};

fn pournet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pournet")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&pournet(&["bogus"])), 2);
    assert_eq!(code(&pournet(&["switch-baseline"])), 2, "seed is required");
    assert_eq!(code(&pournet(&["suite", "--seed", "1"])), 2, "suite needs --out");
    assert_eq!(code(&pournet(&["switch-baseline", "--seed", "1", "--set", "epochs"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    fs::write(&report, "{}").unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&pournet(&["export", "--report", report.to_str().unwrap(), "--style", "pie", "--out", out])), 2);
}

#[test]
fn bad_configuration_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "epochs = 5\n").unwrap();
    assert_eq!(code(&pournet(&["switch-baseline", "--config", cfg.to_str().unwrap()])), 3, "no seed key");
    fs::write(&cfg, "seed = 4\nlag_tau_s = -1\n").unwrap();
    assert_eq!(code(&pournet(&["switch-baseline", "--config", cfg.to_str().unwrap()])), 3);
    assert_eq!(code(&pournet(&["switch-baseline", "--seed", "1", "--set", "no_such_key=1"])), 3);
    assert_eq!(code(&pournet(&["switch-baseline", "--seed", "1", "--container", "teapot"])), 2);
}

#[test]
fn checks_pass() {
    let g = pournet(&["grad-check", "--trials", "2"]);
    assert_eq!(code(&g), 0);
    assert!(stdout(&g).contains("PASS"));
    let s = pournet(&["sim-oracle-check", "--trials", "200"]);
    assert_eq!(code(&s), 0);
    assert_eq!(stdout(&s).matches("PASS").count(), 2);
}

#[test]
fn switch_baseline_reports_both_pairs() {
    let o = pournet(&["switch-baseline", "--seed", "9", "--trials", "4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("switch-fast:red_cup") && text.contains("switch-slow:red_cup"), "{text}");
    // same seed, same numbers
    assert_eq!(text, stdout(&pournet(&["switch-baseline", "--seed", "9", "--trials", "4"])));
}

#[test]
fn demos_train_and_evaluate_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let demos = dir.path().join("demos");
    let models = dir.path().join("models");
    let evals = dir.path().join("eval");
    let o = pournet(&["gen-demos", "--seed", "2", "--trials", "20", "--out", demos.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(demos.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 20);

    let o = pournet(&[
        "train",
        "--seed",
        "2",
        "--set",
        "epochs=2",
        "--demos",
        demos.to_str().unwrap(),
        "--out",
        models.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = fs::read_to_string(models.join("M0_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 3, "header plus epochs 0..=2");

    let model = models.join("M0.json");
    let o = pournet(&[
        "eval",
        "--seed",
        "2",
        "--model",
        model.to_str().unwrap(),
        "--container",
        "coffee_mug",
        "--trials",
        "3",
        "--verbose-trajectories",
        "--out",
        evals.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("M0:coffee_mug"));
    let rows = fs::read_to_string(evals.join("target_vs_actual_M0_coffee_mug.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
    assert_eq!(fs::read_dir(evals.join("trajectories")).unwrap().count(), 3);
}
