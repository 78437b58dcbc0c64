//! End-to-end runs at toy scale: the pieces must fit together, write what
//! they promise, and stay reproducible.

use std::fs;
use std::path::Path;

use pournet::control::{run_closed_loop, ExecConfig};
use pournet::gssp::GsspMode;
use pournet::harness::{
    demo_dataset, evaluate, evaluation_tasks, export_plot_data, run_experiment_suite, ContainerCatalog, PlotStyle,
    SuiteConfig, SuiteReport,
};
use pournet::net::train;
use pournet::seed::derive_seed;
use pournet::signal::{format_trial, Manifest, Split};
use pournet::ModelCheckpoint;

fn toy(seed: u64) -> SuiteConfig {
    let mut cfg = SuiteConfig::with_seed(seed);
    cfg.apply_overrides(&[
        "demo_count=45",
        "epochs=60",
        "fine_tune_epochs=2",
        "eval_trials=3",
        "gradual_max_rounds=2",
        "gradual_n=5",
    ])
    .unwrap();
    cfg
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn toy_suite_writes_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment_suite(&toy(8), Some(dir.path()), &mut |_| {}).unwrap();
    let report = &out.report;

    for f in ["config.txt", "suite_report.json", "summary.txt", "checkpoints/M0.json", "curves/M0.csv", "demos/manifest.txt", "plots/error_bars.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert_eq!(report.demo_count, 45);
    // 16 containers, 3 baselines, 2 evaluations per practiced model
    assert_eq!(report.experiments.len(), 16 + 3 + 2 * 3);
    assert!(report.gssp_run(GsspMode::Gradual, "wine_bottle").is_some());
    assert!(report.gssp_run(GsspMode::Batch, "blue_bottle").is_some());

    // the report survives a round trip through its JSON file
    let text = fs::read_to_string(dir.path().join("suite_report.json")).unwrap();
    assert_eq!(&SuiteReport::from_json(&text).unwrap(), report);

    // μ_e / σ_e recomputed from the exported per-trial CSV
    for e in &report.experiments {
        let stem: String = e.id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        let rows = csv_rows(&fs::read_to_string(dir.path().join(format!("plots/target_vs_actual_{stem}.csv"))).unwrap());
        assert_eq!(rows.len(), e.terminations.len());
        let abs: Vec<f64> = rows.iter().map(|r| (r[1] - r[0]).abs()).collect();
        let mu = abs.iter().sum::<f64>() / abs.len() as f64;
        let var = abs.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / abs.len() as f64;
        assert!((mu - e.stats.mu_e_ml).abs() < 1e-9, "{}", e.id);
        assert!((var.sqrt() - e.stats.sigma_e_ml).abs() < 1e-9, "{}", e.id);
        for r in &rows {
            assert_eq!(r[3], r[0], "diagonal reference column");
        }
    }

    // relabeled practice trials replay to their goals
    assert!(report.practice_trials > 0);
    assert!(report.relabel_audit_max_ml < 1e-6);
}

#[test]
fn toy_suite_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = toy(8);
    let ra = run_experiment_suite(&cfg, Some(a.path()), &mut |_| {}).unwrap();
    let rb = run_experiment_suite(&cfg, Some(b.path()), &mut |_| {}).unwrap();
    assert_eq!(ra.summary, rb.summary);
    for f in ["suite_report.json", "checkpoints/M0.json", "checkpoints/gradual-wine_bottle.json", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_stage_leaves_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(2);
    // too few practices for batch mode: fails after training and evaluation
    cfg.batch_n_wine = 5;
    let err = run_experiment_suite(&cfg, Some(dir.path()), &mut |_| {}).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let manifest = fs::read_to_string(dir.path().join("PARTIAL_RESULTS.txt")).unwrap();
    assert!(manifest.contains("status: failed"));
    assert!(manifest.contains("training"));
    assert!(dir.path().join("checkpoints/M0.json").is_file());
}

#[test]
fn written_demos_train_the_same_model() {
    let cfg = toy(11);
    let exec = cfg.exec_config();
    let (_, train_set, val_set) = demo_dataset(&cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::default();
    for (prefix, split, set) in [("train", Split::Train, &train_set), ("val", Split::Validation, &val_set)] {
        for (k, t) in set.iter().enumerate() {
            let name = format!("{prefix}_{k:03}.txt");
            fs::write(dir.path().join(&name), format_trial(t, &exec.consts)).unwrap();
            manifest.entries.push((name.into(), split));
        }
    }
    let parsed = Manifest::parse(&manifest.format()).unwrap();
    let (t2, v2) = parsed.load(dir.path(), &exec.consts).unwrap();
    assert_eq!((t2.len(), v2.len()), (train_set.len(), val_set.len()));

    let a = train(&train_set, &val_set, &cfg.train_config(), "M0").unwrap().checkpoint;
    let b = train(&t2, &v2, &cfg.train_config(), "M0").unwrap().checkpoint;
    assert_eq!(a, b);

    // checkpoint files round-trip exactly
    let path = dir.path().join("m.json");
    a.save(&path).unwrap();
    assert_eq!(ModelCheckpoint::load(&path).unwrap(), a);
}

#[test]
fn evaluation_is_repeatable_and_uses_its_own_seeds() {
    let cfg = toy(3);
    let exec = ExecConfig::default();
    let (_, train_set, val_set) = demo_dataset(&cfg).unwrap();
    let model = train(&train_set, &val_set, &cfg.train_config(), "M0").unwrap().checkpoint;
    let catalog = ContainerCatalog::default();
    let seed = derive_seed(cfg.seed, "eval", 0);
    let a = evaluate(&model, catalog.reference(), 4, &exec, seed).unwrap();
    let b = evaluate(&model, catalog.reference(), 4, &exec, seed).unwrap();
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.durations_s, b.durations_s);

    // a single pour reproduces the evaluation's first result
    let tasks = evaluation_tasks(catalog.reference(), 4, seed).unwrap();
    let one = run_closed_loop(&model, &tasks[0], &exec).unwrap();
    assert_eq!(one.actual_ml, a.results[0].actual_ml);

    // evaluation tasks never coincide with practice tasks drawn for the same root
    let practice_seed = derive_seed(cfg.seed, "gssp-batch:red_cup", 0);
    assert_ne!(practice_seed, seed);
    let task_seeds: Vec<u64> = tasks.iter().map(|t| t.seed).collect();
    let other = evaluation_tasks(catalog.reference(), 4, practice_seed).unwrap();
    assert!(other.iter().all(|t| !task_seeds.contains(&t.seed)));
}

#[test]
fn export_writes_plot_data_from_a_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment_suite(&toy(4), Some(dir.path()), &mut |_| {}).unwrap();
    let text = fs::read_to_string(dir.path().join("suite_report.json")).unwrap();
    let report = SuiteReport::from_json(&text).unwrap();
    let plots = dir.path().join("exported");

    let bars = export_plot_data(&report, PlotStyle::ErrorBars, &plots).unwrap();
    let body = fs::read_to_string(&bars[0]).unwrap();
    assert_eq!(body.lines().count(), 1 + out.report.experiments.len());
    assert!(body.starts_with("experiment,container,mu_e_ml,sigma_e_ml,n"));

    let tva = export_plot_data(&report, PlotStyle::TargetVsActual, &plots).unwrap();
    assert_eq!(tva.len(), out.report.experiments.len());
    assert!(export_plot_data(&report, PlotStyle::Trajectory, &plots).is_err());
    assert!(Path::new(&tva[0]).is_file());
}
