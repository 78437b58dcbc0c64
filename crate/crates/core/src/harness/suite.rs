//! The end-to-end experiment suite: demonstrations, training, evaluation on
//! every catalog container, switch baselines, practicing on the bottles and
//! the re-evaluation afterwards.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::control::{switch_controller, ExecConfig, PourResult, Termination};
use crate::error::{Error, Result};
use crate::gssp::{gssp_batch, gssp_gradual, relabel_audit, GsspConfig, GsspMode, GsspOutcome, GsspReport};
use crate::harness::catalog::ContainerCatalog;
use crate::harness::config::SuiteConfig;
use crate::harness::evaluate::{evaluate, evaluate_tasks, evaluation_tasks, generate_demo_set, DemoSet, EvalOutcome};
use crate::harness::export::{error_bars_csv, target_vs_actual_csv, trajectory_csv};
use crate::net::{format_curve, train, ModelCheckpoint};
use crate::seed::{derive_seed, rng_for};
use crate::signal::{demonstrate, format_trial, split_dataset, Manifest, Split, TRAIN_RATIO};
use crate::trial::{ErrorStats, TrialRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    /// training, similar, unaccustomed, baseline or adapted.
    pub group: String,
    pub container: String,
    pub controller: String,
    pub lineage: Vec<String>,
    pub stats: ErrorStats,
    pub durations_s: Vec<f64>,
    pub terminations: Vec<Termination>,
    /// Per pour: did liquid keep landing after the first backward command?
    pub inflow_after_reversal: Vec<bool>,
    pub seed: u64,
}

impl ExperimentReport {
    pub fn new(id: String, group: &str, controller: String, lineage: Vec<String>, eval: &EvalOutcome, seed: u64) -> Self {
        Self {
            id,
            group: group.to_string(),
            container: eval.container.clone(),
            controller,
            lineage,
            stats: eval.stats.clone(),
            durations_s: eval.durations_s.clone(),
            terminations: eval.results.iter().map(|r| r.terminated_by).collect(),
            inflow_after_reversal: eval
                .results
                .iter()
                .map(|r| r.inflow_after_reversal().is_some_and(|(rise, back)| rise > back))
                .collect(),
            seed,
        }
    }

    /// Pours that settled with a duration inside `[lo, hi]` seconds.
    pub fn settled_within(&self, lo: f64, hi: f64) -> usize {
        self.terminations
            .iter()
            .zip(&self.durations_s)
            .filter(|(t, d)| **t == Termination::Settled && (lo..=hi).contains(*d))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub train_trials: usize,
    pub val_trials: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub best_val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub config: SuiteConfig,
    pub demo_count: usize,
    pub demo_mu_e_ml: f64,
    pub demo_sigma_e_ml: f64,
    pub err_threshold_ml: f64,
    pub training: TrainingSummary,
    pub experiments: Vec<ExperimentReport>,
    pub gssp: Vec<GsspReport>,
    pub practice_trials: usize,
    pub relabel_audit_max_ml: f64,
}

impl SuiteReport {
    pub fn experiment(&self, id: &str) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.id == id)
    }

    pub fn gssp_run(&self, mode: GsspMode, container: &str) -> Option<&GsspReport> {
        self.gssp.iter().find(|g| g.mode == mode && g.container == container)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(runs) = v["gssp"].as_array_mut() {
            for (run, g) in runs.iter_mut().zip(&self.gssp) {
                *run = serde_json::from_str(&g.to_json()?)?;
            }
        }
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text)?;
        if let Some(runs) = v["gssp"].as_array_mut() {
            for run in runs {
                if run["err_threshold_ml"].is_null() {
                    run["err_threshold_ml"] = serde_json::json!(f64::MAX);
                }
            }
        }
        let mut report: Self = serde_json::from_value(v)?;
        for g in &mut report.gssp {
            if g.err_threshold_ml == f64::MAX {
                g.err_threshold_ml = f64::INFINITY;
            }
        }
        Ok(report)
    }
}

/// Everything the suite produced, in memory.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub report: SuiteReport,
    pub checkpoints: Vec<(String, ModelCheckpoint)>,
    pub curve_csv: String,
    pub practice_trials: Vec<TrialRecord>,
    pub summary: String,
}

impl SuiteOutcome {
    pub fn checkpoint(&self, name: &str) -> Option<&ModelCheckpoint> {
        self.checkpoints.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Incremental writer: files land on disk as stages finish, and a failing
/// stage leaves a manifest of what was completed.
struct Sink<'a> {
    dir: Option<&'a Path>,
    written: Vec<PathBuf>,
    stages: Vec<String>,
}

impl Sink<'_> {
    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, contents)?;
            self.written.push(path);
        }
        Ok(())
    }

    fn stage_done(&mut self, name: &str, log: &mut dyn FnMut(&str)) {
        log(&format!("stage done: {name}"));
        self.stages.push(name.to_string());
    }

    fn partial_manifest(&self, err: &Error) -> String {
        let mut out = format!("status: failed\nerror: {err}\ncompleted stages:\n");
        for s in &self.stages {
            let _ = writeln!(out, "  {s}");
        }
        out.push_str("files:\n");
        for p in &self.written {
            let _ = writeln!(out, "  {}", p.display());
        }
        out
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

struct Stages<'a> {
    cfg: &'a SuiteConfig,
    exec: &'a ExecConfig,
    eval_seed: u64,
    reference: ContainerSpec,
    experiments: Vec<ExperimentReport>,
    checkpoints: Vec<(String, ModelCheckpoint)>,
    gssp: Vec<GsspReport>,
    practice_trials: Vec<TrialRecord>,
}

impl Stages<'_> {
    fn record(&mut self, sink: &mut Sink<'_>, rep: ExperimentReport, results: &[PourResult], log: &mut dyn FnMut(&str)) -> Result<()> {
        let stem = file_stem(&rep.id);
        sink.write(&format!("plots/target_vs_actual_{stem}.csv"), &target_vs_actual_csv(&rep))?;
        let keep = if self.cfg.verbose_trajectories { results.len() } else { 1 };
        for (k, r) in results.iter().take(keep).enumerate() {
            sink.write(&format!("trajectories/{stem}_{k:02}.csv"), &trajectory_csv(r))?;
        }
        log(&format!("  {:<36} mu_e {:7.2} mL  sigma_e {:7.2} mL", rep.id, rep.stats.mu_e_ml, rep.stats.sigma_e_ml));
        self.experiments.push(rep);
        Ok(())
    }

    /// Stores a practiced model and evaluates it on its bottle and on the
    /// reference container (the specialisation check).
    fn adapted(&mut self, sink: &mut Sink<'_>, tag: &str, bottle: &ContainerSpec, outcome: GsspOutcome, log: &mut dyn FnMut(&str)) -> Result<()> {
        let model = outcome.model;
        sink.write(&format!("checkpoints/{tag}.json"), &model.to_json()?)?;
        sink.write(&format!("gssp/{tag}.json"), &outcome.report.to_json()?)?;
        let reference = self.reference.clone();
        for (c, id) in [
            (bottle, format!("{tag}:{}", bottle.name)),
            (&reference, format!("{tag}@{}", reference.name)),
        ] {
            let ev = evaluate(&model, c, self.cfg.eval_trials, self.exec, self.eval_seed)?;
            let rep = ExperimentReport::new(id, "adapted", "learned".into(), model.lineage.clone(), &ev, self.eval_seed);
            self.record(sink, rep, &ev.results, log)?;
        }
        self.practice_trials.extend(outcome.dataset);
        self.gssp.push(outcome.report);
        self.checkpoints.push((tag.to_string(), model));
        Ok(())
    }
}

fn group_of(catalog: &ContainerCatalog, c: &ContainerSpec) -> &'static str {
    if catalog.training.contains(c) {
        "training"
    } else if catalog.similar_test.contains(c) {
        "similar"
    } else {
        "unaccustomed"
    }
}

/// The suite's demonstrations and their train/validation split.
pub fn demo_dataset(cfg: &SuiteConfig) -> Result<(DemoSet, Vec<TrialRecord>, Vec<TrialRecord>)> {
    let catalog = ContainerCatalog::default();
    let demos = generate_demo_set(&catalog.training, cfg.demo_count, &cfg.exec_config(), &cfg.demo_profile(), derive_seed(cfg.seed, "demos", 0))?;
    let (train, val) = split_dataset(&demos.trials, TRAIN_RATIO, &mut rng_for(cfg.seed, "split", 0))?;
    Ok((demos, train, val))
}

/// Runs the suite. With `out`, artifacts are written as they are produced.
pub fn run_experiment_suite(cfg: &SuiteConfig, out: Option<&Path>, log: &mut dyn FnMut(&str)) -> Result<SuiteOutcome> {
    let mut sink = Sink {
        dir: out,
        written: Vec::new(),
        stages: Vec::new(),
    };
    match run_stages(cfg, &mut sink, log) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            if out.is_some() {
                let manifest = sink.partial_manifest(&e);
                let _ = sink.write("PARTIAL_RESULTS.txt", &manifest);
            }
            Err(e)
        }
    }
}

fn run_stages(cfg: &SuiteConfig, sink: &mut Sink<'_>, log: &mut dyn FnMut(&str)) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let catalog = ContainerCatalog::default();
    let exec = cfg.exec_config();
    let profile = cfg.demo_profile();
    let root = cfg.seed;
    let eval_seed = derive_seed(root, "eval", 0);
    let reference = catalog.reference().clone();
    sink.write("config.txt", &cfg.to_text())?;

    // demonstrations
    let (demos, train_set, val_set) = demo_dataset(cfg)?;
    {
        let mut manifest = Manifest::default();
        for (k, t) in train_set.iter().enumerate() {
            let rel = format!("demos/train_{k:03}.txt");
            sink.write(&rel, &format_trial(t, &exec.consts))?;
            manifest.entries.push((PathBuf::from(&rel[6..]), Split::Train));
        }
        for (k, t) in val_set.iter().enumerate() {
            let rel = format!("demos/val_{k:03}.txt");
            sink.write(&rel, &format_trial(t, &exec.consts))?;
            manifest.entries.push((PathBuf::from(&rel[6..]), Split::Validation));
        }
        sink.write("demos/manifest.txt", &manifest.format())?;
    }
    sink.stage_done(&format!("demonstrations (mu_e {:.2} mL)", demos.stats.mu_e_ml), log);

    // training
    let trained = train(&train_set, &val_set, &cfg.train_config(), "M0")?;
    let m0 = trained.checkpoint;
    let curve_csv = format_curve(&trained.curve);
    sink.write("checkpoints/M0.json", &m0.to_json()?)?;
    sink.write("curves/M0.csv", &curve_csv)?;
    let training = TrainingSummary {
        train_trials: train_set.len(),
        val_trials: val_set.len(),
        epochs: cfg.epochs,
        best_epoch: trained.best_epoch,
        initial_train_loss: trained.curve[0].train_loss,
        final_train_loss: trained.curve.last().map_or(f64::NAN, |p| p.train_loss),
        best_val_loss: trained.curve[trained.best_epoch].val_loss.unwrap_or(f64::NAN),
    };
    sink.stage_done("training", log);

    let mut st = Stages {
        cfg,
        exec: &exec,
        eval_seed,
        reference: reference.clone(),
        experiments: Vec::new(),
        checkpoints: vec![("M0".to_string(), m0.clone())],
        gssp: Vec::new(),
        practice_trials: Vec::new(),
    };

    // the trained model on every container
    for c in catalog.all() {
        let ev = evaluate(&m0, c, cfg.eval_trials, &exec, eval_seed)?;
        let rep = ExperimentReport::new(format!("M0:{}", c.name), group_of(&catalog, c), "learned".into(), m0.lineage.clone(), &ev, eval_seed);
        st.record(sink, rep, &ev.results, log)?;
    }
    sink.stage_done("evaluation", log);

    // baselines on the reference container, same tasks as the model
    let ref_tasks = evaluation_tasks(&reference, cfg.eval_trials, eval_seed)?;
    let mut demo_rng = rng_for(root, "demonstrator-eval", 0);
    let ev = evaluate_tasks(&ref_tasks, |t| demonstrate(t, &exec, &profile, &mut demo_rng))?;
    let rep = ExperimentReport::new(format!("demonstrator:{}", reference.name), "baseline", "demonstrator".into(), vec![], &ev, eval_seed);
    st.record(sink, rep, &ev.results, log)?;
    for (name, fwd, back) in [
        ("switch-fast", cfg.switch_fast_fwd, cfg.switch_fast_back),
        ("switch-slow", cfg.switch_slow_fwd, cfg.switch_slow_back),
    ] {
        let ev = evaluate_tasks(&ref_tasks, |t| switch_controller(t, fwd, back, &exec))?;
        let rep = ExperimentReport::new(format!("{name}:{}", reference.name), "baseline", format!("switch {fwd}/{back} deg/s"), vec![], &ev, eval_seed);
        st.record(sink, rep, &ev.results, log)?;
    }
    sink.stage_done("baselines", log);

    // practicing on the bottles
    let bottles = [
        (catalog.find("wine_bottle")?.clone(), cfg.batch_n_wine),
        (catalog.find("blue_bottle")?.clone(), cfg.batch_n_blue),
    ];
    for (bottle, n) in &bottles {
        let mut gcfg = GsspConfig::batch(*n, false, derive_seed(root, &format!("gssp-batch:{}", bottle.name), 0));
        gcfg.fine_tune_epochs = cfg.fine_tune_epochs;
        gcfg.fine_tune_lr = cfg.fine_tune_lr;
        let outcome = gssp_batch(&m0, bottle, &gcfg, &exec, &[])?;
        st.adapted(sink, &format!("batch-{}", bottle.name), bottle, outcome, log)?;
        sink.stage_done(&format!("batch practicing on {}", bottle.name), log);
    }
    let wine = bottles[0].0.clone();
    if cfg.run_combined {
        let mut gcfg = GsspConfig::batch(cfg.batch_n_wine, true, derive_seed(root, "gssp-batch-combined:wine_bottle", 0));
        gcfg.fine_tune_epochs = cfg.fine_tune_epochs;
        gcfg.fine_tune_lr = cfg.fine_tune_lr;
        let outcome = gssp_batch(&m0, &wine, &gcfg, &exec, &train_set)?;
        st.adapted(sink, "batch-combined-wine_bottle", &wine, outcome, log)?;
        sink.stage_done("combined batch practicing on wine_bottle", log);
    }
    let err_threshold_ml = cfg.err_threshold_factor * demos.stats.mu_e_ml;
    {
        let gcfg = GsspConfig {
            n_practices: cfg.gradual_n,
            max_rounds: cfg.gradual_max_rounds,
            fine_tune_epochs: cfg.fine_tune_epochs,
            fine_tune_lr: cfg.fine_tune_lr,
            reuse_tasks: cfg.gradual_reuse_tasks,
            ..GsspConfig::gradual(err_threshold_ml, derive_seed(root, "gssp-gradual:wine_bottle", 0))
        };
        let outcome = gssp_gradual(&m0, &wine, &gcfg, &exec)?;
        st.adapted(sink, "gradual-wine_bottle", &wine, outcome, log)?;
        sink.stage_done("gradual practicing on wine_bottle", log);
    }
    let Stages {
        experiments,
        checkpoints,
        gssp: gssp_reports,
        practice_trials,
        ..
    } = st;
    let relabel_audit_max_ml = relabel_audit(&practice_trials, &exec)?;

    let report = SuiteReport {
        seed: root,
        config: cfg.clone(),
        demo_count: demos.trials.len(),
        demo_mu_e_ml: demos.stats.mu_e_ml,
        demo_sigma_e_ml: demos.stats.sigma_e_ml,
        err_threshold_ml,
        training,
        experiments,
        gssp: gssp_reports,
        practice_trials: practice_trials.len(),
        relabel_audit_max_ml,
    };
    let summary = summary_table(&report);
    sink.write("plots/error_bars.csv", &error_bars_csv(&report.experiments))?;
    sink.write("suite_report.json", &report.to_json()?)?;
    sink.write("summary.txt", &summary)?;
    sink.stage_done("report", log);
    Ok(SuiteOutcome {
        report,
        checkpoints,
        curve_csv,
        practice_trials,
        summary,
    })
}

/// Plain-text result tables: one row per experiment, then the practicing rounds.
pub fn summary_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "root seed {}", report.seed);
    let _ = writeln!(
        out,
        "demonstrator over {} demonstrations: mu_e {:.2} mL, sigma_e {:.2} mL (practice threshold {:.2} mL)",
        report.demo_count, report.demo_mu_e_ml, report.demo_sigma_e_ml, report.err_threshold_ml
    );
    let t = &report.training;
    let _ = writeln!(
        out,
        "training: {} / {} trials, best epoch {} of {}, train loss {:.4} -> {:.4}, best val loss {:.4}\n",
        t.train_trials, t.val_trials, t.best_epoch, t.epochs, t.initial_train_loss, t.final_train_loss, t.best_val_loss
    );
    let _ = writeln!(out, "{:<36} {:<13} {:>9} {:>9} {:>9} {:>8}", "experiment", "group", "mu_e", "sigma_e", "signed", "settled");
    for e in &report.experiments {
        let _ = writeln!(
            out,
            "{:<36} {:<13} {:>9.2} {:>9.2} {:>9.2} {:>5}/{:<2}",
            e.id,
            e.group,
            e.stats.mu_e_ml,
            e.stats.sigma_e_ml,
            e.stats.mean_signed_error_ml(),
            e.settled_within(0.0, f64::INFINITY),
            e.terminations.len()
        );
    }
    for g in &report.gssp {
        let _ = writeln!(out, "\n{} practicing on {} (converged: {})", g.mode.as_str(), g.container, g.converged);
        let _ = writeln!(out, "{:>6} {:>4} {:>12} {:>8}  model", "round", "n", "mean error", "dataset");
        for r in &g.rounds {
            let _ = writeln!(out, "{:>6} {:>4} {:>12.2} {:>8}  {}", r.round, r.n, r.mean_error_ml, r.dataset_size, r.model_label);
        }
        let _ = writeln!(out, "lineage: {}", g.lineage.join(" -> "));
    }
    let _ = writeln!(
        out,
        "\nrelabeling audit: {} practice trials, worst replay gap {:.3e} mL",
        report.practice_trials, report.relabel_audit_max_ml
    );
    out
}
