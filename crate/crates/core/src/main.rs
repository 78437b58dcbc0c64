use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pournet::control::{switch_controller, ExecConfig};
use pournet::gssp::{gssp_batch, gssp_gradual, GsspConfig, GsspMode};
use pournet::harness::{
    conservation_check, demo_dataset, evaluate, evaluate_tasks, evaluation_tasks, export_plot_data, geometry_check,
    run_experiment_suite, target_vs_actual_csv, trajectory_csv, ContainerCatalog, EvalOutcome, ExperimentReport,
    PlotStyle, SuiteConfig, SuiteReport,
};
use pournet::net::{format_curve, grad_check, train, GradCheckConfig};
use pournet::seed::derive_seed;
use pournet::signal::{format_trial, Manifest, Split};
use pournet::{Error, ModelCheckpoint, Result, TrialRecord};

const ACCEPTANCE_EXIT: u8 = 5;

#[derive(Parser)]
#[command(name = "pournet", version, about = "Learned pouring controller: demonstrations, training, evaluation and practicing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Config override, repeatable: `--set epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Write a trajectory CSV for every pour instead of the first one.
    #[arg(long, global = true)]
    verbose_trajectories: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic demonstration set and its split manifest.
    GenDemos {
        #[command(flatten)]
        common: Common,
        /// Number of demonstrations (default: config `demo_count`).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train the base model on demonstrations.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding `manifest.txt`; generated from the config when absent.
        #[arg(long)]
        demos: Option<PathBuf>,
    },
    /// Closed-loop evaluation of a checkpoint on one container.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "red_cup")]
        container: String,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Fast and slow switch controllers on the evaluation tasks of a container.
    SwitchBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "red_cup")]
        container: String,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Self-supervised practicing on a container.
    Gssp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "wine_bottle")]
        container: String,
        #[arg(long, default_value = "gradual")]
        mode: GsspMode,
        /// Practices per batch run (default: the config's count for the bottle, else 36).
        #[arg(long)]
        trials: Option<usize>,
        /// Fine-tune on practices plus the training demonstrations.
        #[arg(long)]
        include_demos: bool,
    },
    /// The whole experiment suite.
    Suite {
        #[command(flatten)]
        common: Common,
    },
    /// Plot data from a suite report.
    Export {
        #[command(flatten)]
        common: Common,
        /// `suite_report.json` written by the suite.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "error_bars")]
        style: String,
    },
    /// BPTT against central finite differences on random networks.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Simulator conservation and geometry against their oracles.
    SimOracleCheck {
        #[command(flatten)]
        common: Common,
        /// Random trajectories for the conservation check.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

impl Common {
    fn suite_config(&self) -> Result<SuiteConfig> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(path), _) => SuiteConfig::load(path)?,
            (None, Some(seed)) => SuiteConfig::with_seed(seed),
            (None, None) => return Err(Error::Usage("a root seed is required: pass --seed or --config".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.verbose_trajectories {
            cfg.verbose_trajectories = true;
        }
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Usage("this command writes files: pass --out <dir>".into()))
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn write_demos(dir: &Path, train: &[TrialRecord], val: &[TrialRecord], exec: &ExecConfig) -> Result<()> {
    let mut manifest = Manifest::default();
    for (prefix, split, set) in [("train", Split::Train, train), ("val", Split::Validation, val)] {
        for (k, t) in set.iter().enumerate() {
            let name = format!("{prefix}_{k:03}.txt");
            write(&dir.join(&name), &format_trial(t, &exec.consts))?;
            manifest.entries.push((PathBuf::from(name), split));
        }
    }
    write(&dir.join("manifest.txt"), &manifest.format())
}

fn print_eval(label: &str, ev: &EvalOutcome) {
    let settled = ev
        .results
        .iter()
        .filter(|r| r.terminated_by == pournet::control::Termination::Settled)
        .count();
    println!(
        "{label:<28} mu_e {:7.2} mL  sigma_e {:7.2} mL  signed {:7.2} mL  settled {settled}/{}",
        ev.stats.mu_e_ml,
        ev.stats.sigma_e_ml,
        ev.stats.mean_signed_error_ml(),
        ev.results.len()
    );
}

fn save_eval(out: Option<&Path>, id: &str, controller: &str, lineage: Vec<String>, ev: &EvalOutcome, seed: u64, all: bool) -> Result<()> {
    let Some(dir) = out else { return Ok(()) };
    let stem: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    let rep = ExperimentReport::new(id.to_string(), "cli", controller.to_string(), lineage, ev, seed);
    write(&dir.join(format!("target_vs_actual_{stem}.csv")), &target_vs_actual_csv(&rep))?;
    let keep = if all { ev.results.len() } else { 1 };
    for (k, r) in ev.results.iter().take(keep).enumerate() {
        write(&dir.join(format!("trajectories/{stem}_{k:02}.csv")), &trajectory_csv(r))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let catalog = ContainerCatalog::default();
    match cli.command {
        Command::GenDemos { common, trials } => {
            let mut cfg = common.suite_config()?;
            if let Some(n) = trials {
                cfg.demo_count = n;
                cfg.validate()?;
            }
            let (demos, train_set, val_set) = demo_dataset(&cfg)?;
            let dir = common.out_dir()?;
            write_demos(dir, &train_set, &val_set, &cfg.exec_config())?;
            println!(
                "{} demonstrations ({} train, {} validation) in {}: demonstrator mu_e {:.2} mL, sigma_e {:.2} mL",
                demos.trials.len(),
                train_set.len(),
                val_set.len(),
                dir.display(),
                demos.stats.mu_e_ml,
                demos.stats.sigma_e_ml
            );
        }
        Command::Train { common, demos } => {
            let cfg = common.suite_config()?;
            let exec = cfg.exec_config();
            let (train_set, val_set) = match demos {
                Some(dir) => {
                    let manifest = Manifest::parse(&std::fs::read_to_string(dir.join("manifest.txt"))?)?;
                    manifest.load(&dir, &exec.consts)?
                }
                None => {
                    let (_, t, v) = demo_dataset(&cfg)?;
                    (t, v)
                }
            };
            let dir = common.out_dir()?;
            let outcome = train(&train_set, &val_set, &cfg.train_config(), "M0")?;
            outcome.checkpoint.save(&dir.join("M0.json"))?;
            write(&dir.join("M0_curve.csv"), &format_curve(&outcome.curve))?;
            let first = &outcome.curve[0];
            let best = &outcome.curve[outcome.best_epoch];
            println!(
                "trained on {} / {} trials: train loss {:.4} -> {:.4}, best validation loss {:.4} at epoch {}",
                train_set.len(),
                val_set.len(),
                first.train_loss,
                best.train_loss,
                best.val_loss.unwrap_or(f64::NAN),
                outcome.best_epoch
            );
        }
        Command::Eval {
            common,
            model,
            container,
            trials,
        } => {
            let cfg = common.suite_config()?;
            let model = ModelCheckpoint::load(&model)?;
            let c = catalog.find(&container)?;
            let seed = derive_seed(cfg.seed, "eval", 0);
            let ev = evaluate(&model, c, trials.unwrap_or(cfg.eval_trials), &cfg.exec_config(), seed)?;
            print_eval(&format!("{}:{}", model.label(), c.name), &ev);
            let id = format!("{}:{}", model.label(), c.name);
            save_eval(common.out.as_deref(), &id, "learned", model.lineage.clone(), &ev, seed, cfg.verbose_trajectories)?;
        }
        Command::SwitchBaseline {
            common,
            container,
            trials,
        } => {
            let cfg = common.suite_config()?;
            let exec = cfg.exec_config();
            let c = catalog.find(&container)?;
            let seed = derive_seed(cfg.seed, "eval", 0);
            let tasks = evaluation_tasks(c, trials.unwrap_or(cfg.eval_trials), seed)?;
            for (name, fwd, back) in [
                ("switch-fast", cfg.switch_fast_fwd, cfg.switch_fast_back),
                ("switch-slow", cfg.switch_slow_fwd, cfg.switch_slow_back),
            ] {
                let ev = evaluate_tasks(&tasks, |t| switch_controller(t, fwd, back, &exec))?;
                let id = format!("{name}:{}", c.name);
                print_eval(&id, &ev);
                save_eval(common.out.as_deref(), &id, &format!("switch {fwd}/{back} deg/s"), vec![], &ev, seed, cfg.verbose_trajectories)?;
            }
        }
        Command::Gssp {
            common,
            model,
            container,
            mode,
            trials,
            include_demos,
        } => {
            let cfg = common.suite_config()?;
            let exec = cfg.exec_config();
            let model = ModelCheckpoint::load(&model)?;
            let c = catalog.find(&container)?.clone();
            let (demos, train_set, _) = demo_dataset(&cfg)?;
            let seed = derive_seed(cfg.seed, &format!("gssp-{}:{}", mode.as_str(), c.name), 0);
            let outcome = match mode {
                GsspMode::Gradual => {
                    if include_demos {
                        return Err(Error::Usage("--include-demos applies to batch modes".into()));
                    }
                    let gcfg = GsspConfig {
                        n_practices: trials.unwrap_or(cfg.gradual_n),
                        max_rounds: cfg.gradual_max_rounds,
                        fine_tune_epochs: cfg.fine_tune_epochs,
                        fine_tune_lr: cfg.fine_tune_lr,
                        reuse_tasks: cfg.gradual_reuse_tasks,
                        ..GsspConfig::gradual(cfg.err_threshold_factor * demos.stats.mu_e_ml, seed)
                    };
                    gssp_gradual(&model, &c, &gcfg, &exec)?
                }
                GsspMode::Batch | GsspMode::BatchCombined => {
                    let combined = include_demos || mode == GsspMode::BatchCombined;
                    let default_n = match c.name.as_str() {
                        "blue_bottle" => cfg.batch_n_blue,
                        _ => cfg.batch_n_wine,
                    };
                    let mut gcfg = GsspConfig::batch(trials.unwrap_or(default_n), combined, seed);
                    gcfg.fine_tune_epochs = cfg.fine_tune_epochs;
                    gcfg.fine_tune_lr = cfg.fine_tune_lr;
                    let pool: &[TrialRecord] = if combined { &train_set } else { &[] };
                    gssp_batch(&model, &c, &gcfg, &exec, pool)?
                }
            };
            for r in &outcome.report.rounds {
                println!("round {:>2}: {:>3} practices, mean error {:7.2} mL -> {}", r.round, r.n, r.mean_error_ml, r.model_label);
            }
            let eval_seed = derive_seed(cfg.seed, "eval", 0);
            for target in [&c, catalog.reference()] {
                let ev = evaluate(&outcome.model, target, cfg.eval_trials, &exec, eval_seed)?;
                print_eval(&format!("{}:{}", outcome.model.label(), target.name), &ev);
            }
            if let Some(dir) = common.out.as_deref() {
                let tag = format!("{}-{}", mode.as_str(), c.name);
                outcome.model.save(&dir.join(format!("{tag}.json")))?;
                write(&dir.join(format!("{tag}_report.json")), &outcome.report.to_json()?)?;
            }
        }
        Command::Suite { common } => {
            let cfg = common.suite_config()?;
            let out = common.out_dir()?;
            let outcome = run_experiment_suite(&cfg, Some(out), &mut |line| eprintln!("{line}"))?;
            print!("{}", outcome.summary);
        }
        Command::Export { common, report, style } => {
            let style: PlotStyle = style.parse()?;
            let report = SuiteReport::from_json(&std::fs::read_to_string(&report)?)?;
            for p in export_plot_data(&report, style, common.out_dir()?)? {
                println!("{}", p.display());
            }
        }
        Command::GradCheck { common, trials } => {
            let root = common.seed.unwrap_or(0);
            let mut worst = 0.0f64;
            for k in 0..trials as u64 {
                let r = grad_check(&GradCheckConfig::default(), derive_seed(root, "grad-check", k))?;
                println!(
                    "seed {:>20}: {} parameters, max relative error {:.3e} ({})",
                    r.seed, r.parameters_checked, r.max_relative_error, r.worst_parameter
                );
                worst = worst.max(r.max_relative_error);
            }
            let ok = worst < 1e-4;
            println!("{}: max relative error {worst:.3e} (limit 1e-4)", if ok { "PASS" } else { "FAIL" });
            if !ok {
                return Ok(ACCEPTANCE_EXIT);
            }
        }
        Command::SimOracleCheck { common, trials } => {
            let seed = common.seed.unwrap_or(0);
            let cons = conservation_check(trials, 600, pournet::sim::FlowModel::default(), seed)?;
            let geo = geometry_check(10_000)?;
            let cons_ok = cons.passed(1e-9);
            let geo_ok = geo.max_rel_dev < 0.005 && geo.upright_rel_dev < 0.001;
            println!(
                "{}: conservation over {} x {} steps, worst {:.3e} mL, receiver decreases {}",
                if cons_ok { "PASS" } else { "FAIL" },
                cons.trajectories,
                cons.steps,
                cons.max_violation_ml,
                cons.receiver_decreases
            );
            println!(
                "{}: geometry on {} grid points, worst {:.3e} relative (upright {:.3e})",
                if geo_ok { "PASS" } else { "FAIL" },
                geo.points,
                geo.max_rel_dev,
                geo.upright_rel_dev
            );
            if !(cons_ok && geo_ok) {
                return Ok(ACCEPTANCE_EXIT);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
