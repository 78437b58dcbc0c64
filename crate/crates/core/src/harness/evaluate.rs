use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::control::{run_closed_loop, run_pour, ExecConfig, PourController, PourResult, PourTask};
use crate::error::{Error, Result};
use crate::gssp::generate_practice_tasks;
use crate::net::ModelCheckpoint;
use crate::seed::rng_for;
use crate::signal::{demonstrate, DemonstratorProfile};
use crate::trial::{ErrorStats, SourceTag, TrialRecord};

/// Redraws of a demonstration task before giving up on a slot.
const DEMO_TASK_RETRIES: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub container: String,
    pub stats: ErrorStats,
    pub durations_s: Vec<f64>,
    #[serde(skip)]
    pub results: Vec<PourResult>,
}

impl EvalOutcome {
    pub fn from_results(container: &str, results: Vec<PourResult>) -> Self {
        Self {
            container: container.to_string(),
            stats: ErrorStats::from_pairs(results.iter().map(|r| (r.requested_ml, r.actual_ml))),
            durations_s: results.iter().map(|r| r.duration_s).collect(),
            results,
        }
    }
}

/// Evaluation tasks for `container`, drawn from their own seed namespace.
pub fn evaluation_tasks(container: &ContainerSpec, n: usize, seed: u64) -> Result<Vec<PourTask>> {
    generate_practice_tasks(n, container, &mut rng_for(seed, &format!("eval:{}", container.name), 0))
}

pub fn evaluate_tasks(
    tasks: &[PourTask],
    mut run: impl FnMut(&PourTask) -> Result<PourResult>,
) -> Result<EvalOutcome> {
    let name = tasks
        .first()
        .map(|t| t.container.name.clone())
        .ok_or_else(|| Error::InvalidArgument("no evaluation tasks".into()))?;
    let results = tasks.iter().map(&mut run).collect::<Result<Vec<_>>>()?;
    Ok(EvalOutcome::from_results(&name, results))
}

/// `n` closed-loop pours of the trained model with random requirements.
pub fn evaluate(
    model: &ModelCheckpoint,
    container: &ContainerSpec,
    n: usize,
    exec: &ExecConfig,
    seed: u64,
) -> Result<EvalOutcome> {
    let tasks = evaluation_tasks(container, n, seed)?;
    evaluate_tasks(&tasks, |t| run_closed_loop(model, t, exec))
}

/// Same protocol with an arbitrary controller.
pub fn evaluate_controller<C: PourController + ?Sized>(
    controller: &mut C,
    container: &ContainerSpec,
    n: usize,
    exec: &ExecConfig,
    seed: u64,
) -> Result<EvalOutcome> {
    let tasks = evaluation_tasks(container, n, seed)?;
    evaluate_tasks(&tasks, |t| run_pour(controller, t, exec, SourceTag::RobotPractice))
}

#[derive(Clone, Debug)]
pub struct DemoSet {
    pub trials: Vec<TrialRecord>,
    /// Requested-versus-poured pairs of the demonstrator.
    pub stats: ErrorStats,
}

/// `count` demonstrations spread round-robin over `containers`.
pub fn generate_demo_set(
    containers: &[ContainerSpec],
    count: usize,
    exec: &ExecConfig,
    profile: &DemonstratorProfile,
    seed: u64,
) -> Result<DemoSet> {
    if containers.is_empty() {
        return Err(Error::InvalidArgument("no demonstration containers".into()));
    }
    let mut trials = Vec::with_capacity(count);
    let mut pairs = Vec::with_capacity(count);
    for slot in 0..count {
        let container = &containers[slot % containers.len()];
        let mut rng = rng_for(seed, "demo", slot as u64);
        let mut attempt = 0;
        let result = loop {
            let task = generate_practice_tasks(1, container, &mut rng)?.remove(0);
            match demonstrate(&task, exec, profile, &mut rng) {
                Ok(r) => break r,
                Err(Error::DemoFailure(_)) if attempt + 1 < DEMO_TASK_RETRIES => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        pairs.push((result.requested_ml, result.actual_ml));
        trials.push(result.trial.expect("demonstrations are recorded"));
    }
    Ok(DemoSet {
        trials,
        stats: ErrorStats::from_pairs(pairs),
    })
}
