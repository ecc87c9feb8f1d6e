use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::LabeledMdp;
use crate::learn::{
    evaluate, hierarchical_train, q_learning_train, EvalStats, Hyperparams, LearningCurve, TrainStats,
};
use crate::product::{Monitor, PathMonitor, Product, ProductError};

use super::config::{AgentSpec, Algorithm, ExperimentConfig, MonitorKind};
use super::{write_atomic, HarnessError};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
}

/// What a single (agent, seed) run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub curve: LearningCurve,
    pub stats: TrainStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Per-run summary, stored next to the curve files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: String,
    pub seed: u64,
    pub config_hash: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub final_median: Option<f64>,
    pub episodes: usize,
    pub steps: u64,
    pub table_keys: usize,
    pub seconds: f64,
    /// True when the result was loaded from an earlier invocation.
    #[serde(skip)]
    pub resumed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub version: String,
    pub config_hash: String,
    pub agents: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    /// Agents whose pooled aggregate was written.
    pub aggregated: Vec<String>,
    pub plot: super::PlotSpec,
}

impl ExperimentSummary {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.status == RunStatus::Failed)
    }
}

/// Trains one agent with the given hyperparameters (seed already set).
pub fn train_agent(cfg: &ExperimentConfig, agent: &AgentSpec, hp: &Hyperparams) -> Result<RunOutput, String> {
    train_then_evaluate(cfg, agent, hp, None).map(|(run, _)| run)
}

/// Trains as [`train_agent`] does, then runs `n_episodes` greedy evaluation
/// episodes on a random stream not used during training.
pub fn evaluate_agent(
    cfg: &ExperimentConfig,
    agent: &AgentSpec,
    hp: &Hyperparams,
    n_episodes: usize,
) -> Result<(RunOutput, EvalStats), String> {
    if n_episodes == 0 {
        return Err("need at least one evaluation episode".into());
    }
    train_then_evaluate(cfg, agent, hp, Some(n_episodes)).map(|(run, stats)| (run, stats.expect("requested")))
}

fn q_agent<M: Monitor>(
    env: &dyn LabeledMdp,
    monitor: &M,
    agent: &AgentSpec,
    hp: &Hyperparams,
    final_eval: Option<usize>,
) -> Result<(RunOutput, Option<EvalStats>), ProductError> {
    let out = q_learning_train(env, monitor, agent.abstraction, hp)?;
    let stats = match final_eval {
        Some(n) => {
            let product = Product::new(env, monitor);
            let mut rng = hp.eval_rng(hp.eval_points().len());
            let horizon = hp.horizon.unwrap_or_else(|| env.horizon());
            let policy = &out.policy;
            Some(evaluate(
                &product,
                &env.eval_distribution(),
                &mut |ps, r| policy.act(&product, ps, r),
                n,
                horizon,
                &mut rng,
            )?)
        }
        None => None,
    };
    Ok((
        RunOutput {
            curve: out.curve,
            stats: out.stats,
        },
        stats,
    ))
}

fn train_then_evaluate(
    cfg: &ExperimentConfig,
    agent: &AgentSpec,
    hp: &Hyperparams,
    final_eval: Option<usize>,
) -> Result<(RunOutput, Option<EvalStats>), String> {
    let env = cfg.build_env().map_err(|e| e.to_string())?;
    let env = env.as_ref();
    let missing = |what: &str| format!("agent `{}` needs a {what}", agent.name);
    let result = match (agent.algorithm, agent.monitor) {
        (Algorithm::Hierarchical, _) => {
            let pdrm = cfg.pdrm.as_ref().ok_or_else(|| missing("pdrm"))?;
            let mut out = hierarchical_train(env, pdrm, hp, agent.option_k).map_err(|e| e.to_string())?;
            if out.fallback_steps > 0 {
                log::debug!("{} seed {}: {} fallback steps", agent.name, hp.seed, out.fallback_steps);
            }
            let stats = match final_eval {
                Some(n) => {
                    let product = Product::new(env, pdrm);
                    let mut rng = hp.eval_rng(hp.eval_points().len());
                    let horizon = hp.horizon.unwrap_or_else(|| env.horizon());
                    let starts = env.eval_distribution();
                    Some(
                        out.policy
                            .evaluate(&product, pdrm, &starts, n, horizon, &mut rng)
                            .map_err(|e| e.to_string())?,
                    )
                }
                None => None,
            };
            Ok((
                RunOutput {
                    curve: out.curve,
                    stats: out.stats,
                },
                stats,
            ))
        }
        (Algorithm::QLearning, MonitorKind::Pdrm) => {
            let pdrm = cfg.pdrm.as_ref().ok_or_else(|| missing("pdrm"))?;
            q_agent(env, pdrm, agent, hp, final_eval)
        }
        (Algorithm::QLearning, MonitorKind::Cra) => {
            let cra = cfg.cra.as_ref().ok_or_else(|| missing("cra"))?;
            q_agent(env, cra, agent, hp, final_eval)
        }
        (Algorithm::QLearning, MonitorKind::TranslatedCra) => {
            let pdrm = cfg.translated.as_ref().ok_or_else(|| missing("cra"))?;
            q_agent(env, pdrm, agent, hp, final_eval)
        }
        (Algorithm::QLearning, MonitorKind::PathCra) => {
            let monitor = PathMonitor::new(env.props(), agent.op_budget).map_err(|e| e.to_string())?;
            q_agent(env, &monitor, agent, hp, final_eval)
        }
    };
    result.map_err(|e: ProductError| e.to_string())
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentSummary, HarnessError> {
    run_experiment_with(cfg, opts, &train_agent)
}

struct RunPaths {
    curve: PathBuf,
    returns: PathBuf,
    summary: PathBuf,
}

fn run_paths(out: &Path, agent: &str, seed: u64) -> RunPaths {
    let dir = out.join("runs").join(agent);
    RunPaths {
        curve: dir.join(format!("seed-{seed}.csv")),
        returns: dir.join(format!("seed-{seed}.returns.csv")),
        summary: dir.join(format!("seed-{seed}.json")),
    }
}

fn read_record(path: &Path) -> Result<Option<RunRecord>, HarnessError> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| HarnessError::io(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(HarnessError::io(path, e)),
    }
}

/// Runs every (agent, seed) pair not already completed under the same config
/// hash, then pools each fully successful agent into `aggregate/<agent>.csv`.
///
/// A panic or error inside `trainer` marks only that run as failed.
pub fn run_experiment_with<F>(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    trainer: &F,
) -> Result<ExperimentSummary, HarnessError>
where
    F: Fn(&ExperimentConfig, &AgentSpec, &Hyperparams) -> Result<RunOutput, String> + Sync,
{
    let out = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;

    let jobs: Vec<(&AgentSpec, u64)> = cfg
        .agents
        .iter()
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();

    // refuse to mix results from different configs before doing any work
    let mut pending = Vec::new();
    let mut done = Vec::new();
    for &(agent, seed) in &jobs {
        let paths = run_paths(&out, &agent.name, seed);
        match read_record(&paths.summary)? {
            Some(rec) if rec.config_hash != cfg.hash => {
                return Err(HarnessError::HashMismatch {
                    path: paths.summary.display().to_string(),
                    found: rec.config_hash,
                    expected: cfg.hash.clone(),
                })
            }
            Some(rec) if rec.status == RunStatus::Ok && paths.returns.exists() => {
                done.push(RunRecord { resumed: true, ..rec })
            }
            _ => pending.push((agent, seed)),
        }
    }
    log::info!(
        "{}: {} runs to do, {} already complete",
        cfg.name,
        pending.len(),
        done.len()
    );

    let execute = || -> Vec<Result<RunRecord, HarnessError>> {
        pending
            .par_iter()
            .map(|&(agent, seed)| run_one(cfg, &out, agent, seed, trainer))
            .collect()
    };
    let results = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::io(&out, e))?
            .install(execute),
        None => execute(),
    };
    let mut runs = done;
    for r in results {
        runs.push(r?);
    }
    let order = |r: &RunRecord| {
        (
            cfg.agents.iter().position(|a| a.name == r.agent),
            cfg.seeds.iter().position(|&s| s == r.seed),
        )
    };
    runs.sort_by_key(order);

    let mut aggregated = Vec::new();
    for agent in &cfg.agents {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.agent == agent.name).collect();
        if mine.iter().any(|r| r.status != RunStatus::Ok) {
            log::warn!("{}: skipping aggregate, some seeds failed", agent.name);
            continue;
        }
        let mut curves = Vec::with_capacity(mine.len());
        for r in &mine {
            let path = run_paths(&out, &agent.name, r.seed).returns;
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
            curves.push(LearningCurve::from_returns_csv(&text).map_err(|e| HarnessError::io(&path, e))?);
        }
        let pooled = LearningCurve::pool(&curves).map_err(|e| HarnessError::io(&out, e))?;
        write_atomic(
            &out.join("aggregate").join(format!("{}.csv", agent.name)),
            pooled.to_csv().as_bytes(),
        )?;
        aggregated.push(agent.name.clone());
    }

    let summary = ExperimentSummary {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash.clone(),
        agents: cfg.agents.iter().map(|a| a.name.clone()).collect(),
        seeds: cfg.seeds.clone(),
        runs,
        aggregated,
        plot: cfg.plot.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&out.join("metadata.json"), json.as_bytes())?;
    Ok(summary)
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_string()
    }
}

fn run_one<F>(
    cfg: &ExperimentConfig,
    out: &Path,
    agent: &AgentSpec,
    seed: u64,
    trainer: &F,
) -> Result<RunRecord, HarnessError>
where
    F: Fn(&ExperimentConfig, &AgentSpec, &Hyperparams) -> Result<RunOutput, String> + Sync,
{
    let paths = run_paths(out, &agent.name, seed);
    let hp = Hyperparams {
        seed,
        ..agent.hyperparams.clone()
    };
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| trainer(cfg, agent, &hp)))
        .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(p.as_ref()))));
    let seconds = started.elapsed().as_secs_f64();
    let mut record = RunRecord {
        agent: agent.name.clone(),
        seed,
        config_hash: cfg.hash.clone(),
        status: RunStatus::Ok,
        error: None,
        final_median: None,
        episodes: 0,
        steps: 0,
        table_keys: 0,
        seconds,
        resumed: false,
    };
    match result {
        Ok(run) => {
            write_atomic(&paths.curve, run.curve.to_csv().as_bytes())?;
            write_atomic(&paths.returns, run.curve.returns_csv().as_bytes())?;
            record.final_median = run.curve.last().map(|p| p.stats.median);
            record.episodes = run.stats.episodes;
            record.steps = run.stats.steps;
            record.table_keys = run.stats.table_keys;
            log::info!(
                "{} seed {seed}: final median {:?} in {seconds:.1}s",
                agent.name,
                record.final_median
            );
        }
        Err(msg) => {
            log::error!("{} seed {seed} failed: {msg}", agent.name);
            record.status = RunStatus::Failed;
            record.error = Some(msg);
        }
    }
    // the summary goes last; its presence marks the run complete
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    write_atomic(&paths.summary, json.as_bytes())?;
    Ok(record)
}
