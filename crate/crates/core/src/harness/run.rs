//! Per-screen pipeline: generate tasks, execute each in a fresh environment,
//! analyze, aggregate and score.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::{check_screens, emit_report, score, EvaluationResult};
use super::synth::analyzed_ground_truth;
use super::HarnessError;
use crate::agent::{AgentBackend, OracleAgent, RemoteAgent, RemoteClient};
use crate::analyzer::{aggregate_reports, analyze_trace, analyze_trace_remote, AnalyzerConfig, ErrorReport};
use crate::app_model::AppDefinition;
use crate::executor::{execute_task, ExecutionTrace, ExecutorConfig, Terminal};
use crate::taskgen::{generate_tasks, DetectorConfig, GeneratedTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Oracle,
    Remote,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: Backend,
    pub detector: DetectorConfig,
    pub executor: ExecutorConfig,
    pub analyzer: AnalyzerConfig,
    pub parallelism: usize,
    pub out_dir: Option<PathBuf>,
    /// Required for the remote backend; never touched by the oracle.
    pub remote: Option<Arc<RemoteClient>>,
}

impl RunConfig {
    pub fn oracle(detector: DetectorConfig) -> Self {
        let executor = ExecutorConfig::default();
        let analyzer = AnalyzerConfig {
            exploration_budget: executor.exploration_budget() as usize,
            stop_threshold: executor.stop_threshold,
            ..AnalyzerConfig::default()
        };
        RunConfig { backend: Backend::Oracle, detector, executor, analyzer, parallelism: 1, out_dir: None, remote: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub task: GeneratedTask,
    pub trace: ExecutionTrace,
    pub reports: Vec<ErrorReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub runs: Vec<TaskRun>,
    pub reports: Vec<ErrorReport>,
    pub result: EvaluationResult,
}

fn run_task(app: &Arc<AppDefinition>, task: &GeneratedTask, config: &RunConfig) -> TaskRun {
    let exec = &config.executor;
    let mut trace = match (config.backend, &config.remote) {
        (Backend::Remote, Some(client)) => {
            let mut agent = RemoteAgent::new(client.clone());
            execute_task(app.clone(), &task.spec, &mut agent, exec)
        }
        _ => {
            let target = OracleAgent::resolve_target(app, &task.spec);
            let mut agent: Box<dyn AgentBackend> =
                Box::new(OracleAgent::new(app.clone(), target.as_deref(), exec.k, exec.max_exploration_attempts));
            execute_task(app.clone(), &task.spec, &mut agent, exec)
        }
    };
    let mut reports = match (config.backend, &config.remote) {
        (Backend::Remote, Some(client)) => match analyze_trace_remote(&trace, client) {
            Ok(a) => a.reports,
            Err(e) => {
                trace.notes.push(format!("analysis failed: {e}"));
                Vec::new()
            }
        },
        _ => analyze_trace(&trace, &config.analyzer),
    };
    for r in &mut reports {
        r.element_id = task.matched_element.clone();
    }
    TaskRun { task: task.clone(), trace, reports }
}

/// Runs every generated task of every analyzed screen and scores the
/// aggregated reports. Results do not depend on `parallelism`.
pub fn run_corpus(corpus: &[AppDefinition], config: &RunConfig) -> Result<RunOutput, HarnessError> {
    if config.backend == Backend::Remote && config.remote.is_none() {
        return Err(HarnessError::Config("remote backend selected without a configured client".into()));
    }
    let started = Instant::now();
    let apps: Vec<Arc<AppDefinition>> = corpus.iter().cloned().map(Arc::new).collect();
    let mut jobs = Vec::new();
    for app in &apps {
        for task in generate_tasks(app, &app.initial_screen, &config.detector)? {
            jobs.push((app.clone(), task));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let runs: Vec<TaskRun> = pool.install(|| jobs.par_iter().map(|(app, task)| run_task(app, task, config)).collect());

    let reports = aggregate_reports(runs.iter().flat_map(|r| r.reports.iter().cloned()).collect());
    let screens: Vec<String> = corpus.iter().map(|a| a.initial_screen.clone()).collect();
    check_screens(&reports, &screens)?;
    let mut result = score(&reports, &analyzed_ground_truth(corpus));
    result.tasks = runs.len();
    result.completed_tasks = runs.iter().filter(|r| r.trace.terminal == Terminal::Complete).count();
    result.task_success_rate = if runs.is_empty() { 0.0 } else { result.completed_tasks as f64 / runs.len() as f64 };
    result.runtime_ms = started.elapsed().as_millis() as u64;
    if config.backend == Backend::Remote {
        result.token_usage = config.remote.as_ref().map(|c| c.usage());
    }

    if let Some(dir) = &config.out_dir {
        let trace_dir = dir.join("traces");
        fs::create_dir_all(&trace_dir).map_err(|source| HarnessError::Io { path: trace_dir.clone(), source })?;
        for (i, run) in runs.iter().enumerate() {
            let path = trace_dir.join(format!("{i:04}_{}.json", run.task.screen));
            fs::write(&path, run.trace.to_json() + "\n").map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        }
        emit_report(&result, &reports, dir)?;
    }
    Ok(RunOutput { runs, reports, result })
}
