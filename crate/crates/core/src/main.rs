//! `fa11y` command line: synthesize corpora, generate and execute tasks,
//! analyze traces and run full evaluations.
//!
//! Exit codes: 0 clean, 1 accessibility errors reported, 2 tool failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fa11y::agent::{OracleAgent, RemoteAgent, RemoteClient, RemoteConfig};
use fa11y::analyzer::{aggregate_reports, analyze_trace, analyze_trace_remote, render_markdown, reports_to_json, AnalyzerConfig, ErrorReport};
use fa11y::executor::{execute_task, ExecutionTrace, ExecutorConfig};
use fa11y::harness::{load_corpus, run_corpus, synth_corpus, write_corpus, Backend, CorpusSpec, FaultPlan, RunConfig};
use fa11y::taskgen::{generate_tasks, DetectorConfig, GeneratedTask, TaskSpecification};
use fa11y::{load_app, AppDefinition};

#[derive(Parser)]
#[command(name = "fa11y", version, about = "Find interaction-only accessibility errors with a simulated screen reader")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a corpus of app definitions with injected faults.
    Synth {
        /// Fault counts: Locatability,Actionability,Label,Feedback,Navigation.
        #[arg(long, default_value = "25,12,9,11,21")]
        plan: FaultPlan,
        #[arg(long, default_value_t = 54)]
        screens: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Interactive elements per screen, as MIN,MAX.
        #[arg(long, value_parser = parse_range)]
        interactive: Option<(usize, usize)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect elements on a screen and print the generated tasks.
    Generate {
        #[arg(long)]
        app: PathBuf,
        /// Screen to analyze; defaults to the initial screen.
        #[arg(long)]
        screen: Option<String>,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute tasks against an app and write one trace per task.
    Exec {
        #[arg(long)]
        app: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the accessibility errors in recorded traces.
    Analyze {
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "heuristic")]
        analyzer: AnalyzerArg,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Run the full pipeline over a corpus and score it.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendArg,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "none")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Calibrated,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzerArg {
    Heuristic,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || a > b {
        return Err("need 0 < MIN <= MAX".into());
    }
    Ok((a, b))
}

impl NoiseArgs {
    fn detector(&self) -> DetectorConfig {
        match self.noise {
            NoiseArg::None => DetectorConfig::noiseless(self.seed),
            NoiseArg::Calibrated => DetectorConfig::calibrated(self.seed),
        }
    }
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> CliResult<AppDefinition> {
    load_app(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn remote_client() -> CliResult<Arc<RemoteClient>> {
    let config = RemoteConfig::from_env().map_err(|e| e.to_string())?;
    Ok(Arc::new(RemoteClient::new(config)))
}

/// Accepts a list of generated tasks or of bare task specifications.
fn load_tasks(path: &Path) -> CliResult<Vec<TaskSpecification>> {
    let text = read(path)?;
    if let Ok(generated) = serde_json::from_str::<Vec<GeneratedTask>>(&text) {
        return Ok(generated.into_iter().map(|g| g.spec).collect());
    }
    serde_json::from_str::<Vec<TaskSpecification>>(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn exit_for(reports: &[ErrorReport]) -> ExitCode {
    ExitCode::from(if reports.is_empty() { 0 } else { 1 })
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Synth { plan, screens, seed, interactive, out } => {
            let mut spec = CorpusSpec::new(screens, plan, seed);
            if let Some(range) = interactive {
                spec.interactive_range = range;
            }
            let apps = synth_corpus(&spec).map_err(|e| e.to_string())?;
            let manifest = write_corpus(&apps, &spec, &out).map_err(|e| e.to_string())?;
            eprintln!("wrote {} apps with {} faults to {}", manifest.apps.len(), plan.total(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { app, screen, noise, out } => {
            let app = load(&app)?;
            let screen = screen.unwrap_or_else(|| app.initial_screen.clone());
            let tasks = generate_tasks(&app, &screen, &noise.detector()).map_err(|e| e.to_string())?;
            let body = serde_json::to_string_pretty(&tasks).expect("tasks serialize") + "\n";
            match out {
                Some(path) => write(&path, &body)?,
                None => print!("{body}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Exec { app, tasks, backend, out } => {
            let app = Arc::new(load(&app)?);
            let tasks = load_tasks(&tasks)?;
            let config = ExecutorConfig::default();
            let client = matches!(backend, BackendArg::Remote).then(remote_client).transpose()?;
            let mut traces = Vec::new();
            for task in &tasks {
                let trace = match &client {
                    Some(c) => execute_task(app.clone(), task, &mut RemoteAgent::new(c.clone()), &config),
                    None => {
                        let target = OracleAgent::resolve_target(&app, task);
                        let mut agent = OracleAgent::new(app.clone(), target.as_deref(), config.k, config.max_exploration_attempts);
                        execute_task(app.clone(), task, &mut agent, &config)
                    }
                };
                traces.push(trace);
            }
            match out {
                Some(dir) => {
                    for (i, t) in traces.iter().enumerate() {
                        write(&dir.join(format!("trace_{i:04}.json")), &(t.to_json() + "\n"))?;
                    }
                    eprintln!("wrote {} traces to {}", traces.len(), dir.display());
                }
                None => {
                    let all: Vec<serde_json::Value> =
                        traces.iter().map(|t| serde_json::to_value(t).expect("trace serializes")).collect();
                    println!("{}", serde_json::to_string_pretty(&all).expect("traces serialize"));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { trace, analyzer, format } => {
            let client = matches!(analyzer, AnalyzerArg::Remote).then(remote_client).transpose()?;
            let mut reports = Vec::new();
            for path in &trace {
                let t = ExecutionTrace::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
                match &client {
                    Some(c) => reports.extend(analyze_trace_remote(&t, c).map_err(|e| e.to_string())?.reports),
                    None => reports.extend(analyze_trace(&t, &AnalyzerConfig::default())),
                }
            }
            let reports = aggregate_reports(reports);
            match format {
                FormatArg::Json => println!("{}", reports_to_json(&reports)),
                FormatArg::Markdown => print!("{}", render_markdown(&reports)),
            }
            Ok(exit_for(&reports))
        }
        Command::Evaluate { corpus, backend, noise, parallelism, out } => {
            let (_, apps) = load_corpus(&corpus).map_err(|e| e.to_string())?;
            let mut config = RunConfig::oracle(noise.detector());
            config.parallelism = parallelism;
            config.out_dir = Some(out.clone());
            if matches!(backend, BackendArg::Remote) {
                config.backend = Backend::Remote;
                config.remote = Some(remote_client()?);
            }
            let output = run_corpus(&apps, &config).map_err(|e| e.to_string())?;
            let r = &output.result;
            eprintln!(
                "tasks {} (success {:.3})  tp {} fp {} fn {}  precision {:.3} recall {:.3} f1 {:.3}  -> {}",
                r.tasks, r.task_success_rate, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1, out.display()
            );
            Ok(exit_for(&output.reports))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fa11y: {e}");
            ExitCode::from(2)
        }
    }
}
