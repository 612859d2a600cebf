//! Command-line experiment runner: training, evaluation, rendering and
//! environment-id tooling.

mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_id::{parse_env_id, EnvFilter, EnvId, EnvIdError, EnvRegistry};
use crate::learn::{
    config_hash, evaluate, initial_snapshot, load_checkpoint, run_actor_learner, save_checkpoint, write_metrics,
    Budget, EvalReport, LearnError, LearnerConfig, TrainingReport,
};
use crate::pomg::{default_registry, make_env_from_spec, EnvConfig, EnvError, EnvSpec, MultiAgentEnv};

pub use render::{render_episode, write_ppm, Canvas, RenderPolicy, RenderSummary, Trajectory, TrajectoryTick};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable read when no seed is given.
pub const SEED_ENV_VAR: &str = "MACAD_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: exit status 2.
    #[error("{message}")]
    Config { kind: String, message: String },
    /// Failure while running: exit status 3.
    #[error("{message}")]
    Runtime { kind: String, message: String },
}

impl CliError {
    pub fn config(kind: &str, message: impl Into<String>) -> Self {
        Self::Config { kind: kind.to_string(), message: message.into() }
    }

    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        Self::Runtime { kind: kind.to_string(), message: message.into() }
    }

    pub fn kind(&self) -> &str {
        match self {
            Self::Config { kind, .. } | Self::Runtime { kind, .. } => kind,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => EXIT_CONFIG,
            Self::Runtime { .. } => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::runtime("IoError", format!("{}: {e}", path.display()))
    }
}

impl From<EnvIdError> for CliError {
    fn from(e: EnvIdError) -> Self {
        Self::config(e.kind(), e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::BadSpec(_) | EnvError::NoPath(_) | EnvError::EnvId(_) | EnvError::World(_) => {
                Self::config(e.kind(), e.to_string())
            }
            _ => Self::runtime(e.kind(), e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Env(inner) => inner.into(),
            LearnError::BadConfig(_) | LearnError::ShapeMismatch(_) | LearnError::BadCheckpoint(_) => {
                Self::config(e.kind(), e.to_string())
            }
            _ => Self::runtime(e.kind(), e.to_string()),
        }
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: String,
    pub learner: LearnerConfig,
    pub seed: u64,
    pub budget: Budget,
    pub out_dir: PathBuf,
    /// Also render one greedy episode of the final policy.
    pub render: bool,
    /// Replaces the registered environment config when given.
    pub env_config: Option<EnvConfig>,
}

/// An environment resolved against a registry, ready to instantiate.
#[derive(Debug, Clone)]
pub struct ResolvedEnv {
    pub id: EnvId,
    pub name: String,
    pub spec: EnvSpec,
}

impl ResolvedEnv {
    pub fn resolve(registry: &EnvRegistry, name: &str, env_config: Option<&EnvConfig>) -> Result<Self, CliError> {
        let (id, spec) = registry.resolve(name)?;
        let mut spec = spec.clone();
        if let Some(c) = env_config {
            spec.config = c.clone();
        }
        Ok(Self { name: id.canonical(), id, spec })
    }

    pub fn make(&self) -> Result<Box<dyn MultiAgentEnv>, EnvError> {
        make_env_from_spec(Some(&self.id), &self.spec)
    }
}

/// Summary written next to the metrics and checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: String,
    pub seed: u64,
    pub budget: Budget,
    pub config_hash: String,
    pub learner: LearnerConfig,
    pub agents: Vec<String>,
    pub episodes: usize,
    pub total_steps: u64,
    pub updates: u64,
    pub rounds: u64,
    pub success_rate_last_100: f64,
    pub cumulative_mean: Option<f64>,
    pub cumulative_max: Option<f64>,
    pub mean_reward_per_agent: BTreeMap<String, f64>,
    pub wall_clock_s: f64,
    pub metrics_file: String,
    pub checkpoint_file: String,
}

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "summary.json";

/// Trains, then writes `metrics.jsonl`, `checkpoint.bin` and `summary.json`
/// into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TrainingReport, CliError> {
    let registry = default_registry();
    let env = ResolvedEnv::resolve(&registry, &config.env, config.env_config.as_ref())?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let report = run_actor_learner(|| env.make(), &config.learner, config.seed, config.budget)?;

    let metrics = config.out_dir.join(METRICS_FILE);
    write_metrics(&report, &metrics).map_err(|e| CliError::io(&metrics, e))?;
    let hash = config_hash(&env.name, &config.learner);
    let ckpt = config.out_dir.join(CHECKPOINT_FILE);
    let params = report.final_params.as_ref().expect("training returns parameters");
    save_checkpoint(&ckpt, params, &env.name, &hash).map_err(|e| CliError::io(&ckpt, e))?;

    let summary = RunSummary {
        env: env.name.clone(),
        seed: config.seed,
        budget: config.budget,
        config_hash: hash,
        learner: config.learner.clone(),
        agents: report.agents.iter().map(|a| a.0.clone()).collect(),
        episodes: report.episodes.len(),
        total_steps: report.total_steps,
        updates: report.updates,
        rounds: report.rounds,
        success_rate_last_100: report.final_success_rate(100),
        cumulative_mean: report.cumulative_mean.last().copied(),
        cumulative_max: report.cumulative_max.last().copied(),
        mean_reward_per_agent: report
            .agent_rewards
            .iter()
            .map(|(a, r)| (a.0.clone(), if r.is_empty() { 0.0 } else { r.iter().sum::<f64>() / r.len() as f64 }))
            .collect(),
        wall_clock_s: report.wall_clock_s,
        metrics_file: METRICS_FILE.into(),
        checkpoint_file: CHECKPOINT_FILE.into(),
    };
    let path = config.out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;

    if config.render {
        render_episode(&env, &RenderPolicy::Greedy(params.clone()), config.seed, &config.out_dir.join("render"), None)?;
    }
    Ok(report)
}

/// Greedy evaluation of a checkpoint file.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    env_name: Option<&str>,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, CliError> {
    let (header, params) = load_checkpoint(checkpoint)?;
    let registry = default_registry();
    let env = ResolvedEnv::resolve(&registry, env_name.unwrap_or(&header.env), None)?;
    let mut instance = env.make()?;
    Ok(evaluate(&params, instance.as_mut(), episodes, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoPreset {
    /// Independent Q-learning; tabular when the environment has a natural
    /// discretization, otherwise an MLP.
    IndependentQ,
    /// Centralized actor-critic over per-agent policies.
    CentralAc,
    /// One actor-critic policy shared by every agent.
    SharedPolicy,
}

impl AlgoPreset {
    pub fn config(self, tabular_env: bool) -> LearnerConfig {
        match self {
            AlgoPreset::IndependentQ if tabular_env => LearnerConfig::tabular_q(),
            AlgoPreset::IndependentQ => LearnerConfig::default(),
            AlgoPreset::CentralAc => LearnerConfig::central_ac(),
            AlgoPreset::SharedPolicy => LearnerConfig::shared_policy_ac(),
        }
    }
}

/// Optional keys of a `--config` JSON file. `learner` is laid over the
/// preset chosen by `--algo`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub env: Option<String>,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub episodes: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub render: Option<bool>,
    pub learner: Option<serde_json::Value>,
    pub env_config: Option<serde_json::Value>,
}

#[derive(Debug, Parser)]
#[command(name = "cadsim", version, about = "Multi-agent connected-driving simulator and learning harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents and write metrics, a checkpoint and a summary.
    Train {
        #[arg(long)]
        env: Option<String>,
        /// Experiment JSON file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "independent-q")]
        algo: AlgoPreset,
        /// Environment step budget.
        #[arg(long, conflicts_with = "episodes")]
        steps: Option<u64>,
        /// Episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Render one greedy episode of the final policy.
        #[arg(long)]
        render: bool,
    },
    /// Run greedy episodes from a checkpoint and print the report.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the environment recorded in the checkpoint.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one PPM image per tick plus a trajectory JSON.
    Render {
        #[arg(long)]
        env: String,
        #[arg(long, conflicts_with = "script")]
        checkpoint: Option<PathBuf>,
        /// JSON array with one `{agent: action}` object per tick.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_ticks: Option<u32>,
    },
    /// Parse an environment id and print its attributes as JSON.
    ParseId { id: String },
    /// List registered environments, optionally filtered by `key=value`.
    ListEnvs {
        #[arg(long = "filter")]
        filters: Vec<String>,
    },
}

fn seed_or_env(seed: Option<u64>, file_seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed.or(file_seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::config("BadSeed", format!("{SEED_ENV_VAR}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config("IoError", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config("ConfigParse", format!("{}: {e}", path.display())))
}

fn overlay(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                overlay(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

/// Builds the experiment for `train` from flags and an optional file.
#[allow(clippy::too_many_arguments)]
pub fn build_experiment(
    env: Option<String>,
    config: Option<&Path>,
    algo: AlgoPreset,
    steps: Option<u64>,
    episodes: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    render: bool,
) -> Result<ExperimentConfig, CliError> {
    let file: ExperimentFile = match config {
        Some(p) => read_json(p)?,
        None => ExperimentFile::default(),
    };
    let env = env
        .or(file.env)
        .ok_or_else(|| CliError::config("MissingEnv", "no environment id given (--env or \"env\" in the config)"))?;
    let registry = default_registry();
    let resolved = ResolvedEnv::resolve(&registry, &env, None)?;
    let tabular = resolved.make()?.tabular_grid().is_some();
    let mut learner = algo.config(tabular);
    if let Some(v) = file.learner {
        let mut base = serde_json::to_value(&learner).expect("config serializes");
        overlay(&mut base, v);
        learner = serde_json::from_value(base).map_err(|e| CliError::config("ConfigParse", format!("learner: {e}")))?;
    }
    learner.validate()?;
    let env_config = match file.env_config {
        Some(v) => Some(EnvConfig::from_json(&v.to_string()).map_err(|e| CliError::config("ConfigParse", e))?),
        None => None,
    };
    let budget = match (steps.or(file.steps), episodes.or(file.episodes)) {
        (Some(s), None) => Budget::Steps(s),
        (None, Some(e)) => Budget::Episodes(e),
        (None, None) => Budget::Steps(10_000),
        (Some(_), Some(_)) => return Err(CliError::config("BadBudget", "give either steps or episodes, not both")),
    };
    Ok(ExperimentConfig {
        env: resolved.name,
        learner,
        seed: seed_or_env(seed, file.seed)?,
        budget,
        out_dir: out.or(file.out_dir).unwrap_or_else(|| PathBuf::from("runs")),
        render: render || file.render.unwrap_or(false),
        env_config,
    })
}

// A closed stdout (e.g. piped into `head`) is not an error worth reporting.
fn print_line(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(v: &impl Serialize) {
    print_line(&serde_json::to_string_pretty(v).expect("serializable output"));
}

/// Executes a parsed command, printing results to stdout.
pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { env, config, algo, steps, episodes, seed, out, render } => {
            let exp = build_experiment(env, config.as_deref(), algo, steps, episodes, seed, out, render)?;
            let report = run_experiment(&exp)?;
            print_json(&serde_json::json!({
                "env": exp.env,
                "seed": exp.seed,
                "episodes": report.episodes.len(),
                "total_steps": report.total_steps,
                "success_rate_last_100": report.final_success_rate(100),
                "out_dir": exp.out_dir,
            }));
        }
        Command::Evaluate { checkpoint, env, episodes, seed, out } => {
            let report = evaluate_checkpoint(&checkpoint, env.as_deref(), episodes, seed_or_env(seed, None)?)?;
            let mut brief = serde_json::to_value(&report).expect("report serializes");
            brief.as_object_mut().expect("object").remove("records");
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
            }
            print_json(&brief);
        }
        Command::Render { env, checkpoint, script, seed, out, max_ticks } => {
            let registry = default_registry();
            let resolved = ResolvedEnv::resolve(&registry, &env, None)?;
            let policy = match (checkpoint, script) {
                (Some(c), _) => RenderPolicy::Greedy(load_checkpoint(&c)?.1),
                (None, Some(s)) => RenderPolicy::Script(read_json(&s)?),
                (None, None) => {
                    let probe = resolved.make()?;
                    RenderPolicy::Greedy(initial_snapshot(probe.as_ref(), &LearnerConfig::default(), 0)?)
                }
            };
            let summary = render_episode(&resolved, &policy, seed_or_env(seed, None)?, &out, max_ticks)?;
            print_json(&summary);
        }
        Command::ParseId { id } => {
            let parsed = parse_env_id(&id)?;
            let mut v = serde_json::to_value(&parsed).expect("id serializes");
            v.as_object_mut().expect("object").insert("canonical".into(), parsed.canonical().into());
            print_json(&v);
        }
        Command::ListEnvs { filters } => {
            let mut filter = EnvFilter::default();
            for f in &filters {
                filter.apply(f).map_err(|e| CliError::config("BadFilter", e))?;
            }
            for name in default_registry().list(&filter) {
                print_line(&name);
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
/// Errors are printed to stderr as one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let err = CliError::config("UsageError", e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return EXIT_CONFIG;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
