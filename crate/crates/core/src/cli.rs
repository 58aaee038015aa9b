//! Command-line entry point: train, eval, simulate, compare, export.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{self, Controller, EvalOptions, EvalReport, Method};
use crate::learner::{self, TrainConfig, TrainLog, TrainOutput, Trainer};
use crate::net::{Container, DEFAULT_HIDDEN};
use crate::policy::{GatingMode, PolicyConfig, PoolConfig};
use crate::scenario::{ContextComponent, ContextDistribution, ScenarioFile};
use crate::sim::Trace;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "ecolane", version, about = "Eco-driving controllers for a signalized corridor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy on a scenario distribution.
    Train(TrainArgs),
    /// Evaluate one method on a scenario set and write a report.
    Eval(EvalArgs),
    /// Simulate one scenario and write its episode trace.
    Simulate(SimulateArgs),
    /// Build a benefit table from evaluation reports.
    Compare(CompareArgs),
    /// Write plot data from a trace or a training log.
    Export(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Scenario file with a `[distribution]` table, or a list of scenarios
    /// sampled uniformly.
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: u64,
    /// Resume from this checkpoint.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub ckpt_every: Option<u64>,
    /// Nominal controllers: `all` or a comma-separated subset.
    #[arg(long, default_value = "all")]
    pub pool: String,
    #[arg(long, value_enum, default_value_t = GatingArg::Hard)]
    pub gating: GatingArg,
    /// TOML file overriding PPO settings.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Simulation steps each decision is held for.
    #[arg(long, default_value_t = 1)]
    pub decision_interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GatingArg {
    Hard,
    Soft,
}

impl From<GatingArg> for GatingMode {
    fn from(g: GatingArg) -> Self {
        match g {
            GatingArg::Hard => GatingMode::Hard,
            GatingArg::Soft => GatingMode::Soft,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MethodArgs {
    /// idm_baseline, glosa_all, rrl:<nominal>, multitask_scratch or mrmel.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Pool the MRMEL checkpoint must have been trained with.
    #[arg(long)]
    pub pool: Option<String>,
    #[arg(long, value_enum, default_value_t = GatingArg::Hard)]
    pub gating: GatingArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Seeds per scenario, starting at the scenario's own seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub penetration_override: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Index of the scenario in the file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub penetration_override: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Evaluation reports; the idm_baseline report is the reference, or
    /// the first one if none is.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    /// Time-space diagram data from an episode trace.
    Timespace,
    /// Nominal usage series from a training log.
    Usage,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub kind: ExportKind,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    argv: Vec<String>,
    config: &'a T,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    formats: serde_json::Value,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Output directory that refuses to overwrite anything.
struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = dir.join(RUN_MANIFEST);
        if manifest.exists() {
            return Err(Error::OutputExists(manifest));
        }
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn reserve(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if p.exists() {
            return Err(Error::OutputExists(p));
        }
        Ok(p)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.reserve(name)?;
        let mut f = std::fs::File::create_new(&p).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => Error::OutputExists(p.clone()),
            _ => Error::io(&p, e),
        })?;
        f.write_all(bytes).map_err(|e| Error::io(&p, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish<T: Serialize>(mut self, subcommand: &'static str, config: &T, inputs: &[&Path]) -> Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputRecord {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: "ecolane",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            argv: std::env::args().collect(),
            config,
            inputs,
            outputs: self.written.clone(),
            formats: serde_json::json!({
                "scenario_schema": crate::scenario::SCENARIO_SCHEMA_VERSION,
                "report_schema": eval::REPORT_SCHEMA_VERSION,
                "checkpoint_container": crate::net::CONTAINER_VERSION,
                "policy_format": crate::policy::POLICY_FORMAT_VERSION,
            }),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        self.write(RUN_MANIFEST, text.as_bytes())
    }
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::invalid("hidden", format!("bad layer width `{w}`")))
        })
        .collect()
}

/// Training distribution from a scenario file: its `[distribution]`, or a
/// uniform mixture over its listed scenarios.
pub fn training_distribution(file: &ScenarioFile) -> Result<ContextDistribution> {
    if let Some(d) = &file.distribution {
        return Ok(d.clone());
    }
    let first = file
        .scenarios
        .first()
        .ok_or_else(|| Error::invalid("scenarios", "file has neither a distribution nor scenarios"))?;
    if file
        .scenarios
        .iter()
        .any(|s| s.horizon != first.horizon || s.dt != first.dt)
    {
        return Err(Error::invalid(
            "scenarios",
            "listed scenarios must share horizon and dt to be used as a distribution",
        ));
    }
    let d = ContextDistribution {
        horizon: first.horizon,
        dt: first.dt,
        bounds: file.bounds(),
        components: file.scenarios.iter().map(|s| ContextComponent::point(&s.context)).collect(),
    };
    d.validate()?;
    Ok(d)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let file = ScenarioFile::load(&a.scenarios)?;
    let dist = training_distribution(&file)?;
    let mut out = OutDir::create(&a.out)?;
    for name in [learner::TRAIN_LOG_FILE, learner::FINAL_CHECKPOINT] {
        out.reserve(name)?;
    }
    let mut trainer = match &a.ckpt {
        Some(path) => Trainer::resume(&Container::read(path)?, dist)?,
        None => {
            let config = match &a.train_config {
                Some(p) => TrainConfig::load(p)?,
                None => TrainConfig::default(),
            };
            let policy = PolicyConfig {
                pool: a.pool.parse()?,
                gating: a.gating.into(),
                hidden: match &a.hidden {
                    Some(h) => parse_hidden(h)?,
                    None => DEFAULT_HIDDEN.to_vec(),
                },
                decision_interval: a.decision_interval,
                ..PolicyConfig::default()
            };
            Trainer::new(policy, dist, config, a.seed, a.workers)?
        }
    };
    let output = TrainOutput {
        dir: Some(a.out.clone()),
        ckpt_every: a.ckpt_every,
    };
    learner::train(&mut trainer, a.iters, &output)?;
    out.written.push(learner::TRAIN_LOG_FILE.into());
    out.written.push(learner::FINAL_CHECKPOINT.into());
    let mut inputs = vec![a.scenarios.as_path()];
    inputs.extend(a.train_config.as_deref());
    inputs.extend(a.ckpt.as_deref());
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a TrainArgs,
        seed: u64,
        workers: usize,
        train: &'a TrainConfig,
        policy: &'a PolicyConfig,
        distribution: &'a ContextDistribution,
    }
    let resolved = Resolved {
        args: a,
        seed: trainer.seed,
        workers: trainer.workers,
        train: &trainer.config,
        policy: &trainer.policy.config,
        distribution: &trainer.distribution,
    };
    out.finish("train", &resolved, &inputs)
}

fn controller(m: &MethodArgs) -> Result<(Method, Controller, Option<String>)> {
    let method: Method = m.method.parse()?;
    let pool = m.pool.as_deref().map(str::parse::<PoolConfig>).transpose()?;
    let (c, digest) = Controller::for_method(method, m.ckpt.as_deref(), pool.as_ref(), m.gating.into())?;
    Ok((method, c, digest))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (method, ctrl, digest) = controller(&a.method)?;
    let file = ScenarioFile::load(&a.scenarios)?;
    if file.scenarios.is_empty() {
        return Err(Error::invalid("scenarios", "no scenarios to evaluate"));
    }
    let mut out = OutDir::create(&a.out)?;
    out.reserve("report.json")?;
    let opts = EvalOptions {
        seeds_per_scenario: a.seeds,
        workers: a.workers,
        penetration_override: a.penetration_override,
    };
    let report = eval::run_method(&file.scenarios, &file.bounds(), method, &ctrl, digest, &opts)?;
    out.write("report.json", report.to_json().as_bytes())?;
    let mut inputs = vec![a.scenarios.as_path()];
    inputs.extend(a.method.ckpt.as_deref());
    out.finish("eval", a, &inputs)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (_, ctrl, _) = controller(&a.method)?;
    let file = ScenarioFile::load(&a.scenarios)?;
    let mut spec = file
        .scenarios
        .get(a.index)
        .cloned()
        .ok_or_else(|| Error::invalid("index", format!("file has {} scenarios", file.scenarios.len())))?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(p) = a.penetration_override {
        spec.context.av_penetration = p;
        spec.validate()?;
    }
    let mut out = OutDir::create(&a.out)?;
    out.reserve("trace.tsv")?;
    out.reserve("metrics.json")?;
    let mut trace = Trace::default();
    let outcome = eval::run_episode(&spec, &file.bounds(), &ctrl, Some(&mut trace))?;
    out.write("trace.tsv", trace.to_text().as_bytes())?;
    let mut metrics = serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize");
    metrics.push('\n');
    out.write("metrics.json", metrics.as_bytes())?;
    let mut inputs = vec![a.scenarios.as_path()];
    inputs.extend(a.method.ckpt.as_deref());
    out.finish("simulate", a, &inputs)
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| EvalReport::read(p))
        .collect::<Result<Vec<_>>>()?;
    let base = reports
        .iter()
        .position(|r| r.method == Method::IdmBaseline)
        .unwrap_or(0);
    let others: Vec<EvalReport> = reports
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != base)
        .map(|(_, r)| r.clone())
        .collect();
    let table = eval::compare(&reports[base], &others)?;
    let mut out = OutDir::create(&a.out)?;
    out.reserve("benefits.tsv")?;
    out.reserve("benefits.json")?;
    out.write("benefits.tsv", table.to_tsv().as_bytes())?;
    let mut json = serde_json::to_string_pretty(&table).expect("table serializes");
    json.push('\n');
    out.write("benefits.json", json.as_bytes())?;
    let inputs: Vec<&Path> = a.reports.iter().map(|p| p.as_path()).collect();
    out.finish("compare", a, &inputs)
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (name, text) = match a.kind {
        ExportKind::Timespace => ("timespace.tsv", eval::export_timespace(&Trace::read(&a.input)?)),
        ExportKind::Usage => ("usage.tsv", eval::export_usage(&TrainLog::read(&a.input)?)),
    };
    let mut out = OutDir::create(&a.out)?;
    out.write(name, text.as_bytes())?;
    out.finish("export", a, &[a.input.as_path()])
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Export(a) => cmd_export(a),
    }
}

/// One-line, machine-parseable error description.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error: kind={} msg={msg}", e.kind())
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECOLANE_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("error: kind=usage msg={first}");
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
