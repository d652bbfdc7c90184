//! Command-line interface. Exit codes: 0 success, 1 runtime failure,
//! 2 invalid usage or configuration.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::client::API_KEY_ENV;
use crate::agents::{AgentDescriptor, AgentEnv, ScoreNorm, TokenBucket};
use crate::analysis::osf::import_csv;
use crate::analysis::{analyze_records, read_log_dir, AnalysisOptions, AnalysisReport, CsvTable, GroupBy};
use crate::engine::{
    group_by_session, read_log_lenient, replay, BlockKind, Candidate, Condition, EngineError, EventRecord, JsonlSink,
    LogicalClock, Session, SessionConfig,
};
use crate::rng::derive_seed;
use crate::server::{ServerConfig, ServerError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) | EngineError::PoolTooSmall { .. } => CliError::Config(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ServerError> for CliError {
    fn from(e: ServerError) -> Self {
        match e {
            ServerError::Config(m) => CliError::Config(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "refgame", version, about = "Referential-game sessions between language models and people")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run model-model sessions and write logs plus a summary.
    Simulate(SimulateArgs),
    /// Compute metrics, mixed models and tests over a log directory.
    Analyze(AnalyzeArgs),
    /// Print a trial-by-trial transcript of a log.
    Replay(ReplayArgs),
    /// Convert logs into analysis-ready tables.
    Export(ExportArgs),
    /// Host sessions with human participants.
    Serve(ServeArgs),
    /// Convert a trial-level CSV from the human study into event logs.
    ImportOsf(ImportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Language model behind a completion endpoint.
    Llm,
    /// Rule-based speaker of a perfectly compositional code.
    Compositional,
    /// Rote learner of the trained language.
    Memorizer,
    /// Uniformly random answers.
    Chance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    /// Mean log-probability per token.
    Mean,
    /// Summed log-probability.
    Sum,
}

impl From<NormArg> for ScoreNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Mean => ScoreNorm::PerToken,
            NormArg::Sum => ScoreNorm::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Hh,
    Ll,
    Hl,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Hh => Condition::Hh,
            ConditionArg::Ll => Condition::Ll,
            ConditionArg::Hl => Condition::Hl,
        }
    }
}

/// Model endpoint options shared by `simulate` and `serve`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Completion endpoint base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Use the offline heuristic client instead of an endpoint.
    #[arg(long)]
    pub mock: bool,
    #[arg(long, value_enum)]
    pub score_norm: Option<NormArg>,
    /// Per-request timeout in milliseconds.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Use the chat-completions route.
    #[arg(long)]
    pub chat: bool,
    /// Model requests per second across all sessions.
    #[arg(long)]
    pub rate_limit: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Condition label recorded in the logs.
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    #[arg(long)]
    pub pairs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Distractors per listener trial.
    #[arg(long)]
    pub distractors: Option<usize>,
    /// Agent type for both seats.
    #[arg(long, value_enum)]
    pub agent: Option<AgentKind>,
    /// Agent type for seat B, if different.
    #[arg(long, value_enum)]
    pub agent_b: Option<AgentKind>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sessions run in parallel.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved simulation settings, saved as `config.toml` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationPlan {
    pub condition: String,
    pub pairs: u32,
    pub seed: u64,
    pub rounds: u32,
    pub distractors: usize,
    pub agent: AgentKind,
    pub agent_b: Option<AgentKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub mock: bool,
    pub score_norm: NormArg,
    pub timeout_ms: u64,
    pub chat: bool,
    pub rate_limit: Option<f64>,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for SimulationPlan {
    fn default() -> Self {
        SimulationPlan {
            condition: "ll".into(),
            pairs: 1,
            seed: 0,
            rounds: 4,
            distractors: 3,
            agent: AgentKind::Llm,
            agent_b: None,
            endpoint: None,
            model: None,
            mock: false,
            score_norm: NormArg::Mean,
            timeout_ms: 60_000,
            chat: false,
            rate_limit: None,
            workers: 4,
            out: PathBuf::from("refgame-run"),
        }
    }
}

impl SimulationPlan {
    pub fn resolve(args: &SimulateArgs) -> Result<Self, CliError> {
        let mut plan = match &args.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
            None => SimulationPlan::default(),
        };
        if let Some(c) = args.condition {
            plan.condition = Condition::from(c).name().into();
        }
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = args.$field.clone() { plan.$field = v; })* };
        }
        take!(pairs, seed, rounds, distractors, agent, workers, out);
        if args.agent_b.is_some() {
            plan.agent_b = args.agent_b;
        }
        let m = &args.model;
        if m.endpoint.is_some() {
            plan.endpoint = m.endpoint.clone();
        }
        if m.model.is_some() {
            plan.model = m.model.clone();
        }
        plan.mock |= m.mock;
        plan.chat |= m.chat;
        if let Some(n) = m.score_norm {
            plan.score_norm = n;
        }
        if let Some(t) = m.timeout_ms {
            plan.timeout_ms = t;
        }
        if m.rate_limit.is_some() {
            plan.rate_limit = m.rate_limit;
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if Condition::parse(&self.condition).is_none() {
            return Err(config_err(format!("unknown condition {:?}", self.condition)));
        }
        if self.pairs == 0 {
            return Err(config_err("pairs must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers must be at least 1"));
        }
        if self.rate_limit.is_some_and(|r| r.is_nan() || r <= 0.0) {
            return Err(config_err("rate limit must be positive"));
        }
        for slot in 0..2 {
            let d = self.descriptor(slot)?;
            d.validate().map_err(|e| config_err(e.to_string()))?;
            if let AgentDescriptor::Llm { endpoint, .. } = &d {
                if !endpoint.starts_with("mock://") && std::env::var(API_KEY_ENV).map_or(true, |k| k.is_empty()) {
                    return Err(config_err(format!("{API_KEY_ENV} must be set to use {endpoint}")));
                }
            }
        }
        Ok(())
    }

    pub fn condition(&self) -> Condition {
        Condition::parse(&self.condition).unwrap_or(Condition::Ll)
    }

    /// Agent descriptor for seat 0 (A) or 1 (B).
    pub fn descriptor(&self, slot: usize) -> Result<AgentDescriptor, CliError> {
        let kind = if slot == 1 { self.agent_b.unwrap_or(self.agent) } else { self.agent };
        model_descriptor(
            kind,
            &ModelArgs {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                mock: self.mock,
                score_norm: Some(self.score_norm),
                timeout_ms: Some(self.timeout_ms),
                chat: self.chat,
                rate_limit: self.rate_limit,
            },
        )
    }

    pub fn session_id(&self, pair: u32) -> String {
        format!("{}-{}-{pair:03}", self.condition, self.seed)
    }

    pub fn session_config(&self, pair: u32) -> Result<SessionConfig, CliError> {
        let seed = derive_seed(self.seed, &format!("pair-{pair}"));
        let mut c = SessionConfig::new(self.session_id(pair), self.condition(), seed, self.descriptor(0)?, self.descriptor(1)?);
        c.rounds = self.rounds;
        c.distractor_count = self.distractors;
        c.validate()?;
        Ok(c)
    }
}

fn model_descriptor(kind: AgentKind, m: &ModelArgs) -> Result<AgentDescriptor, CliError> {
    Ok(match kind {
        AgentKind::Compositional => AgentDescriptor::compositional(),
        AgentKind::Memorizer => AgentDescriptor::memorizer(),
        AgentKind::Chance => AgentDescriptor::chance(),
        AgentKind::Llm => {
            let (endpoint, model) = if m.mock {
                ("mock://heuristic".to_string(), m.model.clone().unwrap_or_else(|| "heuristic".into()))
            } else {
                let endpoint = m.endpoint.clone().ok_or_else(|| config_err("llm agents need --endpoint or --mock"))?;
                let model = m.model.clone().ok_or_else(|| config_err("llm agents need --model"))?;
                (endpoint, model)
            };
            AgentDescriptor::Llm {
                endpoint,
                model,
                temperature: 0.0,
                score_norm: m.score_norm.map(ScoreNorm::from).unwrap_or_default(),
                timeout_ms: m.timeout_ms.unwrap_or(60_000),
                chat: m.chat,
            }
        }
    })
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Directory of `.jsonl` logs, or a run directory containing `logs/`.
    pub logs: PathBuf,
    /// Mixed-model formula, e.g. "percCom ~ topsim + (1|roundId)". Repeatable.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Grouping column for the random intercept: round or pairRound.
    #[arg(long, default_value = "round")]
    pub group: String,
    /// Output directory; defaults to `analysis` next to the logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
    /// Also write the summary table for this log.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    pub logs: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// hh pairs participants; hl pairs each participant with a model.
    #[arg(long, value_enum, default_value = "hl")]
    pub condition: ConditionArg,
    /// Partner type in hl sessions.
    #[arg(long, value_enum, default_value = "llm")]
    pub partner: AgentKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "logs")]
    pub logs: PathBuf,
    /// Directory served for other GET paths (the participant client).
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Environment variable holding the admin token for /sessions.
    #[arg(long, default_value = "REFGAME_ADMIN_TOKEN")]
    pub admin_token_env: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub rounds: u32,
    #[arg(long, default_value_t = 3)]
    pub distractors: usize,
    /// Seconds a disconnected participant may take to reconnect.
    #[arg(long, default_value_t = 60)]
    pub grace_secs: u64,
    /// Seconds a participant has for each answer.
    #[arg(long, default_value_t = 120)]
    pub answer_secs: u64,
    /// Session length cap in minutes; 0 disables it.
    #[arg(long, default_value_t = 70)]
    pub max_minutes: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ImportArgs {
    pub csv: PathBuf,
    /// Output directory; logs go to `<out>/logs`.
    #[arg(long)]
    pub out: PathBuf,
    /// Condition for rows without a condition column.
    #[arg(long, value_enum, default_value = "hh")]
    pub condition: ConditionArg,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Replay(a) => replay_cmd(&a),
        Command::Export(a) => export(&a),
        Command::Serve(a) => serve(&a),
        Command::ImportOsf(a) => import_osf(&a),
    }
}

fn simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let plan = SimulationPlan::resolve(args)?;
    let configs = (0..plan.pairs).map(|i| plan.session_config(i)).collect::<Result<Vec<_>, _>>()?;
    let logs = plan.out.join("logs");
    fs::create_dir_all(&logs)?;
    fs::write(
        plan.out.join("config.toml"),
        toml::to_string_pretty(&plan).map_err(|e| CliError::Runtime(e.to_string()))?,
    )?;
    let mut seeds = CsvTable { header: vec!["sessionId".into(), "seed".into()], rows: Vec::new() };
    for c in &configs {
        seeds.rows.push(vec![c.session_id.clone(), c.seed.to_string()]);
    }
    crate::analysis::write_csv(&plan.out.join("seeds.csv"), &seeds)?;

    let limiter = plan.rate_limit.map(|r| Arc::new(TokenBucket::new(r, r.max(1.0))));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let outcomes: Vec<Result<Option<String>, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|config| {
                let path = logs.join(format!("{}.jsonl", config.session_id));
                let mut env = AgentEnv { limiter: limiter.clone(), ..AgentEnv::default() };
                let mut session = Session::from_config(config.clone(), &mut env, Box::new(LogicalClock::default()))?;
                let mut sink = JsonlSink::new(BufWriter::new(File::create(&path)?));
                let outcome = session.run(&mut sink)?;
                sink.into_inner().flush()?;
                let rate = outcome.state.overall_success().map_or("n/a".to_string(), |s| format!("{s:.3}"));
                match &outcome.aborted {
                    None => eprintln!("{}: complete, communicative success {rate}", config.session_id),
                    Some(r) => eprintln!("{}: aborted ({r})", config.session_id),
                }
                Ok(outcome.aborted)
            })
            .collect()
    });
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(None) => {}
            Ok(Some(_)) => failures += 1,
            Err(e @ CliError::Config(_)) => return Err(e),
            Err(e) => {
                eprintln!("error: {e}");
                failures += 1;
            }
        }
    }
    let (records, warnings) = read_log_dir(&logs)?;
    let report = analyze_records(records, &AnalysisOptions::default());
    crate::analysis::write_csv(&plan.out.join("summary.csv"), &report.summary_table())?;
    crate::analysis::write_csv(&plan.out.join("sessions.csv"), &report.sessions_table())?;
    for w in warnings.iter().chain(&report.warnings) {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {} sessions to {}", configs.len(), plan.out.display());
    Ok(if failures > 0 { 1 } else { 0 })
}

/// Accepts a log directory or a run directory holding `logs/`.
fn log_dir(path: &Path) -> Result<PathBuf, CliError> {
    if !path.is_dir() {
        return Err(config_err(format!("{} is not a directory", path.display())));
    }
    let nested = path.join("logs");
    let has_logs = |p: &Path| crate::analysis::log_files(p).map(|f| !f.is_empty()).unwrap_or(false);
    Ok(if !has_logs(path) && nested.is_dir() { nested } else { path.to_path_buf() })
}

fn default_out(logs: &Path) -> PathBuf {
    match logs.file_name() {
        Some(n) if n == "logs" => logs.with_file_name("analysis"),
        _ => logs.join("analysis"),
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    let group = GroupBy::parse(&args.group).ok_or_else(|| config_err(format!("unknown group {:?}", args.group)))?;
    for m in &args.models {
        crate::stats::Formula::parse(m).map_err(|e| config_err(format!("{m}: {e}")))?;
    }
    let logs = log_dir(&args.logs)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&logs));
    let opts = AnalysisOptions { models: args.models.clone(), group, ..AnalysisOptions::default() };
    let (records, warnings) = read_log_dir(&logs)?;
    let mut report = analyze_records(records, &opts);
    report.warnings.splice(0..0, warnings);
    report.write_dir(&out)?;
    print_report(&report);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{} warnings; tables written to {}", report.warnings.len(), out.display());
    Ok(0)
}

fn print_report(report: &AnalysisReport) {
    println!("sessions: {}  rounds: {}", report.sessions.len(), report.rounds.len());
    for m in &report.models {
        match &m.result {
            Ok(fit) => {
                println!("{}", fit.formula);
                for (i, name) in fit.fit.names.iter().enumerate() {
                    println!(
                        "  {name:<28} {:>10.4} (se {:.4}, z {:.3}, p {:.4})",
                        fit.fit.beta[i], fit.fit.se[i], fit.fit.wald_z[i], fit.fit.p_values[i]
                    );
                }
                println!("  R2 marginal {:.4}, conditional {:.4}", fit.fit.r2m, fit.fit.r2c);
            }
            Err(e) => println!("{}: not estimable ({e})", m.formula),
        }
    }
    for t in &report.tests {
        match &t.result {
            Ok(r) => println!(
                "{} {} {} vs {}: statistic {:.4}, df {:.2}, p {:.4}",
                t.test, t.metric, t.group_a, t.group_b, r.statistic, r.df, r.p_value
            ),
            Err(e) => println!("{} {} {} vs {}: not computable ({e})", t.test, t.metric, t.group_a, t.group_b),
        }
    }
}

fn label_of(c: &Candidate) -> String {
    match c {
        Candidate::Label(l) => l.to_string(),
        Candidate::Meaning(m) => m.to_string(),
    }
}

fn mark(success: Option<bool>) -> &'static str {
    match success {
        Some(true) => "ok",
        Some(false) => "miss",
        None => "invalid",
    }
}

fn describe_turn(r: &EventRecord) -> String {
    let who = r.agent_id.as_deref().unwrap_or("?");
    let label = r.produced_label.as_ref().map_or("-".to_string(), |l| format!("'{l}'"));
    let body = match r.block_kind {
        BlockKind::Exposure => format!("saw {}", r.candidates.first().map_or("-".into(), |c| format!("'{}'", label_of(c)))),
        BlockKind::Guessing => {
            let chosen = r.choice_index.and_then(|i| r.candidates.get(i)).map_or("-".into(), |c| format!("'{}'", label_of(c)));
            format!("chose {chosen} {}", mark(r.success))
        }
        _ => label,
    };
    match &r.error {
        Some(e) => format!("{who}: {body} [{e}]"),
        None => format!("{who}: {body}"),
    }
}

/// One transcript line per trial.
fn transcript(records: &[EventRecord]) -> Vec<String> {
    let mut by_trial: BTreeMap<u32, Vec<&EventRecord>> = BTreeMap::new();
    for r in records {
        by_trial.entry(r.trial_index).or_default().push(r);
    }
    by_trial
        .into_iter()
        .map(|(i, recs)| {
            let first = recs[0];
            let round = first.round_id.map_or("-".to_string(), |r| r.to_string());
            let detail = if first.block_kind == BlockKind::Communication {
                let chosen = first
                    .choice_index
                    .and_then(|c| first.candidates.get(c))
                    .map_or("-".to_string(), label_of);
                format!(
                    "{}->{} {} chose {chosen} {}",
                    first.speaker_id.as_deref().unwrap_or("?"),
                    first.listener_id.as_deref().unwrap_or("?"),
                    first.produced_label.as_ref().map_or("-".to_string(), |l| format!("'{l}'")),
                    mark(first.success)
                )
            } else {
                recs.iter().map(|r| describe_turn(r)).collect::<Vec<_>>().join(" | ")
            };
            format!("{i:>3} {:<13} r{round} {} {detail}", first.block_kind.name(), first.target)
        })
        .collect()
}

fn replay_cmd(args: &ReplayArgs) -> Result<i32, CliError> {
    let file = File::open(&args.log).map_err(|e| config_err(format!("cannot open {}: {e}", args.log.display())))?;
    let report = read_log_lenient(BufReader::new(file))?;
    for (line, msg) in &report.warnings {
        eprintln!("warning: {}:{line}: {msg}", args.log.display());
    }
    let sessions = group_by_session(report.records.clone());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (id, recs) in &sessions {
        for line in transcript(recs) {
            writeln!(out, "{line}")?;
        }
        match replay(recs) {
            Ok(state) => eprintln!(
                "{id}: {} records, {} of {} trials, communicative success {}",
                state.records,
                state.next_trial,
                state.task_count,
                state.overall_success().map_or("n/a".to_string(), |s| format!("{s:.3}"))
            ),
            Err(e) => eprintln!("warning: {id}: {e}"),
        }
    }
    if let Some(path) = &args.summary {
        let analysis = analyze_records(report.records, &AnalysisOptions::default());
        crate::analysis::write_csv(path, &analysis.summary_table())?;
    }
    Ok(0)
}

/// Flat per-record table.
pub fn events_table(records: &[EventRecord]) -> CsvTable {
    let header = [
        "sessionId",
        "condition",
        "trialIndex",
        "blockKind",
        "roundId",
        "agentId",
        "speakerId",
        "listenerId",
        "shape",
        "colour",
        "amount",
        "producedLabel",
        "rawLabel",
        "candidates",
        "choiceIndex",
        "success",
        "latencyMs",
        "timestamp",
        "error",
    ];
    let opt = |v: Option<String>| v.unwrap_or_default();
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.session_id.clone(),
                r.condition.name().to_string(),
                r.trial_index.to_string(),
                r.block_kind.name().to_string(),
                opt(r.round_id.map(|x| x.to_string())),
                opt(r.agent_id.clone()),
                opt(r.speaker_id.clone()),
                opt(r.listener_id.clone()),
                r.target.shape().to_string(),
                r.target.colour().name().to_string(),
                r.target.amount().to_string(),
                opt(r.produced_label.as_ref().map(|l| l.to_string())),
                opt(r.raw_label.clone()),
                r.candidates.iter().map(label_of).collect::<Vec<_>>().join(";"),
                opt(r.choice_index.map(|x| x.to_string())),
                opt(r.success.map(|x| x.to_string())),
                opt(r.latency_ms.map(|x| x.to_string())),
                r.timestamp.to_string(),
                opt(r.error.clone()),
            ]
        })
        .collect();
    CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows }
}

fn export(args: &ExportArgs) -> Result<i32, CliError> {
    let logs = log_dir(&args.logs)?;
    let (mut records, warnings) = read_log_dir(&logs)?;
    records.sort_by(|a, b| (&a.session_id, a.trial_index).cmp(&(&b.session_id, b.trial_index)));
    if records.is_empty() {
        eprintln!("warning: no event records found in {}", logs.display());
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&args.out)?;
    let report = analyze_records(records.clone(), &AnalysisOptions::default());
    match args.format {
        ExportFormat::Csv => {
            crate::analysis::write_csv(&args.out.join("events.csv"), &events_table(&records))?;
            crate::analysis::write_csv(&args.out.join("summary.csv"), &report.summary_table())?;
            crate::analysis::write_csv(&args.out.join("sessions.csv"), &report.sessions_table())?;
            crate::analysis::write_csv(&args.out.join("long.csv"), &report.long_table())?;
        }
        ExportFormat::Json => {
            let to_objects = |t: &CsvTable| -> Vec<serde_json::Map<String, serde_json::Value>> {
                t.rows
                    .iter()
                    .map(|row| t.header.iter().cloned().zip(row.iter().map(|v| serde_json::Value::from(v.as_str()))).collect())
                    .collect()
            };
            let write = |name: &str, v: serde_json::Value| -> io::Result<()> {
                fs::write(args.out.join(name), serde_json::to_string_pretty(&v)? + "\n")
            };
            write("events.json", serde_json::to_value(&records).map_err(io::Error::other)?)?;
            write("summary.json", serde_json::Value::from(to_objects(&report.summary_table())))?;
            write("sessions.json", serde_json::Value::from(to_objects(&report.sessions_table())))?;
        }
    }
    eprintln!("exported {} records from {} sessions to {}", records.len(), report.sessions.len(), args.out.display());
    Ok(0)
}

fn serve(args: &ServeArgs) -> Result<i32, CliError> {
    let condition = Condition::from(args.condition);
    if condition == Condition::Ll {
        return Err(config_err("serve hosts hh or hl sessions; use simulate for ll"));
    }
    let mut cfg = ServerConfig::new(condition, &args.logs);
    if condition == Condition::Hl {
        cfg.partner = model_descriptor(args.partner, &args.model)?;
        if let AgentDescriptor::Llm { endpoint, .. } = &cfg.partner {
            if !endpoint.starts_with("mock://") && std::env::var(API_KEY_ENV).map_or(true, |k| k.is_empty()) {
                return Err(config_err(format!("{API_KEY_ENV} must be set to use {endpoint}")));
            }
        }
    }
    cfg.admin_token = std::env::var(&args.admin_token_env).ok().filter(|t| !t.is_empty());
    if cfg.admin_token.is_none() {
        log::warn!("{} is not set; /sessions is disabled", args.admin_token_env);
    }
    cfg.static_dir = args.static_dir.clone();
    cfg.seed = args.seed;
    cfg.rounds = args.rounds;
    cfg.distractors = args.distractors;
    cfg.grace = Duration::from_secs(args.grace_secs);
    cfg.human_timeout_ms = args.answer_secs * 1000;
    cfg.max_duration_ms = (args.max_minutes > 0).then_some(args.max_minutes * 60_000);
    cfg.rate_limit = args.model.rate_limit;
    cfg.validate()?;
    crate::server::serve(cfg, args.addr)?;
    Ok(0)
}

fn import_osf(args: &ImportArgs) -> Result<i32, CliError> {
    let file = File::open(&args.csv).map_err(|e| config_err(format!("cannot open {}: {e}", args.csv.display())))?;
    let imported = import_csv(BufReader::new(file), args.condition.into()).map_err(|e| match e {
        crate::analysis::osf::ImportError::MissingColumn(_) => config_err(e.to_string()),
        e => CliError::Runtime(e.to_string()),
    })?;
    let logs = args.out.join("logs");
    fs::create_dir_all(&logs)?;
    let mut total = 0;
    for (id, records) in &imported.sessions {
        let safe: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        let mut sink = JsonlSink::new(BufWriter::new(File::create(logs.join(format!("{safe}.jsonl")))?));
        for r in records {
            crate::engine::EventSink::append(&mut sink, r)?;
        }
        total += records.len();
    }
    for w in &imported.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "imported {total} records in {} sessions to {} ({} warnings)",
        imported.sessions.len(),
        logs.display(),
        imported.warnings.len()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(main_with_args(["refgame", "export", ".", "--format", "xml", "--out", "x"]), 2);
        assert_eq!(main_with_args(["refgame", "frobnicate"]), 2);
        assert_eq!(main_with_args(["refgame", "--help"]), 0);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "pairs = 5\nseed = 9\nagent = \"memorizer\"\nrounds = 2\n").unwrap();
        let args = SimulateArgs {
            config: Some(path),
            condition: None,
            pairs: Some(2),
            seed: None,
            rounds: None,
            distractors: None,
            agent: None,
            agent_b: Some(AgentKind::Compositional),
            model: ModelArgs::default(),
            workers: None,
            out: None,
        };
        let plan = SimulationPlan::resolve(&args).unwrap();
        assert_eq!((plan.pairs, plan.seed, plan.rounds), (2, 9, 2));
        assert_eq!(plan.descriptor(0).unwrap(), AgentDescriptor::memorizer());
        assert_eq!(plan.descriptor(1).unwrap(), AgentDescriptor::compositional());
        let back: SimulationPlan = toml::from_str(&toml::to_string_pretty(&plan).unwrap()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn llm_without_endpoint_is_config_error() {
        let plan = SimulationPlan { agent: AgentKind::Llm, ..SimulationPlan::default() };
        assert!(matches!(plan.validate(), Err(CliError::Config(_))));
        let mock = SimulationPlan { mock: true, ..SimulationPlan::default() };
        assert!(mock.validate().is_ok());
    }
}
