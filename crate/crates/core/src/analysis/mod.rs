//! Log analysis: per-round and per-agent metric tables, mixed models and
//! hypothesis tests over a directory of session logs.

pub mod osf;
mod tables;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{group_by_session, read_log_lenient, replay, Condition, EventRecord, SessionState, Slot};
use crate::language::Meaning;
use crate::metrics::{Corpus, EntropyConfig, Metric, MetricReport};
use crate::stats::{
    paired_ttest, pearson_test, welch_ttest, CancelToken, Column, DataFrame, Formula, LmmOptions, ModelFit,
    StatsError, TestResult,
};

pub use tables::{write_csv, CsvTable};

/// Models fitted when none are requested.
pub const DEFAULT_MODELS: [&str; 2] = ["percCom ~ topsim + (1|roundId)", "percCom ~ ratioUniLabels + (1|roundId)"];
/// Added when more than one condition is present.
pub const CONDITION_MODEL: &str = "percCom ~ topsim*condition + (1|roundId)";

/// Which column identifies the random-intercept groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// Round number shared across pairs.
    #[default]
    Round,
    /// One group per pair and round.
    PairRound,
}

impl GroupBy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "round" | "roundId" => Some(GroupBy::Round),
            "pairRound" | "pair-round" => Some(GroupBy::PairRound),
            _ => None,
        }
    }

    fn column(self) -> &'static str {
        match self {
            GroupBy::Round => "roundId",
            GroupBy::PairRound => "pairRound",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    /// Formulas to fit; empty means the defaults.
    pub models: Vec<String>,
    pub group: GroupBy,
    pub entropy: EntropyConfig,
    pub cancel: Option<CancelToken>,
}

/// Scope of an agent-level metric row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Round,
    Testing,
}

/// Metrics of one agent (or the pair average) in one scope.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentRow {
    pub session_id: String,
    pub condition: Condition,
    pub scope: Scope,
    pub round_id: Option<u32>,
    /// `A`, `B` or `pair`.
    pub agent_id: String,
    pub report: MetricReport,
}

/// Pair-level metrics for one communication round, the unit of the models.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundRow {
    pub session_id: String,
    pub condition: Condition,
    pub round_id: u32,
    pub trials: u32,
    pub valid: u32,
    pub report: MetricReport,
    /// TopSim of the testing block, averaged over both agents.
    pub topsim_test: Metric,
}

impl RoundRow {
    pub fn pair_round(&self) -> String {
        format!("{}:{}", self.session_id, self.round_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSummary {
    pub session_id: String,
    pub condition: Condition,
    pub complete: bool,
    pub records: usize,
    pub errors: u32,
    pub guessing_a: Option<f64>,
    pub guessing_b: Option<f64>,
    /// Share of labelling productions equal to the initial label.
    pub labelling_exact_a: Option<f64>,
    pub labelling_exact_b: Option<f64>,
    pub perc_com: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRow {
    pub test: String,
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub result: Result<TestResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub formula: String,
    pub result: Result<ModelFit, StatsError>,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub sessions: Vec<SessionSummary>,
    pub rounds: Vec<RoundRow>,
    pub agents: Vec<AgentRow>,
    pub models: Vec<ModelRow>,
    pub tests: Vec<TestRow>,
    pub warnings: Vec<String>,
}

fn corpus(pairs: &[(Meaning, crate::language::Label)]) -> Corpus {
    Corpus::new(pairs.to_vec())
}

/// Metric rows of one session.
struct SessionAnalysis {
    summary: SessionSummary,
    rounds: Vec<RoundRow>,
    agents: Vec<AgentRow>,
}

fn exact_share(state: &SessionState, slot: Slot) -> Option<f64> {
    let prods = &state.labelling[slot.index()];
    if prods.is_empty() {
        return None;
    }
    let hits = prods.iter().filter(|(m, l)| state.initial_language.label_of(m) == Some(l)).count();
    Some(hits as f64 / prods.len() as f64)
}

fn analyze_session(state: &SessionState, cfg: &EntropyConfig) -> Option<SessionAnalysis> {
    let condition = state.condition?;
    // training meanings come from exposure; fall back to everything used in communication
    let train: BTreeSet<Meaning> = if state.initial_language.is_empty() {
        state.productions.values().flat_map(|p| p.iter().flatten().map(|(m, _)| *m)).collect()
    } else {
        state.initial_language.meanings().collect()
    };
    let novel: [Corpus; 2] =
        Slot::BOTH.map(|s| corpus(&state.testing[s.index()]).filter_meanings(|m| !train.contains(m)));
    let mut agents = Vec::new();
    let row = |scope, round_id, agent_id: &str, report| AgentRow {
        session_id: state.session_id.clone(),
        condition,
        scope,
        round_id,
        agent_id: agent_id.to_string(),
        report,
    };

    let testing: [MetricReport; 2] = Slot::BOTH.map(|s| {
        let full = corpus(&state.testing[s.index()]);
        let known = full.filter_meanings(|m| train.contains(m));
        let mut r = MetricReport::compute(&full, None, None, cfg);
        let g = MetricReport::compute(&known, Some(&novel[s.index()]), None, cfg);
        r.gen_score = g.gen_score;
        r
    });
    let testing_pair = MetricReport::average(&testing[0], &testing[1]);
    for s in Slot::BOTH {
        agents.push(row(Scope::Testing, None, s.id(), testing[s.index()]));
    }
    agents.push(row(Scope::Testing, None, "pair", testing_pair));

    let mut rounds = Vec::new();
    for (&round, tally) in &state.rounds {
        let prods = state.productions.get(&round);
        let perc = tally.success_rate();
        let per_agent: [MetricReport; 2] = Slot::BOTH.map(|s| {
            let c = prods.map(|p| corpus(&p[s.index()])).unwrap_or_else(|| Corpus::new(Vec::new()));
            MetricReport::compute(&c, Some(&novel[s.index()]), perc, cfg)
        });
        let pair = MetricReport::average(&per_agent[0], &per_agent[1]);
        for s in Slot::BOTH {
            agents.push(row(Scope::Round, Some(round), s.id(), per_agent[s.index()]));
        }
        agents.push(row(Scope::Round, Some(round), "pair", pair));
        rounds.push(RoundRow {
            session_id: state.session_id.clone(),
            condition,
            round_id: round,
            trials: tally.trials,
            valid: tally.valid,
            report: pair,
            topsim_test: testing_pair.top_sim,
        });
    }
    let summary = SessionSummary {
        session_id: state.session_id.clone(),
        condition,
        complete: !state.incomplete,
        records: state.records,
        errors: state.errors,
        guessing_a: state.guessing_accuracy(Slot::A),
        guessing_b: state.guessing_accuracy(Slot::B),
        labelling_exact_a: exact_share(state, Slot::A),
        labelling_exact_b: exact_share(state, Slot::B),
        perc_com: state.overall_success(),
    };
    Some(SessionAnalysis { summary, rounds, agents })
}

impl AnalysisReport {
    /// Round rows as a data frame for model fitting.
    pub fn frame(&self) -> DataFrame {
        let mut df = DataFrame::new();
        let rows = &self.rounds;
        let num = |f: &dyn Fn(&RoundRow) -> Option<f64>| Column::Numeric(rows.iter().map(f).collect());
        df.insert("roundId", num(&|r| Some(f64::from(r.round_id)))).expect("equal lengths");
        df.insert("pairRound", Column::Factor(rows.iter().map(|r| Some(r.pair_round())).collect()))
            .expect("equal lengths");
        df.insert("sessionId", Column::Factor(rows.iter().map(|r| Some(r.session_id.clone())).collect()))
            .expect("equal lengths");
        df.insert("condition", Column::Factor(rows.iter().map(|r| Some(r.condition.name().to_string())).collect()))
            .expect("equal lengths");
        for name in crate::metrics::METRIC_NAMES {
            df.insert(name, num(&|r| r.report.get(name).and_then(|m| m.get()))).expect("equal lengths");
        }
        df.insert("topsimTest", num(&|r| r.topsim_test.get())).expect("equal lengths");
        df.insert("topsimRound", num(&|r| r.report.top_sim.get())).expect("equal lengths");
        df
    }

    fn conditions(&self) -> Vec<Condition> {
        let set: BTreeSet<Condition> = self.sessions.iter().map(|s| s.condition).collect();
        set.into_iter().collect()
    }

    fn fit_models(&mut self, opts: &AnalysisOptions) {
        let mut formulas: Vec<String> = opts.models.clone();
        if formulas.is_empty() {
            formulas = DEFAULT_MODELS.iter().map(|s| s.to_string()).collect();
            if self.conditions().len() > 1 {
                formulas.push(CONDITION_MODEL.to_string());
            }
        }
        let df = self.frame();
        let lmm = LmmOptions { cancel: opts.cancel.clone(), ..Default::default() };
        for text in formulas {
            let result = Formula::parse(&text).and_then(|mut f| {
                if opts.group != GroupBy::Round || f.group == "roundId" {
                    f.group = opts.group.column().to_string();
                }
                f.fit(&df, &lmm)
            });
            if let Err(e) = &result {
                self.warnings.push(format!("model {text:?}: {e}"));
            }
            self.models.push(ModelRow { formula: text, result });
        }
    }

    fn run_tests(&mut self) {
        let conditions = self.conditions();
        let mut rows = Vec::new();
        // first vs last round success within each condition, paired by session
        for &c in &conditions {
            let by_session: BTreeMap<&str, BTreeMap<u32, Option<f64>>> =
                self.rounds.iter().filter(|r| r.condition == c).fold(BTreeMap::new(), |mut acc, r| {
                    acc.entry(r.session_id.as_str()).or_default().insert(r.round_id, r.report.perc_com.get());
                    acc
                });
            let Some(last) = by_session.values().filter_map(|m| m.keys().max().copied()).max() else { continue };
            if last < 2 {
                continue;
            }
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for rounds in by_session.values() {
                if let (Some(Some(x)), Some(Some(y))) = (rounds.get(&1), rounds.get(&last)) {
                    a.push(*x);
                    b.push(*y);
                }
            }
            rows.push(TestRow {
                test: "paired".into(),
                metric: "percCom".into(),
                group_a: format!("{}:round1", c.name()),
                group_b: format!("{}:round{last}", c.name()),
                n_a: a.len(),
                n_b: b.len(),
                result: paired_ttest(&a, &b),
            });
        }
        // testing-block metrics between conditions
        let testing_pairs: Vec<&AgentRow> =
            self.agents.iter().filter(|r| r.scope == Scope::Testing && r.agent_id == "pair").collect();
        for (i, &ca) in conditions.iter().enumerate() {
            for &cb in &conditions[i + 1..] {
                for name in crate::metrics::METRIC_NAMES.iter().filter(|n| **n != "percCom") {
                    let values = |c: Condition| -> Vec<f64> {
                        testing_pairs
                            .iter()
                            .filter(|r| r.condition == c)
                            .filter_map(|r| r.report.get(name).and_then(|m| m.get()))
                            .collect()
                    };
                    let (a, b) = (values(ca), values(cb));
                    rows.push(TestRow {
                        test: "welch".into(),
                        metric: name.to_string(),
                        group_a: ca.name().into(),
                        group_b: cb.name().into(),
                        n_a: a.len(),
                        n_b: b.len(),
                        result: welch_ttest(&a, &b),
                    });
                }
            }
        }
        // TopSim against GenScore over pair-rounds
        for &c in &conditions {
            let (x, y): (Vec<f64>, Vec<f64>) = self
                .rounds
                .iter()
                .filter(|r| r.condition == c)
                .filter_map(|r| Some((r.report.top_sim.get()?, r.report.gen_score.get()?)))
                .unzip();
            rows.push(TestRow {
                test: "pearson".into(),
                metric: "topsim~genScore".into(),
                group_a: c.name().into(),
                group_b: c.name().into(),
                n_a: x.len(),
                n_b: y.len(),
                result: pearson_test(&x, &y),
            });
        }
        self.tests = rows;
    }
}

/// Analyses records from any number of sessions.
pub fn analyze_records(records: Vec<EventRecord>, opts: &AnalysisOptions) -> AnalysisReport {
    let mut report = AnalysisReport::default();
    let sessions = group_by_session(records);
    let results: Vec<Result<Option<SessionAnalysis>, String>> = sessions
        .par_iter()
        .map(|(id, recs)| match replay(recs) {
            Ok(state) => Ok(analyze_session(&state, &opts.entropy)),
            Err(e) => Err(format!("session {id}: {e}")),
        })
        .collect();
    for r in results {
        match r {
            Ok(Some(a)) => {
                if !a.summary.complete {
                    report.warnings.push(format!("session {} is incomplete", a.summary.session_id));
                }
                report.sessions.push(a.summary);
                report.rounds.extend(a.rounds);
                report.agents.extend(a.agents);
            }
            Ok(None) => {}
            Err(w) => report.warnings.push(w),
        }
    }
    report.fit_models(opts);
    report.run_tests();
    report
}

/// JSONL log files directly inside `dir`, sorted by name.
pub fn log_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every log in `dir` leniently; malformed lines become warnings.
pub fn read_log_dir(dir: &Path) -> io::Result<(Vec<EventRecord>, Vec<String>)> {
    let files = log_files(dir)?;
    let reports = files
        .par_iter()
        .map(|p| read_log_lenient(BufReader::new(File::open(p)?)).map(|r| (p, r)))
        .collect::<io::Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (path, r) in reports {
        records.extend(r.records);
        for (line, msg) in r.warnings {
            warnings.push(format!("{}:{line}: {msg}", path.display()));
        }
    }
    Ok((records, warnings))
}

pub fn analyze_dir(dir: &Path, opts: &AnalysisOptions) -> io::Result<AnalysisReport> {
    let (records, warnings) = read_log_dir(dir)?;
    let mut report = analyze_records(records, opts);
    report.warnings.splice(0..0, warnings);
    Ok(report)
}
