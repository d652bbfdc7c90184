use std::io;
use std::path::Path;

use serde_json::json;

use super::{AgentRow, AnalysisReport, RoundRow};
use crate::metrics::{Metric, MetricReport, METRIC_NAMES};

/// An in-memory CSV table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

pub fn write_csv(path: &Path, table: &CsvTable) -> io::Result<()> {
    std::fs::write(path, table.to_csv())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn metric_header() -> Vec<String> {
    METRIC_NAMES.iter().flat_map(|n| [n.to_string(), format!("{n}Defined")]).collect()
}

fn metric_cells(r: &MetricReport) -> Vec<String> {
    r.iter().flat_map(|(_, m): (_, Metric)| [num(m.get()), flag(m.defined)]).collect()
}

impl AnalysisReport {
    /// One row per session and round with pair-averaged metrics.
    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["sessionId", "condition", "roundId", "pairRound", "trials", "valid"]);
        t.header.extend(metric_header());
        t.header.extend(["topsimTest", "topsimTestDefined", "topsimRound", "topsimRoundDefined"].map(String::from));
        for r in &self.rounds {
            let RoundRow { session_id, condition, round_id, trials, valid, report, topsim_test } = r;
            let mut row = vec![
                session_id.clone(),
                condition.name().to_string(),
                round_id.to_string(),
                r.pair_round(),
                trials.to_string(),
                valid.to_string(),
            ];
            row.extend(metric_cells(report));
            row.extend([num(topsim_test.get()), flag(topsim_test.defined)]);
            row.extend([num(report.top_sim.get()), flag(report.top_sim.defined)]);
            t.rows.push(row);
        }
        t
    }

    pub fn sessions_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "sessionId",
            "condition",
            "complete",
            "records",
            "errors",
            "guessingA",
            "guessingB",
            "labellingExactA",
            "labellingExactB",
            "percCom",
        ]);
        for s in &self.sessions {
            t.rows.push(vec![
                s.session_id.clone(),
                s.condition.name().to_string(),
                flag(s.complete),
                s.records.to_string(),
                s.errors.to_string(),
                num(s.guessing_a),
                num(s.guessing_b),
                num(s.labelling_exact_a),
                num(s.labelling_exact_b),
                num(s.perc_com),
            ]);
        }
        t
    }

    /// Per-agent and pair metrics for every round and the testing block.
    pub fn metrics_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["sessionId", "condition", "scope", "roundId", "agentId"]);
        t.header.extend(metric_header());
        for a in &self.agents {
            let AgentRow { session_id, condition, scope, round_id, agent_id, report } = a;
            let mut row = vec![
                session_id.clone(),
                condition.name().to_string(),
                format!("{scope:?}").to_lowercase(),
                round_id.map(|r| r.to_string()).unwrap_or_default(),
                agent_id.clone(),
            ];
            row.extend(metric_cells(report));
            t.rows.push(row);
        }
        t
    }

    /// Long format: one row per metric value, for plotting.
    pub fn long_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["sessionId", "condition", "scope", "roundId", "agentId", "metric", "value", "defined"]);
        for a in &self.agents {
            for (name, m) in a.report.iter() {
                t.rows.push(vec![
                    a.session_id.clone(),
                    a.condition.name().to_string(),
                    format!("{:?}", a.scope).to_lowercase(),
                    a.round_id.map(|r| r.to_string()).unwrap_or_default(),
                    a.agent_id.clone(),
                    name.to_string(),
                    num(m.get()),
                    flag(m.defined),
                ]);
            }
        }
        t
    }

    pub fn models_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "formula", "term", "estimate", "se", "z", "p", "sigmaB2", "sigmaE2", "r2m", "r2c", "logRestrictedLik",
            "nObs", "nGroups", "dropped", "error",
        ]);
        for m in &self.models {
            match &m.result {
                Ok(fit) => {
                    let f = &fit.fit;
                    for i in 0..f.names.len() {
                        t.rows.push(vec![
                            m.formula.clone(),
                            f.names[i].clone(),
                            f.beta[i].to_string(),
                            f.se[i].to_string(),
                            f.wald_z[i].to_string(),
                            f.p_values[i].to_string(),
                            f.sigma_b2.to_string(),
                            f.sigma_e2.to_string(),
                            f.r2m.to_string(),
                            f.r2c.to_string(),
                            f.log_restricted_lik.to_string(),
                            f.n_obs.to_string(),
                            f.n_groups.to_string(),
                            fit.dropped.to_string(),
                            String::new(),
                        ]);
                    }
                }
                Err(e) => {
                    let mut row = vec![m.formula.clone()];
                    row.extend(std::iter::repeat_n(String::new(), 13));
                    row.push(e.to_string());
                    t.rows.push(row);
                }
            }
        }
        t
    }

    pub fn tests_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "test", "metric", "groupA", "groupB", "nA", "nB", "statistic", "df", "p", "effectSize", "meanA", "meanB",
            "sdA", "sdB", "error",
        ]);
        for r in &self.tests {
            let mut row =
                vec![r.test.clone(), r.metric.clone(), r.group_a.clone(), r.group_b.clone(), r.n_a.to_string(), r.n_b.to_string()];
            match &r.result {
                Ok(x) => {
                    row.extend([
                        x.statistic.to_string(),
                        x.df.to_string(),
                        x.p_value.to_string(),
                        num(x.effect_size),
                        x.mean_a.to_string(),
                        x.mean_b.to_string(),
                        x.sd_a.to_string(),
                        x.sd_b.to_string(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.push(e.to_string());
                }
            }
            t.rows.push(row);
        }
        t
    }

    /// Writes every table plus `report.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("summary.csv"), &self.summary_table())?;
        write_csv(&dir.join("sessions.csv"), &self.sessions_table())?;
        write_csv(&dir.join("metrics.csv"), &self.metrics_table())?;
        write_csv(&dir.join("long.csv"), &self.long_table())?;
        write_csv(&dir.join("models.csv"), &self.models_table())?;
        write_csv(&dir.join("tests.csv"), &self.tests_table())?;
        let meta = json!({
            "sessions": self.sessions.len(),
            "rounds": self.rounds.len(),
            "models": self.models.len(),
            "warningCount": self.warnings.len(),
            "warnings": self.warnings,
        });
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&meta)? + "\n")
    }
}
