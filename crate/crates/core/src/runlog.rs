//! Line-delimited JSON run logs.
//!
//! A log is a header line, one `run` line per (h, k) in grid order, a
//! `summary` line with the per-point aggregates and `h*`, and optionally
//! one `generation` line per self-training generation:
//!
//! ```text
//! {"record":"header","schema_version":1,"task":"synthetic","mode":"benchmark","strategy":"MS","K":4,"r":0.5,"metric":"accuracy","master_seed":7,"std":"sample"}
//! {"record":"run","strategy":"MS","h":"pattern=1;learning_rate=0.00001","k":0,"dev_score":0.8125,"test_score":null,"seed":123,"checkpoint_step":0}
//! {"record":"summary","best_h":"...","test_mean":0.8,"test_std":0.01,"test_n":4,"points":[...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing and
//! re-serializing a log reproduces it byte for byte. [`replay`] rebuilds the
//! [`SearchResult`] from the run lines alone and checks that it regenerates
//! the original file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Metric;
use crate::error::{Error, Result};
use crate::learners::HyperPoint;
use crate::metrics::{
    render_correlation_table, render_performance_table, render_stability_table, reports_csv, stability_csv, StabilityReport,
    StrategyReport,
};
use crate::search::{Mode, PointSummary, RunRecord, SearchResult};
use crate::selftrain::GenerationRecord;
use crate::splits::Strategy;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub schema_version: u32,
    pub task: String,
    pub mode: Mode,
    pub strategy: Option<Strategy>,
    #[serde(rename = "K")]
    pub num_runs: usize,
    pub r: Option<f64>,
    pub metric: Metric,
    pub master_seed: u64,
    /// Always `"sample"`: standard deviations use the n - 1 denominator.
    pub std: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLine {
    pub strategy: Option<Strategy>,
    pub h: String,
    pub k: usize,
    pub dev_score: Option<f64>,
    pub test_score: Option<f64>,
    pub seed: u64,
    pub checkpoint_step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLine {
    pub h: String,
    pub dev_mean: Option<f64>,
    pub dev_std: Option<f64>,
    pub test_mean: Option<f64>,
    pub test_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryLine {
    pub best_h: String,
    pub test_mean: f64,
    pub test_std: f64,
    pub test_n: usize,
    pub points: Vec<PointLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationLine {
    pub generation: usize,
    pub target_size: usize,
    pub truncated: bool,
    pub train_sizes: Vec<usize>,
    pub additions: Vec<usize>,
    pub pseudo_label_accuracy: Option<f64>,
    pub test_scores: Vec<f64>,
    pub test_mean: f64,
    pub test_std: f64,
}

impl From<&GenerationRecord> for GenerationLine {
    fn from(g: &GenerationRecord) -> Self {
        Self {
            generation: g.generation,
            target_size: g.target_size,
            truncated: g.truncated,
            train_sizes: g.train_sizes.clone(),
            additions: g.additions.iter().map(Vec::len).collect(),
            pseudo_label_accuracy: g.pseudo_label_accuracy,
            test_scores: g.test_scores.clone(),
            test_mean: g.test.mean,
            test_std: g.test.std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Run(RunLine),
    Summary(SummaryLine),
    Generation(GenerationLine),
}

impl From<&RunRecord> for RunLine {
    fn from(r: &RunRecord) -> Self {
        Self {
            strategy: r.strategy,
            h: r.h.token(),
            k: r.k,
            dev_score: r.dev_score,
            test_score: r.test_score,
            seed: r.seed,
            checkpoint_step: r.checkpoint_step,
        }
    }
}

impl RunLine {
    pub fn to_record(&self) -> Result<RunRecord> {
        Ok(RunRecord {
            strategy: self.strategy,
            h: HyperPoint::parse(&self.h)?,
            k: self.k,
            dev_score: self.dev_score,
            test_score: self.test_score,
            seed: self.seed,
            checkpoint_step: self.checkpoint_step,
        })
    }
}

fn point_line(p: &PointSummary) -> PointLine {
    PointLine {
        h: p.h.token(),
        dev_mean: p.dev.map(|d| d.mean),
        dev_std: p.dev.map(|d| d.std),
        test_mean: p.test.map(|t| t.mean),
        test_std: p.test.map(|t| t.std),
    }
}

impl From<&SearchResult> for SummaryLine {
    fn from(r: &SearchResult) -> Self {
        Self {
            best_h: r.best_h().token(),
            test_mean: r.test.mean,
            test_std: r.test.std,
            test_n: r.test.n,
            points: r.points.iter().map(point_line).collect(),
        }
    }
}

/// A parsed or freshly built run log.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub header: LogHeader,
    pub runs: Vec<RunLine>,
    pub summary: Option<SummaryLine>,
    pub generations: Vec<GenerationLine>,
}

impl RunLog {
    pub fn from_result(task: &str, result: &SearchResult, ratio: Option<f64>, metric: Metric, master_seed: u64) -> Self {
        Self {
            header: LogHeader {
                schema_version: SCHEMA_VERSION,
                task: task.to_string(),
                mode: result.mode,
                strategy: result.strategy,
                num_runs: result.num_runs,
                r: ratio,
                metric,
                master_seed,
                std: "sample".into(),
            },
            runs: result.records.iter().map(RunLine::from).collect(),
            summary: Some(SummaryLine::from(result)),
            generations: Vec::new(),
        }
    }

    pub fn with_generations(mut self, generations: &[GenerationRecord]) -> Self {
        self.generations = generations.iter().map(GenerationLine::from).collect();
        self
    }

    pub fn records(&self) -> Vec<LogRecord> {
        let mut out = vec![LogRecord::Header(self.header.clone())];
        out.extend(self.runs.iter().cloned().map(LogRecord::Run));
        out.extend(self.summary.iter().cloned().map(LogRecord::Summary));
        out.extend(self.generations.iter().cloned().map(LogRecord::Generation));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            let line = serde_json::to_string(&r).expect("log records serialize");
            let _ = writeln!(s, "{line}");
        }
        s
    }

    /// Parse a log. Every line must be a complete record terminated by a
    /// newline; the first must be the header, runs precede the summary.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = None;
        let mut runs = Vec::new();
        let mut summary = None;
        let mut generations = Vec::new();
        let n_lines = text.lines().count();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if ln == n_lines && !text.ends_with('\n') {
                return Err(Error::parse(ln, "truncated final line (no terminating newline)"));
            }
            let rec: LogRecord = serde_json::from_str(line).map_err(|e| Error::parse(ln, e.to_string()))?;
            match (rec, &header, &summary) {
                (LogRecord::Header(h), None, _) => {
                    if h.schema_version != SCHEMA_VERSION {
                        return Err(Error::parse(ln, format!("unsupported schema_version {}", h.schema_version)));
                    }
                    header = Some(h)
                }
                (LogRecord::Header(_), Some(_), _) => return Err(Error::parse(ln, "duplicate header")),
                (_, None, _) => return Err(Error::parse(ln, "first record must be the header")),
                (LogRecord::Run(r), _, None) => {
                    HyperPoint::parse(&r.h).map_err(|e| Error::parse(ln, e.to_string()))?;
                    runs.push(r)
                }
                (LogRecord::Run(_), _, Some(_)) => return Err(Error::parse(ln, "run record after summary")),
                (LogRecord::Summary(s), _, None) => summary = Some(s),
                (LogRecord::Summary(_), _, Some(_)) => return Err(Error::parse(ln, "duplicate summary")),
                (LogRecord::Generation(g), _, _) => generations.push(g),
            }
        }
        let header = header.ok_or_else(|| Error::parse(1, "empty log"))?;
        Ok(Self {
            header,
            runs,
            summary,
            generations,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Re-aggregate the run lines.
    pub fn result(&self) -> Result<SearchResult> {
        let records = self.runs.iter().map(RunLine::to_record).collect::<Result<Vec<_>>>()?;
        SearchResult::from_records(self.header.mode, self.header.strategy, self.header.num_runs, records)
    }
}

/// Recompute the result from the run lines of `text` and check that it
/// regenerates `text` exactly. Returns the recomputed result.
pub fn replay(text: &str) -> Result<SearchResult> {
    let log = RunLog::parse(text)?;
    let result = log
        .result()
        .map_err(|e| Error::ReplayMismatch(format!("run records do not re-aggregate: {e}")))?;
    let rebuilt = RunLog {
        summary: Some(SummaryLine::from(&result)),
        ..log.clone()
    }
    .to_text();
    if rebuilt != text {
        let line = rebuilt
            .lines()
            .zip(text.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| rebuilt.lines().count().min(text.lines().count()) + 1, |i| i + 1);
        return Err(Error::ReplayMismatch(format!("recomputed log differs at line {line}")));
    }
    Ok(result)
}

/// Tab-separated pseudo-label audit: one row per (generation, split, label).
pub fn pseudo_label_audit(generations: &[GenerationRecord]) -> String {
    let mut s = String::from("generation\tsplit\tindex\tlabel\tconfidence\n");
    for g in generations {
        for (k, adds) in g.additions.iter().enumerate() {
            for a in adds {
                let _ = writeln!(s, "{}\t{k}\t{}\t{}\t{}", g.generation, a.index, a.label, a.confidence);
            }
        }
    }
    s
}

/// Tables regenerated from audit logs.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// Performance and correlation tables per K, then the stability table
    /// when some strategy was run at several K.
    pub text: String,
    pub csv: String,
    /// Per-K curve data, when some strategy was run at several K.
    pub stability_csv: Option<String>,
}

/// Build every strategy table from audit logs alone. Input order does not
/// matter: logs are sorted by task, strategy and K.
pub fn build_report(logs: &[RunLog]) -> Result<Report> {
    let mut audits: Vec<&RunLog> = logs.iter().filter(|l| l.header.mode == Mode::Audit).collect();
    if audits.is_empty() {
        return Err(Error::EmptyInput("no audit-mode run logs"));
    }
    let metric = audits[0].header.metric;
    if audits.iter().any(|l| l.header.metric != metric) {
        return Err(Error::config("audit logs mix metrics"));
    }
    let order = |s: Option<Strategy>| s.and_then(|s| Strategy::ALL.iter().position(|&x| x == s));
    audits.sort_by(|a, b| {
        (&a.header.task, order(a.header.strategy), a.header.num_runs).cmp(&(&b.header.task, order(b.header.strategy), b.header.num_runs))
    });

    let mut entries: Vec<(usize, StrategyReport)> = Vec::with_capacity(audits.len());
    let mut results = Vec::with_capacity(audits.len());
    for log in &audits {
        let r = log.result()?;
        entries.push((log.header.num_runs, StrategyReport::from_audit(&log.header.task, &r, None)?));
        results.push(r);
    }

    // Attach a stability report to every (task, strategy) seen at several K.
    let mut curves: Vec<(Strategy, StabilityReport)> = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let key = (entries[i].1.task.clone(), entries[i].1.strategy);
        let mut j = i;
        while j < entries.len() && (entries[j].1.task.clone(), entries[j].1.strategy) == key {
            j += 1;
        }
        if j - i > 1 {
            let stab = StabilityReport::from_results(&results[i..j])?;
            for e in &mut entries[i..j] {
                e.1.stability = Some(stab.clone());
            }
            curves.push((key.1, stab));
        }
        i = j;
    }

    let mut ks: Vec<usize> = entries.iter().map(|e| e.0).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut text = String::new();
    for k in ks {
        let at_k: Vec<StrategyReport> = entries.iter().filter(|e| e.0 == k).map(|e| e.1.clone()).collect();
        let _ = writeln!(text, "== K = {k} ==");
        text.push_str(&render_performance_table(&at_k, metric.as_str()));
        text.push('\n');
        text.push_str(&render_correlation_table(&at_k));
        text.push('\n');
    }
    if !curves.is_empty() {
        text.push_str(&render_stability_table(&curves));
    }
    let all: Vec<StrategyReport> = entries.into_iter().map(|e| e.1).collect();
    Ok(Report {
        text,
        csv: reports_csv(&all),
        stability_csv: (!curves.is_empty()).then(|| stability_csv(&curves)),
    })
}
