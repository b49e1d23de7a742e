//! The three desiderata for a split strategy: test performance of the
//! selected point, dev-test rank correlation over the grid, and stability
//! as the number of runs K changes. Also the one-factor sensitivity
//! analysis and the report tables.
//!
//! Standard deviations are sample standard deviations (denominator n - 1).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::TaskBundle;
use crate::error::{Error, Result};
use crate::learners::{HyperPoint, HyperSpace, LearnerSpec};
use crate::search::{evaluate_point, run_audit, SearchResult, SearchSettings};
use crate::splits::{make_splits, SplitPlan, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// True when the std is a placeholder for a single value.
    pub fn is_single(&self) -> bool {
        self.n == 1
    }
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mean_std of an empty list"));
    }
    let n = values.len();
    // Constant input is exact: mean is the value, std is 0.
    if values.iter().all(|v| *v == values[0]) {
        return Ok(MeanStd { mean: values[0], std: 0.0, n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(MeanStd { mean, std, n })
}

/// 1-based ranks; tied values share the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two pairs"));
    }
    if x.iter().any(|v| v.is_nan()) || y.iter().any(|v| v.is_nan()) {
        return Err(Error::UndefinedCorrelation("NaN input"));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Dev-test agreement over a grid: one `(mean dev, mean test)` pair per
/// point, averaged over the K runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub pairs: Vec<(f64, f64)>,
    pub rho: f64,
}

pub fn correlation_over_space(result: &SearchResult) -> Result<CorrelationReport> {
    let pairs = result.dev_test_pairs()?;
    if pairs.len() < 2 {
        return Err(Error::UndefinedCorrelation("grid has fewer than two points"));
    }
    let (dev, test): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let rho = spearman(&dev, &test)?;
    Ok(CorrelationReport { pairs, rho })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityEntry {
    pub k: usize,
    /// Test mean and std over the K checkpoints of `h*`.
    pub performance: MeanStd,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub entries: Vec<StabilityEntry>,
    /// Std of the per-K mean test performance.
    pub performance_std: f64,
    /// Std of the per-K rho.
    pub rho_std: f64,
}

impl StabilityReport {
    /// Build from audit results, one per K, in increasing K.
    pub fn from_results(results: &[SearchResult]) -> Result<Self> {
        let mut entries = Vec::with_capacity(results.len());
        for r in results {
            if let Some(prev) = entries.last().map(|e: &StabilityEntry| e.k) {
                if r.num_runs <= prev {
                    return Err(Error::config("stability scan K values must be strictly increasing"));
                }
            }
            entries.push(StabilityEntry {
                k: r.num_runs,
                performance: r.test,
                rho: correlation_over_space(r)?.rho,
            });
        }
        let perf: Vec<f64> = entries.iter().map(|e| e.performance.mean).collect();
        let rho: Vec<f64> = entries.iter().map(|e| e.rho).collect();
        Ok(Self {
            performance_std: mean_std(&perf)?.std,
            rho_std: mean_std(&rho)?.std,
            entries,
        })
    }
}

/// What a stability scan or strategy comparison runs.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub strategy: Strategy,
    pub ratio: Option<f64>,
    pub space: HyperSpace,
    pub spec: LearnerSpec,
    pub settings: SearchSettings,
}

impl ScanConfig {
    pub fn plan(&self, bundle: &TaskBundle, k: usize) -> Result<SplitPlan> {
        let ratio = if self.strategy.uses_ratio() { self.ratio } else { None };
        make_splits(self.strategy, &bundle.labeled, k, ratio, self.settings.master_seed, None)
    }

    pub fn audit(&self, bundle: &TaskBundle, k: usize) -> Result<SearchResult> {
        run_audit(bundle, &self.plan(bundle, k)?, &self.space, &self.spec, &self.settings)
    }
}

/// The paper-style K scan set.
pub const DEFAULT_SCAN_KS: [usize; 4] = [2, 4, 8, 16];

/// One audit search per K. Returns the report and the underlying results.
pub fn stability_scan(bundle: &TaskBundle, config: &ScanConfig, ks: &[usize]) -> Result<(StabilityReport, Vec<SearchResult>)> {
    if ks.is_empty() {
        return Err(Error::config("stability scan needs at least one K"));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("stability scan K values must be strictly increasing"));
    }
    let results = ks
        .iter()
        .map(|&k| config.audit(bundle, k))
        .collect::<Result<Vec<_>>>()?;
    Ok((StabilityReport::from_results(&results)?, results))
}

/// Factor name that perturbs the run seeds instead of a grid dimension.
pub const TRAIN_ORDER_FACTOR: &str = "train_order_seed";

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub factor: String,
    /// `(value, mean dev over K, mean test over K)` per value.
    pub per_value: Vec<(f64, f64, f64)>,
    pub dev_std: f64,
    pub test_std: f64,
}

/// Vary one factor over `values` with every other dimension held at `fixed`;
/// report the std across values of the K-mean dev and test scores.
pub fn sensitivity(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    spec: &LearnerSpec,
    settings: &SearchSettings,
    factor: &str,
    values: &[f64],
    fixed: &HyperPoint,
) -> Result<SensitivityReport> {
    if values.is_empty() {
        return Err(Error::config("sensitivity needs at least one value"));
    }
    let is_order = factor == TRAIN_ORDER_FACTOR;
    if !is_order && fixed.get(factor).is_none() {
        return Err(Error::config(format!("unknown sensitivity factor {factor:?}")));
    }
    let mut per_value = Vec::with_capacity(values.len());
    for &v in values {
        let (dev, test) = if is_order {
            evaluate_point(bundle, plan, fixed, spec, settings, Some(&format!("order={v}")))?
        } else {
            evaluate_point(bundle, plan, &fixed.with(factor, v), spec, settings, None)?
        };
        per_value.push((v, mean_std(&dev)?.mean, mean_std(&test)?.mean));
    }
    let dev: Vec<f64> = per_value.iter().map(|p| p.1).collect();
    let test: Vec<f64> = per_value.iter().map(|p| p.2).collect();
    Ok(SensitivityReport {
        factor: factor.to_string(),
        dev_std: mean_std(&dev)?.std,
        test_std: mean_std(&test)?.std,
        per_value,
    })
}

/// Desiderata of one strategy on one task.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyReport {
    pub task: String,
    pub strategy: Strategy,
    pub performance: MeanStd,
    pub correlation: CorrelationReport,
    pub stability: Option<StabilityReport>,
}

impl StrategyReport {
    pub fn from_audit(task: &str, result: &SearchResult, stability: Option<StabilityReport>) -> Result<Self> {
        Ok(Self {
            task: task.to_string(),
            strategy: result
                .strategy
                .ok_or_else(|| Error::config("strategy report needs a split-strategy search"))?,
            performance: result.test,
            correlation: correlation_over_space(result)?,
            stability,
        })
    }
}

fn ordered_unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

fn render_grid(title: &str, reports: &[StrategyReport], cell: impl Fn(&StrategyReport) -> String) -> String {
    let tasks = ordered_unique(reports.iter().map(|r| r.task.clone()));
    let strategies = ordered_unique(reports.iter().map(|r| r.strategy));
    let mut rows: Vec<Vec<String>> = vec![std::iter::once("Strategy".to_string()).chain(tasks.iter().cloned()).collect()];
    for s in &strategies {
        let mut row = vec![s.tag().to_string()];
        for t in &tasks {
            row.push(
                reports
                    .iter()
                    .find(|r| r.strategy == *s && &r.task == t)
                    .map(&cell)
                    .unwrap_or_else(|| "-".into()),
            );
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut out = format!("{title}\n");
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
        }
    }
    out
}

/// Test performance per strategy and task, "mean ±std" in percent.
pub fn render_performance_table(reports: &[StrategyReport], metric: &str) -> String {
    render_grid(
        &format!("AUDIT test performance of h* ({metric}, mean ±std over K, %)"),
        reports,
        |r| format!("{:.2} ±{:.2}", 100.0 * r.performance.mean, 100.0 * r.performance.std),
    )
}

/// Dev-test Spearman correlation per strategy and task.
pub fn render_correlation_table(reports: &[StrategyReport]) -> String {
    render_grid("AUDIT dev-test Spearman correlation over the grid", reports, |r| {
        format!("{:.3}", r.correlation.rho)
    })
}

pub fn reports_csv(reports: &[StrategyReport]) -> String {
    let mut out = String::from("task,strategy,perf_mean,perf_std,k,rho,perf_cross_k_std,rho_cross_k_std\n");
    for r in reports {
        let (ps, rs) = r
            .stability
            .as_ref()
            .map(|s| (s.performance_std.to_string(), s.rho_std.to_string()))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.task, r.strategy, r.performance.mean, r.performance.std, r.performance.n, r.correlation.rho, ps, rs
        )
        .unwrap();
    }
    out
}

/// Per-K curve data for external plotting.
pub fn stability_csv(curves: &[(Strategy, StabilityReport)]) -> String {
    let mut out = String::from("strategy,K,performance,performance_std,rho\n");
    for (s, rep) in curves {
        for e in &rep.entries {
            writeln!(out, "{},{},{},{},{}", s, e.k, e.performance.mean, e.performance.std, e.rho).unwrap();
        }
    }
    out
}

pub fn render_stability_table(curves: &[(Strategy, StabilityReport)]) -> String {
    let mut out = String::from("AUDIT stability over K (performance %, rho)\n");
    writeln!(out, "{:<8} {:>4} {:>16} {:>8}", "Strategy", "K", "performance", "rho").unwrap();
    for (s, rep) in curves {
        for e in &rep.entries {
            writeln!(
                out,
                "{:<8} {:>4} {:>16} {:>8.3}",
                s.tag(),
                e.k,
                format!("{:.2} ±{:.2}", 100.0 * e.performance.mean, 100.0 * e.performance.std),
                e.rho
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<8} {:>4} {:>16} {:>8.3}",
            s.tag(),
            "std",
            format!("{:.2}", 100.0 * rep.performance_std),
            rep.rho_std
        )
        .unwrap();
    }
    out
}

pub fn render_sensitivity_table(reports: &[SensitivityReport]) -> String {
    let mut out = String::from("AUDIT sensitivity: std across factor values (dev, test)\n");
    writeln!(out, "{:<18} {:>10} {:>10}", "Factor", "dev std", "test std").unwrap();
    for r in reports {
        writeln!(out, "{:<18} {:>10.4} {:>10.4}", r.factor, r.dev_std, r.test_std).unwrap();
    }
    out
}
