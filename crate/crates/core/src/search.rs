//! Grid search over a hyperparameter space across the K splits of a plan.
//!
//! Three modes:
//!
//! * benchmark: train every (h, k), select `h*` by mean dev score, then
//!   score only the K checkpoints of `h*` on the test set;
//! * audit: as benchmark, but every checkpoint is scored on test so that
//!   dev-test correlation can be measured. Never used for selection;
//! * practical: retrain `h*` on the whole labeled set under L seeds.
//!
//! Runs are independent and fan out over a rayon pool. Every seed comes from
//! [`derive_seed`] keyed on the master seed and the split contents, and the
//! results are reduced in (h, k) order, so the outcome does not depend on
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Metric, TaskBundle};
use crate::error::{Error, Result};
use crate::learners::{train, train_full, HyperPoint, HyperSpace, LearnerSpec, TrainRequest, TrainedModel};
use crate::metrics::{mean_std, MeanStd};
use crate::seed::derive_seed;
use crate::splits::{DataSplit, SplitPlan, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Benchmark,
    Practical,
    Audit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Benchmark => "benchmark",
            Mode::Practical => "practical",
            Mode::Audit => "audit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSettings {
    pub metric: Metric,
    pub master_seed: u64,
    pub workers: usize,
}

impl SearchSettings {
    pub fn new(master_seed: u64) -> Self {
        Self {
            metric: Metric::Accuracy,
            master_seed,
            workers: 1,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }

    pub fn with_metric(self, metric: Metric) -> Self {
        Self { metric, ..self }
    }
}

/// One (h, k) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    /// `None` for practical-mode runs on the full labeled set.
    pub strategy: Option<Strategy>,
    pub h: HyperPoint,
    pub k: usize,
    pub dev_score: Option<f64>,
    pub test_score: Option<f64>,
    pub seed: u64,
    pub checkpoint_step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub h: HyperPoint,
    pub dev: Option<MeanStd>,
    pub test: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub mode: Mode,
    pub strategy: Option<Strategy>,
    pub num_runs: usize,
    /// One entry per grid point, in grid order.
    pub points: Vec<PointSummary>,
    /// Index into `points` of `h*`.
    pub best: usize,
    /// Test mean and std over the checkpoints of `h*`.
    pub test: MeanStd,
    pub records: Vec<RunRecord>,
}

impl SearchResult {
    pub fn best_h(&self) -> &HyperPoint {
        &self.points[self.best].h
    }

    /// Rebuild a result from its run records alone. Points appear in order
    /// of first occurrence; `h*` is the first point with the largest mean dev
    /// score. This is the only aggregation path, so a result rebuilt from a
    /// parsed log equals the original.
    pub fn from_records(mode: Mode, strategy: Option<Strategy>, num_runs: usize, records: Vec<RunRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("no run records"));
        }
        let mut groups: Vec<(HyperPoint, Vec<&RunRecord>)> = Vec::new();
        for r in &records {
            match groups.iter_mut().find(|(h, _)| *h == r.h) {
                Some((_, g)) => g.push(r),
                None => groups.push((r.h.clone(), vec![r])),
            }
        }
        let mut points = Vec::with_capacity(groups.len());
        for (h, g) in &groups {
            let dev: Vec<f64> = g.iter().filter_map(|r| r.dev_score).collect();
            let test: Vec<f64> = g.iter().filter_map(|r| r.test_score).collect();
            if mode != Mode::Practical && dev.len() != g.len() {
                return Err(Error::config(format!("run records for {h} lack dev scores")));
            }
            points.push(PointSummary {
                h: h.clone(),
                dev: (!dev.is_empty()).then(|| mean_std(&dev)).transpose()?,
                test: (!test.is_empty()).then(|| mean_std(&test)).transpose()?,
            });
        }
        let best = match mode {
            Mode::Practical => {
                if points.len() != 1 {
                    return Err(Error::config("a practical run holds exactly one hyperparameter point"));
                }
                0
            }
            _ => {
                let mut best = 0;
                for (i, p) in points.iter().enumerate() {
                    if p.dev.unwrap().mean > points[best].dev.unwrap().mean {
                        best = i;
                    }
                }
                best
            }
        };
        if mode == Mode::Benchmark {
            if let Some(leak) = points.iter().enumerate().find(|(i, p)| *i != best && p.test.is_some()) {
                return Err(Error::config(format!(
                    "benchmark log has test scores for {} which is not h*",
                    leak.1.h
                )));
            }
        }
        let test = points[best]
            .test
            .ok_or_else(|| Error::config("no test scores recorded for h*"))?;
        Ok(Self {
            mode,
            strategy,
            num_runs,
            points,
            best,
            test,
            records,
        })
    }

    /// `(mean dev, mean test)` per point; audit mode only.
    pub fn dev_test_pairs(&self) -> Result<Vec<(f64, f64)>> {
        if self.mode != Mode::Audit {
            return Err(Error::config("dev-test pairs need an audit-mode search"));
        }
        Ok(self
            .points
            .iter()
            .map(|p| (p.dev.unwrap().mean, p.test.unwrap().mean))
            .collect())
    }
}

/// Seed of the run on `split`. Independent of `h` (common random numbers
/// across the grid) and of `k`, so identical splits in different plans get
/// identical runs.
pub fn run_seed(master: u64, split: &DataSplit, salt: Option<&str>) -> u64 {
    let fp = format!("{:016x}", split.fingerprint());
    match salt {
        Some(s) => derive_seed(master, &["run", &fp, s]),
        None => derive_seed(master, &["run", &fp]),
    }
}

pub fn rerun_seed(master: u64, l: usize) -> u64 {
    derive_seed(master, &["rerun", &l.to_string()])
}

fn check_plan(bundle: &TaskBundle, plan: &SplitPlan) -> Result<()> {
    let n = bundle.labeled.len();
    let degenerate = |k, reason: &str| Error::DegenerateSplit {
        strategy: plan.strategy.tag().into(),
        k,
        reason: reason.into(),
    };
    if plan.splits.is_empty() {
        return Err(Error::config("split plan is empty"));
    }
    for s in &plan.splits {
        if s.train.iter().chain(&s.dev).any(|&i| i >= n) {
            return Err(Error::config(format!(
                "split {} references an index outside the labeled set of {n}",
                s.k
            )));
        }
        if s.train.is_empty() {
            return Err(degenerate(s.k, "empty train set"));
        }
        if s.dev.is_empty() {
            return Err(degenerate(s.k, "empty dev set"));
        }
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::config("workers must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Train one (h, split) run. Errors carry the strategy and split index.
pub(crate) fn train_on_split(
    bundle: &TaskBundle,
    plan_strategy: Strategy,
    split: &DataSplit,
    h: &HyperPoint,
    spec: &LearnerSpec,
    settings: &SearchSettings,
    salt: Option<&str>,
) -> Result<TrainedModel> {
    let train_set = bundle.labeled.select(&split.train);
    let dev_set = bundle.labeled.select(&split.dev);
    train(
        spec,
        TrainRequest {
            train: &train_set,
            dev: Some(&dev_set),
            h,
            seed: run_seed(settings.master_seed, split, salt),
            num_classes: bundle.num_classes(),
            metric: settings.metric,
            input_noise: 0.0,
            k: Some(split.k),
        },
    )
    .map_err(|e| match e {
        Error::DegenerateSplit { reason, .. } => Error::DegenerateSplit {
            strategy: plan_strategy.tag().into(),
            k: split.k,
            reason,
        },
        other => other,
    })
}

fn execute(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    space: &HyperSpace,
    spec: &LearnerSpec,
    settings: &SearchSettings,
    mode: Mode,
) -> Result<SearchResult> {
    check_plan(bundle, plan)?;
    spec.validate()?;
    let points = space.points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|hi| (0..plan.splits.len()).map(move |k| (hi, k)))
        .collect();
    let workers = pool(settings.workers)?;

    let models: Vec<TrainedModel> = workers
        .install(|| {
            jobs.par_iter()
                .map(|&(hi, k)| train_on_split(bundle, plan.strategy, &plan.splits[k], &points[hi], spec, settings, None))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let mut records: Vec<RunRecord> = jobs
        .iter()
        .zip(&models)
        .map(|(&(hi, k), m)| RunRecord {
            strategy: Some(plan.strategy),
            h: points[hi].clone(),
            k,
            dev_score: m.best_dev_score,
            test_score: None,
            seed: m.checkpoint.seed,
            checkpoint_step: m.checkpoint.step,
        })
        .collect();

    // Selection uses the same reduction as replay.
    let selected = select_best(&records, points.len(), plan.splits.len())?;
    let test_set = bundle.test.all();
    let to_score: Vec<usize> = (0..jobs.len())
        .filter(|&j| mode == Mode::Audit || jobs[j].0 == selected)
        .collect();
    let scores: Vec<f64> = workers
        .install(|| {
            to_score
                .par_iter()
                .map(|&j| models[j].evaluate(&test_set, settings.metric, "test"))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;
    for (&j, s) in to_score.iter().zip(scores) {
        records[j].test_score = Some(s);
    }
    SearchResult::from_records(mode, Some(plan.strategy), plan.splits.len(), records)
}

fn select_best(records: &[RunRecord], n_points: usize, n_runs: usize) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for hi in 0..n_points {
        let dev: Vec<f64> = records[hi * n_runs..(hi + 1) * n_runs]
            .iter()
            .map(|r| r.dev_score.expect("dev-evaluated run"))
            .collect();
        let m = mean_std(&dev)?.mean;
        if best.map_or(true, |(_, b)| m > b) {
            best = Some((hi, m));
        }
    }
    Ok(best.unwrap().0)
}

/// Benchmark mode: only the K checkpoints of `h*` touch the test set.
pub fn run_search(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    space: &HyperSpace,
    spec: &LearnerSpec,
    settings: &SearchSettings,
) -> Result<SearchResult> {
    execute(bundle, plan, space, spec, settings, Mode::Benchmark)
}

/// Audit mode: every checkpoint is scored on test. For strategy evaluation
/// only; `h*` is still chosen from dev scores alone.
pub fn run_audit(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    space: &HyperSpace,
    spec: &LearnerSpec,
    settings: &SearchSettings,
) -> Result<SearchResult> {
    execute(bundle, plan, space, spec, settings, Mode::Audit)
}

/// Practical mode: train `h` on all labeled data under `l` derived seeds and
/// report the test mean and std. Checkpoints are the final step.
pub fn practical_rerun(
    bundle: &TaskBundle,
    h: &HyperPoint,
    spec: &LearnerSpec,
    l: usize,
    settings: &SearchSettings,
) -> Result<SearchResult> {
    if l == 0 {
        return Err(Error::config("practical re-run needs L >= 1"));
    }
    spec.validate()?;
    let labeled = bundle.labeled.all();
    let test_set = bundle.test.all();
    let workers = pool(settings.workers)?;
    let records: Vec<RunRecord> = workers
        .install(|| {
            (0..l)
                .into_par_iter()
                .map(|i| {
                    let seed = rerun_seed(settings.master_seed, i);
                    let model = train_full(
                        spec,
                        TrainRequest {
                            train: &labeled,
                            dev: None,
                            h,
                            seed,
                            num_classes: bundle.num_classes(),
                            metric: settings.metric,
                            input_noise: 0.0,
                            k: Some(i),
                        },
                    )?;
                    Ok(RunRecord {
                        strategy: None,
                        h: h.clone(),
                        k: i,
                        dev_score: None,
                        test_score: Some(model.evaluate(&test_set, settings.metric, "test")?),
                        seed,
                        checkpoint_step: model.checkpoint.step,
                    })
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;
    SearchResult::from_records(Mode::Practical, None, l, records)
}

/// Train `h` on every split of `plan` and return the per-split dev scores
/// and test scores. `salt` perturbs the run seeds (a training-order seed).
pub fn evaluate_point(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    h: &HyperPoint,
    spec: &LearnerSpec,
    settings: &SearchSettings,
    salt: Option<&str>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_plan(bundle, plan)?;
    let test_set = bundle.test.all();
    let workers = pool(settings.workers)?;
    let out: Vec<(f64, f64)> = workers
        .install(|| {
            plan.splits
                .par_iter()
                .map(|split| {
                    let m = train_on_split(bundle, plan.strategy, split, h, spec, settings, salt)?;
                    Ok((m.best_dev_score.unwrap(), m.evaluate(&test_set, settings.metric, "test")?))
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}
