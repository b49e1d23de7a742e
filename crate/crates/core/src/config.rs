//! Experiment configuration, read from a single TOML document.
//!
//! Unknown keys are rejected everywhere and the whole document is validated
//! before any computation. See `configs/bundled.toml` for a complete example;
//! the schema is:
//!
//! | key | meaning |
//! |-----|---------|
//! | `schema_version` | must be 1 |
//! | `task_name` | label used in reports (default `"task"`) |
//! | `seed` | master seed |
//! | `mode` | `benchmark`, `practical` or `audit` |
//! | `metric` | `accuracy` or `macro_f1` |
//! | `output_dir` | where the command-line tool writes artifacts |
//! | `workers` | worker threads (default 1) |
//! | `[task]` | `source = "synthetic"` plus generator fields, or `source = "files"` with `labeled`, `unlabeled`, `test` paths |
//! | `[split]` | `strategy`, `k` (default 4), `ratio` (default 0.5), `strategies` for comparisons |
//! | `[[space]]` | `name`, `values`; optional with the oracle learner, which defines its own grid |
//! | `[learner]` | `kind` = `nearest_centroid`, `logreg_gd` or `oracle`, plus its fields |
//! | `[practical]` | `l`: number of re-runs |
//! | `[stability]` | `ks`: the K values scanned |
//! | `[sensitivity]` | `factor` (a grid dimension or `train_order_seed`), optional `values` |
//! | `[selftrain]` | self-training settings |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic_task, Dataset, Metric, Role, SyntheticTaskConfig, TaskBundle};
use crate::error::{Error, Result};
use crate::learners::{HyperDim, HyperSpace, IdentityEmbedder, LearnerSpec};
use crate::metrics::{TRAIN_ORDER_FACTOR, DEFAULT_SCAN_KS};
use crate::search::{Mode, SearchSettings};
use crate::selftrain::SelfTrainConfig;
use crate::splits::{make_splits, SplitPlan, Strategy};

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled oracle experiment.
pub const BUNDLED_CONFIG: &str = include_str!("../configs/bundled.toml");

/// A logistic-regression experiment with self-training.
pub const LOGREG_CONFIG: &str = include_str!("../configs/logreg.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSource {
    Synthetic(SyntheticTaskConfig),
    /// Dataset text files. Relative paths resolve against the config file.
    Files {
        labeled: PathBuf,
        unlabeled: PathBuf,
        test: PathBuf,
    },
}

fn default_k() -> usize {
    4
}
fn default_ratio() -> Option<f64> {
    Some(0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_ratio")]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub strategies: Vec<Strategy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PracticalSection {
    pub l: usize,
}

fn default_ks() -> Vec<usize> {
    DEFAULT_SCAN_KS.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    pub factor: String,
    /// Defaults to the factor's grid values.
    #[serde(default)]
    pub values: Vec<f64>,
}

fn default_task_name() -> String {
    "task".into()
}
fn default_workers() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_task_name")]
    pub task_name: String,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub task: TaskSource,
    pub split: SplitSection,
    #[serde(default)]
    pub space: Vec<HyperDim>,
    pub learner: LearnerSpec,
    pub practical: Option<PracticalSection>,
    pub stability: Option<StabilitySection>,
    pub sensitivity: Option<SensitivitySection>,
    pub selftrain: Option<SelfTrainConfig>,
    /// Directory of the config file, for resolving relative task paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(1);
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text).map_err(|e| e.in_file(path))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CONFIG).expect("bundled config is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be >= 1"));
        }
        if let TaskSource::Synthetic(s) = &self.task {
            s.validate()?;
        }
        self.check_split(self.split.strategy, self.split.k)?;
        for &s in &self.split.strategies {
            self.check_split(s, self.split.k)?;
        }
        self.learner.validate()?;
        let space = self.space()?;
        if let LearnerSpec::Oracle(o) = &self.learner {
            for h in space.points() {
                o.true_score(&h)?;
            }
        }
        if let Some(p) = &self.practical {
            if p.l == 0 {
                return Err(Error::config("practical.l must be >= 1"));
            }
        }
        if let Some(st) = &self.stability {
            if st.ks.is_empty() {
                return Err(Error::config("stability.ks is empty"));
            }
            for &k in &st.ks {
                self.check_split(self.split.strategy, k)?;
            }
        }
        if let Some(se) = &self.sensitivity {
            if se.factor != TRAIN_ORDER_FACTOR && space.dim(&se.factor).is_none() {
                return Err(Error::config(format!(
                    "sensitivity factor {:?} is neither a grid dimension nor {TRAIN_ORDER_FACTOR:?}",
                    se.factor
                )));
            }
            if se.factor == TRAIN_ORDER_FACTOR && se.values.is_empty() {
                return Err(Error::config("the train_order_seed factor needs explicit values"));
            }
        }
        if let Some(st) = &self.selftrain {
            st.validate()?;
        }
        Ok(())
    }

    fn check_split(&self, strategy: Strategy, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::config("K must be >= 1"));
        }
        if strategy.uses_ratio() {
            match self.split.ratio {
                Some(r) if r > 0.0 && r < 1.0 => {}
                Some(r) => return Err(Error::config(format!("ratio {r} must lie in (0, 1)"))),
                None => return Err(Error::config(format!("{strategy} needs a split ratio"))),
            }
        }
        if strategy == Strategy::Mi && k % 2 != 0 {
            return Err(Error::config("MI needs an even K"));
        }
        Ok(())
    }

    /// The grid: `[[space]]` if given, otherwise the oracle's own grid.
    pub fn space(&self) -> Result<HyperSpace> {
        match (&self.learner, self.space.is_empty()) {
            (_, false) => HyperSpace::new(self.space.clone()),
            (LearnerSpec::Oracle(o), true) => o.space(),
            _ => Err(Error::config("[[space]] is required for trained learners")),
        }
    }

    pub fn settings(&self) -> SearchSettings {
        SearchSettings::new(self.seed)
            .with_workers(self.workers)
            .with_metric(self.metric)
    }

    /// Ratio passed to split construction: only for strategies that use one.
    pub fn ratio_for(&self, strategy: Strategy) -> Option<f64> {
        strategy.uses_ratio().then_some(self.split.ratio).flatten()
    }

    pub fn load_task(&self) -> Result<TaskBundle> {
        match &self.task {
            TaskSource::Synthetic(s) => generate_synthetic_task(s),
            TaskSource::Files { labeled, unlabeled, test } => {
                let read = |p: &PathBuf, role: Role| -> Result<Dataset> {
                    let path = match &self.base_dir {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p.clone(),
                    };
                    let text = std::fs::read_to_string(&path)?;
                    let d = Dataset::from_text(&text).map_err(|e| e.in_file(&path))?;
                    if d.role() != role {
                        return Err(Error::config(format!(
                            "{} holds a {} set, expected {}",
                            path.display(),
                            d.role().as_str(),
                            role.as_str()
                        )));
                    }
                    Ok(d)
                };
                let bundle = TaskBundle {
                    labeled: read(labeled, Role::Labeled)?,
                    unlabeled: read(unlabeled, Role::Unlabeled)?,
                    test: read(test, Role::Test)?,
                    unlabeled_truth: None,
                };
                let c = bundle.labeled.num_classes();
                if bundle.unlabeled.num_classes() != c || bundle.test.num_classes() != c {
                    return Err(Error::config("task files disagree on the number of classes"));
                }
                Ok(bundle)
            }
        }
    }

    /// Split plan for `strategy` with `k` runs. The split seed is the master
    /// seed.
    pub fn plan(&self, bundle: &TaskBundle, strategy: Strategy, k: usize) -> Result<SplitPlan> {
        make_splits(
            strategy,
            &bundle.labeled,
            k,
            self.ratio_for(strategy),
            self.seed,
            Some(&IdentityEmbedder),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::OracleSpec;

    #[test]
    fn bundled_configs_parse() {
        let cfg = ExperimentConfig::bundled();
        assert_eq!(cfg.split.k, 4);
        assert_eq!(cfg.split.ratio, Some(0.5));
        assert_eq!(cfg.space().unwrap().grid_size(), 32);
        assert_eq!(cfg.learner, LearnerSpec::Oracle(OracleSpec::bundled(0.4)));
        assert_eq!(
            cfg.split.strategies,
            vec![Strategy::Cv, Strategy::Mdl, Strategy::Bag, Strategy::Rand, Strategy::Mi, Strategy::Ms]
        );
        let lr = ExperimentConfig::parse(LOGREG_CONFIG).unwrap();
        assert_eq!(lr.space().unwrap().grid_size(), 32);
        assert!(lr.selftrain.is_some());
    }

    #[test]
    fn defaults_apply() {
        let text = r#"
schema_version = 1
seed = 1
mode = "audit"
[task]
source = "synthetic"
[split]
strategy = "CV"
[learner]
kind = "nearest_centroid"
[[space]]
name = "pattern"
values = [0, 1]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.split.k, 4);
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.metric, Metric::Accuracy);
        assert_eq!(cfg.task, TaskSource::Synthetic(SyntheticTaskConfig::default()));
        assert_eq!(cfg.ratio_for(Strategy::Cv), None);
        assert_eq!(cfg.ratio_for(Strategy::Ms), Some(0.5));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = BUNDLED_CONFIG.replace("workers = 1", "workers = 1\nwrokers = 2");
        let line = text.lines().position(|l| l.starts_with("wrokers")).unwrap() + 1;
        match ExperimentConfig::parse(&text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
            other => panic!("expected parse error, got {other:?}"),
        }
        let nested = BUNDLED_CONFIG.replace("n_test = 2000", "n_test = 2000\ncolour = 1");
        assert!(matches!(ExperimentConfig::parse(&nested), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_errors() {
        let bad = |from: &str, to: &str| ExperimentConfig::parse(&BUNDLED_CONFIG.replace(from, to));
        assert!(matches!(bad("schema_version = 1", "schema_version = 2"), Err(Error::Config(_))));
        assert!(matches!(bad("workers = 1", "workers = 0"), Err(Error::Config(_))));
        assert!(matches!(bad("ratio = 0.5", "ratio = 1.5"), Err(Error::Config(_))));
        assert!(matches!(bad("ks = [2, 4, 8, 16]", "ks = [2, 0]"), Err(Error::Config(_))));
        assert!(matches!(bad("factor = \"pattern\"", "factor = \"colour\""), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::bundled();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
