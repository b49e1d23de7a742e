//! Deterministic few-shot model selection and evaluation.
//!
//! The crate builds K (train, dev) splits of a small labeled set under seven
//! data-split strategies, grid-searches a hyperparameter space over those
//! splits, selects the point with the best mean dev score, and scores each
//! strategy by the test performance it selects, the dev-test rank
//! correlation it produces over the grid, and its stability as K varies.
//!
//! Learners are pluggable. Three toy learners ship with the crate: a
//! nearest-centroid classifier, full-batch logistic regression, and an
//! oracle whose dev-score noise shrinks with the dev-set size. The last one
//! makes the statistical behaviour of the split strategies testable exactly.
//!
//! Every source of randomness flows through [`seed::derive_seed`], so a run
//! is a pure function of its configuration and master seed regardless of
//! how many worker threads execute it.

pub mod config;
pub mod data;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod runlog;
pub mod search;
pub mod seed;
pub mod selftrain;
pub mod splits;

pub use data::{generate_synthetic_task, score, Dataset, Example, Metric, Role, SyntheticTaskConfig, TaskBundle};
pub use error::{Error, Result};
pub use learners::{HyperPoint, HyperSpace, LearnerSpec, OracleSpec, TrainedModel};
pub use search::{practical_rerun, run_audit, run_search, Mode, RunRecord, SearchResult, SearchSettings};
pub use splits::{make_splits, DataSplit, SplitPlan, Strategy};
