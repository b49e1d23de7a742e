//! Examples, datasets, the synthetic Gaussian-mixture task, and scoring.
//!
//! Dataset text format, one example per line:
//!
//! ```text
//! # role=labeled classes=2
//! 0.25,-1.5 1
//! 3.0,0.75 0
//! ```
//!
//! Features are comma-separated with no whitespace; the optional integer
//! label follows after a single space. Lines starting with `#` are comments,
//! except for the `role=` header which must come first.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

impl Example {
    pub fn new(features: Vec<f64>, label: Option<usize>) -> Self {
        Self { features, label }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Labeled,
    Unlabeled,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Labeled => "labeled",
            Role::Unlabeled => "unlabeled",
            Role::Test => "test",
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(Role::Labeled),
            "unlabeled" => Ok(Role::Unlabeled),
            "test" => Ok(Role::Test),
            other => Err(Error::config(format!("unknown dataset role {other:?}"))),
        }
    }
}

/// An immutable, index-stable collection of examples.
///
/// Labeled and test sets carry a label on every example; unlabeled sets
/// carry none. All feature vectors share one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    role: Role,
    num_classes: usize,
    dim: usize,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(role: Role, num_classes: usize, examples: Vec<Example>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::config("a dataset needs at least 2 classes"));
        }
        let dim = examples.first().map(|e| e.features.len()).unwrap_or(0);
        if !examples.is_empty() && dim == 0 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != dim {
                return Err(Error::config(format!(
                    "example {i} has dimension {} but the dataset has {dim}",
                    ex.features.len()
                )));
            }
            match (role, ex.label) {
                (Role::Unlabeled, Some(_)) => {
                    return Err(Error::config(format!("unlabeled example {i} carries a label")))
                }
                (Role::Labeled | Role::Test, None) => {
                    return Err(Error::config(format!("{} example {i} has no label", role.as_str())))
                }
                (_, Some(y)) if y >= num_classes => {
                    return Err(Error::config(format!(
                        "example {i} has label {y} outside 0..{num_classes}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            role,
            num_classes,
            dim,
            examples,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Feature dimension (0 only for an empty dataset).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, index: usize) -> &Example {
        &self.examples[index]
    }

    /// Borrow the examples at `indices`, in order (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> Vec<&Example> {
        indices.iter().map(|&i| &self.examples[i]).collect()
    }

    pub fn all(&self) -> Vec<&Example> {
        self.examples.iter().collect()
    }

    /// Labels in index order; panics on an unlabeled dataset.
    pub fn labels(&self) -> Vec<usize> {
        self.examples
            .iter()
            .map(|e| e.label.expect("labeled dataset"))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# role={} classes={}\n", self.role.as_str(), self.num_classes);
        for ex in &self.examples {
            for (j, v) in ex.features.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            if let Some(y) = ex.label {
                write!(out, " {y}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (role, num_classes) = match lines.next() {
            Some((_, header)) => parse_header(header)?,
            None => return Err(Error::parse(1, "missing dataset header")),
        };
        let mut examples = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(' ');
            let feats = fields.next().unwrap_or_default();
            let features = feats
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(lineno, format!("bad feature: {e}")))?;
            let label = match fields.next() {
                Some(y) => Some(
                    y.parse::<usize>()
                        .map_err(|e| Error::parse(lineno, format!("bad label {y:?}: {e}")))?,
                ),
                None => None,
            };
            if fields.next().is_some() {
                return Err(Error::parse(lineno, "trailing fields"));
            }
            examples.push(Example::new(features, label));
        }
        Dataset::new(role, num_classes, examples)
    }
}

fn parse_header(line: &str) -> Result<(Role, usize)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(1, "expected `# role=... classes=...` header"))?;
    let mut role = None;
    let mut classes = None;
    for kv in body.split_whitespace() {
        match kv.split_once('=') {
            Some(("role", v)) => role = Some(v.parse::<Role>().map_err(|e| Error::parse(1, e.to_string()))?),
            Some(("classes", v)) => {
                classes = Some(v.parse::<usize>().map_err(|e| Error::parse(1, e.to_string()))?)
            }
            _ => return Err(Error::parse(1, format!("unexpected header field {kv:?}"))),
        }
    }
    match (role, classes) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::parse(1, "header needs both role= and classes=")),
    }
}

/// Labeled, unlabeled and test sets of one task.
#[derive(Clone, Debug)]
pub struct TaskBundle {
    pub labeled: Dataset,
    pub unlabeled: Dataset,
    pub test: Dataset,
    /// Generator labels of the unlabeled pool, when known. Only used to
    /// audit pseudo-label accuracy, never for training.
    pub unlabeled_truth: Option<Vec<usize>>,
}

impl TaskBundle {
    pub fn num_classes(&self) -> usize {
        self.labeled.num_classes()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        Self {
            num_classes: 2,
            dim: 2,
            separation: 4.0,
            n_labeled: 64,
            n_unlabeled: 500,
            n_test: 2000,
            seed: 7,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("synthetic task needs dim >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("synthetic task needs at least 2 classes"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::config("class separation must be finite and >= 0"));
        }
        if self.n_labeled == 0 || self.n_unlabeled == 0 || self.n_test == 0 {
            return Err(Error::config("every synthetic dataset size must be >= 1"));
        }
        Ok(())
    }

    /// Class means. With `C <= d` the means sit on scaled coordinate axes so
    /// every pair is exactly `separation` apart; otherwise they are seeded
    /// random directions of the same norm.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let radius = self.separation / std::f64::consts::SQRT_2;
        if self.num_classes <= self.dim {
            (0..self.num_classes)
                .map(|c| {
                    let mut m = vec![0.0; self.dim];
                    m[c] = radius;
                    m
                })
                .collect()
        } else {
            let mut rng = rng_from(derive_seed(self.seed, &["synthetic", "means"]));
            (0..self.num_classes)
                .map(|_| {
                    let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    v.into_iter().map(|x| x / norm * radius).collect()
                })
                .collect()
        }
    }
}

/// Draw labeled, unlabeled and test sets from one isotropic Gaussian
/// mixture with equal class weights and unit variance.
pub fn generate_synthetic_task(config: &SyntheticTaskConfig) -> Result<TaskBundle> {
    config.validate()?;
    let means = config.class_means();
    let draw = |role: Role, n: usize| -> Vec<Example> {
        let mut rng = rng_from(derive_seed(config.seed, &["synthetic", role.as_str()]));
        (0..n)
            .map(|_| {
                let y = rng.gen_range(0..config.num_classes);
                let features = means[y]
                    .iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Example::new(features, Some(y))
            })
            .collect()
    };

    let labeled = draw(Role::Labeled, config.n_labeled);
    let pool = draw(Role::Unlabeled, config.n_unlabeled);
    let test = draw(Role::Test, config.n_test);
    let truth = pool.iter().map(|e| e.label.unwrap()).collect();
    let pool = pool
        .into_iter()
        .map(|e| Example::new(e.features, None))
        .collect();

    Ok(TaskBundle {
        labeled: Dataset::new(Role::Labeled, config.num_classes, labeled)?,
        unlabeled: Dataset::new(Role::Unlabeled, config.num_classes, pool)?,
        test: Dataset::new(Role::Test, config.num_classes, test)?,
        unlabeled_truth: Some(truth),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    MacroF1,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            other => Err(Error::config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Score predictions against true labels. Higher is better; the result lies
/// in [0, 1].
///
/// Macro-F1 averages per-class F1 over every class that occurs in either
/// the predictions or the truth. A class with no true positives contributes
/// 0 rather than an undefined ratio.
pub fn score(predictions: &[usize], truth: &[usize], metric: Metric) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("no examples to score"));
    }
    match metric {
        Metric::Accuracy => {
            let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
            Ok(correct as f64 / truth.len() as f64)
        }
        Metric::MacroF1 => {
            let classes = predictions.iter().chain(truth).copied().max().unwrap() + 1;
            let mut tp = vec![0usize; classes];
            let mut fp = vec![0usize; classes];
            let mut fn_ = vec![0usize; classes];
            for (&p, &t) in predictions.iter().zip(truth) {
                if p == t {
                    tp[p] += 1;
                } else {
                    fp[p] += 1;
                    fn_[t] += 1;
                }
            }
            let mut total = 0.0;
            let mut present = 0usize;
            for c in 0..classes {
                if tp[c] + fp[c] + fn_[c] == 0 {
                    continue;
                }
                present += 1;
                if tp[c] > 0 {
                    total += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64;
                }
            }
            Ok(total / present as f64)
        }
    }
}
