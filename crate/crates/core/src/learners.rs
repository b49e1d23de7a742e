//! The pluggable few-shot method: hyperparameter spaces, learner specs,
//! trained models, and the built-in toy learners.
//!
//! Built-in learners read these hyperparameter names from a [`HyperPoint`]:
//!
//! | name             | nearest_centroid | logreg_gd        | default |
//! |------------------|------------------|------------------|---------|
//! | `pattern`        | feature map id   | feature map id   | 0       |
//! | `learning_rate`  |                  | scaled by `lr_scale` | required |
//! | `max_steps`      |                  | GD steps         | required |
//! | `eval_frequency` |                  | fraction of `max_steps` between dev evaluations | 0.04 |
//!
//! The oracle learner reads only the dimensions declared in its
//! [`OracleSpec`].

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{score, Example, Metric};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

// ---------------------------------------------------------------------------
// Hyperparameter space

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperDim {
    pub name: String,
    pub values: Vec<f64>,
}

/// Named discrete dimensions. Grid order is row-major: the last dimension
/// varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperSpace {
    dims: Vec<HyperDim>,
}

impl HyperSpace {
    pub fn new(dims: Vec<HyperDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::config("hyperparameter space has no dimensions"));
        }
        for (i, d) in dims.iter().enumerate() {
            if d.name.is_empty() || d.name.contains(['=', ';', ' ']) {
                return Err(Error::config(format!("invalid dimension name {:?}", d.name)));
            }
            if d.values.is_empty() {
                return Err(Error::config(format!("dimension {:?} has no values", d.name)));
            }
            if d.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("dimension {:?} has a non-finite value", d.name)));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::config(format!("duplicate dimension {:?}", d.name)));
            }
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[HyperDim] {
        &self.dims
    }

    pub fn dim(&self, name: &str) -> Option<&HyperDim> {
        self.dims.iter().find(|d| d.name == name)
    }

    pub fn grid_size(&self) -> usize {
        self.dims.iter().map(|d| d.values.len()).product()
    }

    pub fn points(&self) -> Vec<HyperPoint> {
        let mut out = Vec::with_capacity(self.grid_size());
        let mut idx = vec![0usize; self.dims.len()];
        loop {
            out.push(HyperPoint {
                values: self
                    .dims
                    .iter()
                    .zip(&idx)
                    .map(|(d, &i)| (d.name.clone(), d.values[i]))
                    .collect(),
            });
            let mut j = self.dims.len();
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.dims[j].values.len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn contains(&self, h: &HyperPoint) -> bool {
        h.values.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(&h.values)
                .all(|(d, (n, v))| &d.name == n && d.values.contains(v))
    }
}

/// One grid point: a value for each dimension, in space order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HyperPoint {
    values: Vec<(String, f64)>,
}

impl HyperPoint {
    pub fn new(values: Vec<(String, f64)>) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn pairs(&self) -> &[(String, f64)] {
        &self.values
    }

    /// Copy with one dimension replaced (or appended if absent).
    pub fn with(&self, name: &str, value: f64) -> HyperPoint {
        let mut out = self.clone();
        match out.values.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => out.values.push((name.to_string(), value)),
        }
        out
    }

    /// `name=value;name=value`, the form used in run logs.
    pub fn token(&self) -> String {
        self.to_string()
    }

    pub fn parse(token: &str) -> Result<HyperPoint> {
        if token.is_empty() {
            return Ok(HyperPoint::default());
        }
        let values = token
            .split(';')
            .map(|kv| {
                let (n, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::config(format!("bad hyperparameter pair {kv:?}")))?;
                let v = v
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("bad hyperparameter value {v:?}: {e}")))?;
                Ok((n.to_string(), v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HyperPoint { values })
    }
}

impl fmt::Display for HyperPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Feature maps and embedders

/// The prompt-pattern analog: pattern `p` keeps a cyclic window of
/// `max(1, d - p)` coordinates starting at coordinate `p mod d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    coords: Vec<usize>,
}

impl FeatureMap {
    pub fn from_pattern(pattern: f64, dim: usize) -> Result<Self> {
        if pattern < 0.0 || pattern.fract() != 0.0 {
            return Err(Error::config(format!("pattern must be a non-negative integer, got {pattern}")));
        }
        let p = pattern as usize;
        let width = dim.saturating_sub(p).max(1);
        let start = p % dim.max(1);
        Ok(Self {
            coords: (0..width).map(|j| (start + j) % dim).collect(),
        })
    }

    pub fn out_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|&j| x[j]).collect()
    }
}

/// Maps an example to the representation clustered by model-informed
/// splitting.
pub trait Embedder: Send + Sync {
    fn embed(&self, example: &Example) -> Vec<f64>;
}

/// Returns the raw feature vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityEmbedder;

impl Embedder for IdentityEmbedder {
    fn embed(&self, example: &Example) -> Vec<f64> {
        example.features.clone()
    }
}

pub fn embed(embedder: &dyn Embedder, example: &Example) -> Vec<f64> {
    embedder.embed(example)
}

// ---------------------------------------------------------------------------
// Learner specs

/// A dimension the oracle scores: `effects[i]` is added to the base score
/// when the point takes `values[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDim {
    pub name: String,
    pub values: Vec<f64>,
    pub effects: Vec<f64>,
}

/// Verification learner with a known true score per grid point.
///
/// An observed score on an evaluation set of size `n` is
/// `true(h) + sigma / sqrt(n) * z` with `z` standard normal, so the noise
/// variance is `sigma^2 / n`. Scores are not clipped to [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub base: f64,
    pub sigma: f64,
    pub dims: Vec<OracleDim>,
}

impl OracleSpec {
    /// A 4 x 2 x 2 x 2 space shaped like the prompt-method search grid, with
    /// `pattern` as the dominant dimension. All 32 true scores are distinct
    /// and the unique argmax is [`OracleSpec::bundled_argmax`].
    pub fn bundled(sigma: f64) -> Self {
        let dim = |name: &str, values: &[f64], effects: &[f64]| OracleDim {
            name: name.into(),
            values: values.to_vec(),
            effects: effects.to_vec(),
        };
        Self {
            base: 0.80,
            sigma,
            dims: vec![
                dim("pattern", &[0.0, 1.0, 2.0, 3.0], &[-0.081, 0.0, -0.137, -0.209]),
                dim("learning_rate", &[5e-6, 1e-5], &[-0.033, 0.0]),
                dim("max_steps", &[250.0, 500.0], &[0.0, -0.0171]),
                dim("eval_frequency", &[0.02, 0.04], &[0.0, -0.0089]),
            ],
        }
    }

    pub fn bundled_argmax() -> HyperPoint {
        HyperPoint::new(vec![
            ("pattern".into(), 1.0),
            ("learning_rate".into(), 1e-5),
            ("max_steps".into(), 250.0),
            ("eval_frequency".into(), 0.02),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("oracle sigma must be finite and >= 0"));
        }
        for d in &self.dims {
            if d.values.len() != d.effects.len() || d.values.is_empty() {
                return Err(Error::config(format!(
                    "oracle dimension {:?} needs one effect per value",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HyperSpace> {
        HyperSpace::new(
            self.dims
                .iter()
                .map(|d| HyperDim {
                    name: d.name.clone(),
                    values: d.values.clone(),
                })
                .collect(),
        )
    }

    /// Deterministic true score of a point. Dimensions of `h` that the oracle
    /// does not declare are ignored.
    pub fn true_score(&self, h: &HyperPoint) -> Result<f64> {
        let mut s = self.base;
        for d in &self.dims {
            let v = h
                .get(&d.name)
                .ok_or_else(|| Error::config(format!("point {h} lacks oracle dimension {:?}", d.name)))?;
            let i = d
                .values
                .iter()
                .position(|x| *x == v)
                .ok_or_else(|| Error::config(format!("value {v} not in oracle dimension {:?}", d.name)))?;
            s += d.effects[i];
        }
        Ok(s)
    }

    /// Token over the dimensions that actually move the score; noise is
    /// keyed on it so that ignored dimensions leave observations unchanged.
    fn relevant_token(&self, h: &HyperPoint) -> String {
        let mut parts = Vec::new();
        for d in &self.dims {
            if d.effects.iter().any(|e| *e != d.effects[0]) {
                parts.push(format!("{}={}", d.name, h.get(&d.name).unwrap_or(f64::NAN)));
            }
        }
        parts.join(";")
    }

    /// Observed score on an evaluation set of `set_size` examples. `seed`
    /// identifies the run and `role` the evaluation set.
    pub fn observe(&self, h: &HyperPoint, set_size: usize, seed: u64, role: &str) -> Result<f64> {
        if set_size == 0 {
            return Err(Error::EmptyInput("oracle evaluation set is empty"));
        }
        let truth = self.true_score(h)?;
        if self.sigma == 0.0 {
            return Ok(truth);
        }
        let mut rng = rng_from(derive_seed(seed, &["oracle", role, &self.relevant_token(h)]));
        let z: f64 = rng.sample(StandardNormal);
        Ok(truth + self.sigma / (set_size as f64).sqrt() * z)
    }

    /// The true-score table in grid order, one `h<TAB>score` line per point.
    pub fn true_score_table(&self) -> Result<String> {
        let mut out = String::new();
        for h in self.space()?.points() {
            out.push_str(&format!("{h}\t{}\n", self.true_score(&h)?));
        }
        Ok(out)
    }
}

pub fn oracle_true_score(oracle: &OracleSpec, h: &HyperPoint) -> Result<f64> {
    oracle.true_score(h)
}

fn default_temperature() -> f64 {
    1.0
}

fn default_lr_scale() -> f64 {
    1e4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    /// Class centroids in the pattern's feature map; probabilities are a
    /// softmax of `-||x - mu||^2 / (2 * temperature)`.
    NearestCentroid {
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    /// Multinomial logistic regression, zero-initialised, trained by
    /// full-batch gradient descent. The grid's `learning_rate` is multiplied
    /// by `lr_scale` so that grids written in fine-tuning units stay usable.
    LogregGd {
        #[serde(default = "default_lr_scale")]
        lr_scale: f64,
        #[serde(default)]
        l2: f64,
    },
    Oracle(OracleSpec),
}

impl LearnerSpec {
    pub fn logreg() -> Self {
        LearnerSpec::LogregGd {
            lr_scale: default_lr_scale(),
            l2: 0.0,
        }
    }

    pub fn nearest_centroid() -> Self {
        LearnerSpec::NearestCentroid {
            temperature: default_temperature(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::NearestCentroid { .. } => "nearest_centroid",
            LearnerSpec::LogregGd { .. } => "logreg_gd",
            LearnerSpec::Oracle(_) => "oracle",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::NearestCentroid { temperature } if !(*temperature > 0.0) => {
                Err(Error::config("temperature must be > 0"))
            }
            LearnerSpec::LogregGd { lr_scale, l2 } if !(*lr_scale > 0.0) || !(*l2 >= 0.0) => {
                Err(Error::config("lr_scale must be > 0 and l2 >= 0"))
            }
            LearnerSpec::Oracle(o) => o.validate(),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Training

/// Everything a single training run depends on.
#[derive(Clone, Copy)]
pub struct TrainRequest<'a> {
    pub train: &'a [&'a Example],
    /// Dev set for checkpoint selection; `None` trains to the final step.
    pub dev: Option<&'a [&'a Example]>,
    pub h: &'a HyperPoint,
    pub seed: u64,
    pub num_classes: usize,
    pub metric: Metric,
    /// Per-coordinate zeroing probability applied to training inputs.
    pub input_noise: f64,
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub step: usize,
    pub h: HyperPoint,
    pub k: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
enum Predictor {
    Centroid {
        map: FeatureMap,
        centroids: Vec<Option<Vec<f64>>>,
        temperature: f64,
    },
    Linear {
        map: FeatureMap,
        /// `num_classes` rows of `out_dim + 1` weights, bias last.
        weights: Vec<Vec<f64>>,
    },
    Oracle {
        spec: OracleSpec,
        h: HyperPoint,
        seed: u64,
    },
}

/// A trained checkpoint. Immutable; evaluation is `&self` and thread-safe.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    predictor: Predictor,
    num_classes: usize,
    /// Dev score of the selected checkpoint; `None` when trained without dev.
    pub best_dev_score: Option<f64>,
    pub checkpoint: CheckpointMeta,
    /// Every evaluated `(step, dev score)` pair.
    pub trajectory: Vec<(usize, f64)>,
}

impl TrainedModel {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.predictor, Predictor::Oracle { .. })
    }

    /// Class-probability vector. The oracle has no predictor and returns the
    /// uniform distribution.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match &self.predictor {
            Predictor::Centroid {
                map,
                centroids,
                temperature,
            } => centroid_proba(map, centroids, *temperature, x),
            Predictor::Linear { map, weights } => softmax(&linear_logits(weights, &map.apply(x))),
            Predictor::Oracle { .. } => vec![1.0 / self.num_classes as f64; self.num_classes],
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }

    /// Score on a labeled set. `role` names the set (`"dev"`, `"test"`) and
    /// only matters for the oracle, whose noise is keyed on it.
    pub fn evaluate(&self, examples: &[&Example], metric: Metric, role: &str) -> Result<f64> {
        if let Predictor::Oracle { spec, h, seed } = &self.predictor {
            return spec.observe(h, examples.len(), *seed, role);
        }
        let preds: Vec<usize> = examples.iter().map(|e| self.predict(&e.features)).collect();
        let truth: Vec<usize> = examples
            .iter()
            .map(|e| e.label.ok_or(Error::EmptyInput("evaluation example without a label")))
            .collect::<Result<_>>()?;
        score(&preds, &truth, metric)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn centroid_proba(map: &FeatureMap, centroids: &[Option<Vec<f64>>], temperature: f64, x: &[f64]) -> Vec<f64> {
    let z = map.apply(x);
    let logits: Vec<f64> = centroids
        .iter()
        .map(|c| match c {
            Some(mu) => -mu.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * temperature),
            None => f64::NEG_INFINITY,
        })
        .collect();
    softmax(&logits)
}

fn linear_logits(weights: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| {
            let (bias, coef) = w.split_last().unwrap();
            bias + coef.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn hyper(h: &HyperPoint, name: &str, default: Option<f64>) -> Result<f64> {
    h.get(name)
        .or(default)
        .ok_or_else(|| Error::config(format!("hyperparameter {name:?} is required by this learner")))
}

/// Train with dev-based checkpoint selection. Errors when dev is empty.
pub fn train(spec: &LearnerSpec, req: TrainRequest<'_>) -> Result<TrainedModel> {
    match req.dev {
        Some(dev) if !dev.is_empty() => {}
        _ => {
            return Err(Error::DegenerateSplit {
                strategy: "-".into(),
                k: req.k.unwrap_or(0),
                reason: "empty dev set".into(),
            })
        }
    }
    fit(spec, req)
}

/// Train without a dev set; the checkpoint is the final step.
pub fn train_full(spec: &LearnerSpec, req: TrainRequest<'_>) -> Result<TrainedModel> {
    fit(spec, TrainRequest { dev: None, ..req })
}

fn fit(spec: &LearnerSpec, req: TrainRequest<'_>) -> Result<TrainedModel> {
    spec.validate()?;
    if req.train.is_empty() && !matches!(spec, LearnerSpec::Oracle(_)) {
        return Err(Error::EmptyInput("empty training set"));
    }
    let meta = |step| CheckpointMeta {
        step,
        h: req.h.clone(),
        k: req.k,
        seed: req.seed,
    };
    match spec {
        LearnerSpec::Oracle(oracle) => {
            let predictor = Predictor::Oracle {
                spec: oracle.clone(),
                h: req.h.clone(),
                seed: req.seed,
            };
            let best = match req.dev {
                Some(dev) => Some(oracle.observe(req.h, dev.len(), req.seed, "dev")?),
                None => {
                    oracle.true_score(req.h)?;
                    None
                }
            };
            Ok(TrainedModel {
                predictor,
                num_classes: req.num_classes,
                best_dev_score: best,
                checkpoint: meta(0),
                trajectory: best.map(|s| vec![(0, s)]).unwrap_or_default(),
            })
        }
        LearnerSpec::NearestCentroid { temperature } => {
            let dim = req.train[0].features.len();
            let map = FeatureMap::from_pattern(hyper(req.h, "pattern", Some(0.0))?, dim)?;
            let inputs = noisy_inputs(&req, &map, 0);
            let mut sums = vec![vec![0.0; map.out_dim()]; req.num_classes];
            let mut counts = vec![0usize; req.num_classes];
            for (z, ex) in inputs.iter().zip(req.train) {
                let y = ex.label.ok_or(Error::EmptyInput("training example without a label"))?;
                counts[y] += 1;
                for (s, v) in sums[y].iter_mut().zip(z) {
                    *s += v;
                }
            }
            let centroids = sums
                .into_iter()
                .zip(&counts)
                .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
                .collect();
            let model = TrainedModel {
                predictor: Predictor::Centroid {
                    map,
                    centroids,
                    temperature: *temperature,
                },
                num_classes: req.num_classes,
                best_dev_score: None,
                checkpoint: meta(0),
                trajectory: Vec::new(),
            };
            match req.dev {
                Some(dev) => {
                    let s = model.evaluate(dev, req.metric, "dev")?;
                    Ok(TrainedModel {
                        best_dev_score: Some(s),
                        trajectory: vec![(0, s)],
                        ..model
                    })
                }
                None => Ok(model),
            }
        }
        LearnerSpec::LogregGd { lr_scale, l2 } => fit_logreg(&req, *lr_scale, *l2, meta),
    }
}

/// Training inputs after the feature map, with the zeroing mask for `step`
/// applied when input noise is on.
fn noisy_inputs(req: &TrainRequest<'_>, map: &FeatureMap, step: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = req.train.iter().map(|e| map.apply(&e.features)).collect();
    if req.input_noise > 0.0 {
        let mut rng = rng_from(derive_seed(req.seed, &["input-noise", &step.to_string()]));
        for z in &mut out {
            for v in z.iter_mut() {
                if rng.gen::<f64>() < req.input_noise {
                    *v = 0.0;
                }
            }
        }
    }
    out
}

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (biases excluded), and its
/// gradient with the same shape as `weights`.
pub fn logreg_loss_and_gradient(weights: &[Vec<f64>], inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> (f64, Vec<Vec<f64>>) {
    let n = inputs.len() as f64;
    let mut grad: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut loss = 0.0;
    for (z, &y) in inputs.iter().zip(labels) {
        let p = softmax(&linear_logits(weights, z));
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        for (c, g) in grad.iter_mut().enumerate() {
            let err = p[c] - if c == y { 1.0 } else { 0.0 };
            let (gb, gw) = g.split_last_mut().unwrap();
            for (gj, zj) in gw.iter_mut().zip(z) {
                *gj += err * zj;
            }
            *gb += err;
        }
    }
    loss /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        for v in g.iter_mut() {
            *v /= n;
        }
        let last = w.len() - 1;
        for j in 0..last {
            g[j] += l2 * w[j];
            loss += 0.5 * l2 * w[j] * w[j];
        }
    }
    (loss, grad)
}

/// Steps between dev evaluations: `max(1, round(eval_frequency * max_steps))`.
pub fn eval_interval(eval_frequency: f64, max_steps: usize) -> usize {
    ((eval_frequency * max_steps as f64).round() as usize).max(1)
}

fn fit_logreg(req: &TrainRequest<'_>, lr_scale: f64, l2: f64, meta: impl Fn(usize) -> CheckpointMeta) -> Result<TrainedModel> {
    let dim = req.train[0].features.len();
    let map = FeatureMap::from_pattern(hyper(req.h, "pattern", Some(0.0))?, dim)?;
    let lr = hyper(req.h, "learning_rate", None)? * lr_scale;
    let max_steps = hyper(req.h, "max_steps", None)?;
    if !(max_steps >= 1.0) || max_steps.fract() != 0.0 {
        return Err(Error::config(format!("max_steps must be a positive integer, got {max_steps}")));
    }
    let max_steps = max_steps as usize;
    let every = eval_interval(hyper(req.h, "eval_frequency", Some(0.04))?, max_steps);
    let labels: Vec<usize> = req
        .train
        .iter()
        .map(|e| e.label.ok_or(Error::EmptyInput("training example without a label")))
        .collect::<Result<_>>()?;

    let clean = noisy_inputs(&TrainRequest { input_noise: 0.0, ..*req }, &map, 0);
    let mut weights = vec![vec![0.0; map.out_dim() + 1]; req.num_classes];
    let mut best: Option<(usize, f64, Vec<Vec<f64>>)> = None;
    let mut trajectory = Vec::new();

    for step in 1..=max_steps {
        let inputs = if req.input_noise > 0.0 {
            noisy_inputs(req, &map, step)
        } else {
            clean.clone()
        };
        let (_, grad) = logreg_loss_and_gradient(&weights, &inputs, &labels, l2);
        for (w, g) in weights.iter_mut().zip(&grad) {
            for (wj, gj) in w.iter_mut().zip(g) {
                *wj -= lr * gj;
            }
        }
        if let Some(dev) = req.dev {
            if step % every == 0 || step == max_steps {
                let probe = TrainedModel {
                    predictor: Predictor::Linear {
                        map: map.clone(),
                        weights: weights.clone(),
                    },
                    num_classes: req.num_classes,
                    best_dev_score: None,
                    checkpoint: meta(step),
                    trajectory: Vec::new(),
                };
                let s = probe.evaluate(dev, req.metric, "dev")?;
                trajectory.push((step, s));
                // strict improvement only: ties keep the earliest step
                if best.as_ref().map_or(true, |(_, b, _)| s > *b) {
                    best = Some((step, s, weights.clone()));
                }
            }
        }
    }

    let (step, dev_score, weights) = match best {
        Some((step, s, w)) => (step, Some(s), w),
        None => (max_steps, None, weights),
    };
    Ok(TrainedModel {
        predictor: Predictor::Linear { map, weights },
        num_classes: req.num_classes,
        best_dev_score: dev_score,
        checkpoint: meta(step),
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_task, SyntheticTaskConfig};

    fn point(pairs: &[(&str, f64)]) -> HyperPoint {
        HyperPoint::new(pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect())
    }

    #[test]
    fn grid_order_is_row_major() {
        let space = HyperSpace::new(vec![
            HyperDim { name: "a".into(), values: vec![1.0, 2.0] },
            HyperDim { name: "b".into(), values: vec![10.0, 20.0, 30.0] },
        ])
        .unwrap();
        let pts: Vec<String> = space.points().iter().map(|p| p.token()).collect();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], "a=1;b=10");
        assert_eq!(pts[1], "a=1;b=20");
        assert_eq!(pts[3], "a=2;b=10");
        assert!(space.points().iter().all(|p| space.contains(p)));
    }

    #[test]
    fn space_rejects_bad_dims() {
        let d = |n: &str, v: Vec<f64>| HyperDim { name: n.into(), values: v };
        assert!(HyperSpace::new(vec![]).is_err());
        assert!(HyperSpace::new(vec![d("a", vec![])]).is_err());
        assert!(HyperSpace::new(vec![d("a", vec![1.0]), d("a", vec![2.0])]).is_err());
        assert!(HyperSpace::new(vec![d("a=b", vec![1.0])]).is_err());
    }

    #[test]
    fn point_token_round_trips() {
        let h = point(&[("learning_rate", 5e-6), ("max_steps", 250.0), ("pattern", 3.0)]);
        assert_eq!(HyperPoint::parse(&h.token()).unwrap(), h);
    }

    #[test]
    fn feature_maps() {
        assert_eq!(FeatureMap::from_pattern(0.0, 3).unwrap().apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(FeatureMap::from_pattern(1.0, 3).unwrap().apply(&[1.0, 2.0, 3.0]), vec![2.0, 3.0]);
        assert_eq!(FeatureMap::from_pattern(2.0, 2).unwrap().apply(&[1.0, 2.0]), vec![1.0]);
        assert!(FeatureMap::from_pattern(0.5, 2).is_err());
    }

    #[test]
    fn bundled_oracle_has_unique_documented_argmax() {
        let oracle = OracleSpec::bundled(0.0);
        let space = oracle.space().unwrap();
        let mut scores: Vec<(f64, HyperPoint)> = space
            .points()
            .into_iter()
            .map(|h| (oracle.true_score(&h).unwrap(), h))
            .collect();
        scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        assert!(scores[0].0 > scores[1].0);
        assert_eq!(scores[0].1, OracleSpec::bundled_argmax());
        for w in scores.windows(2) {
            assert!(w[0].0 != w[1].0, "tie between {} and {}", w[0].1, w[1].1);
        }
    }

    #[test]
    fn oracle_zero_noise_reports_true_score() {
        let oracle = OracleSpec::bundled(0.0);
        let h = OracleSpec::bundled_argmax();
        let dev_ex = Example::new(vec![0.0], Some(0));
        let dev = vec![&dev_ex; 16];
        let model = train(
            &LearnerSpec::Oracle(oracle.clone()),
            TrainRequest {
                train: &[],
                dev: Some(&dev),
                h: &h,
                seed: 3,
                num_classes: 2,
                metric: Metric::Accuracy,
                input_noise: 0.0,
                k: Some(0),
            },
        )
        .unwrap();
        assert_eq!(model.best_dev_score, Some(oracle.true_score(&h).unwrap()));
    }

    #[test]
    fn oracle_noise_ignores_flat_dimensions() {
        let mut oracle = OracleSpec::bundled(0.5);
        oracle.dims.push(OracleDim { name: "batch".into(), values: vec![8.0, 16.0], effects: vec![0.0, 0.0] });
        let h = OracleSpec::bundled_argmax().with("batch", 8.0);
        let a = oracle.observe(&h, 16, 1, "dev").unwrap();
        let b = oracle.observe(&h.with("batch", 16.0), 16, 1, "dev").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, oracle.observe(&h, 16, 2, "dev").unwrap());
        assert_ne!(a, oracle.observe(&h, 16, 1, "test").unwrap());
    }

    fn blobs() -> crate::data::TaskBundle {
        generate_synthetic_task(&SyntheticTaskConfig::default()).unwrap()
    }

    fn req<'a>(train: &'a [&'a Example], dev: &'a [&'a Example], h: &'a HyperPoint) -> TrainRequest<'a> {
        TrainRequest {
            train,
            dev: Some(dev),
            h,
            seed: 11,
            num_classes: 2,
            metric: Metric::Accuracy,
            input_noise: 0.0,
            k: Some(0),
        }
    }

    #[test]
    fn nearest_centroid_separates_blobs() {
        let task = blobs();
        let train_set = task.labeled.all();
        let test = task.test.all();
        let h = point(&[("pattern", 0.0)]);
        let model = train(&LearnerSpec::nearest_centroid(), req(&train_set, &train_set, &h)).unwrap();
        let acc = model.evaluate(&test, Metric::Accuracy, "test").unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
        for ex in test.iter().take(20) {
            let p = model.predict_proba(&ex.features);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn logreg_checkpoint_is_best_and_earliest() {
        let task = blobs();
        let labeled = task.labeled.all();
        let (tr, dv) = labeled.split_at(32);
        let h = point(&[("learning_rate", 1e-5), ("max_steps", 250.0), ("eval_frequency", 0.02), ("pattern", 0.0)]);
        let model = train(&LearnerSpec::logreg(), req(tr, dv, &h)).unwrap();
        assert_eq!(model.trajectory.len(), 50);
        let max = model.trajectory.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(model.best_dev_score, Some(max));
        let first = model.trajectory.iter().find(|t| t.1 == max).unwrap().0;
        assert_eq!(model.checkpoint.step, first);
        assert_eq!(model.evaluate(dv, Metric::Accuracy, "dev").unwrap(), max);
        let test = task.test.all();
        assert!(model.evaluate(&test, Metric::Accuracy, "test").unwrap() > 0.9);
    }

    #[test]
    fn training_is_pure() {
        let task = blobs();
        let labeled = task.labeled.all();
        let (tr, dv) = labeled.split_at(40);
        let h = point(&[("learning_rate", 5e-6), ("max_steps", 50.0), ("pattern", 1.0)]);
        let mut r = req(tr, dv, &h);
        r.input_noise = 0.05;
        let a = train(&LearnerSpec::logreg(), r).unwrap();
        let b = train(&LearnerSpec::logreg(), r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_rate_matches_clean_training() {
        let task = blobs();
        let labeled = task.labeled.all();
        let (tr, dv) = labeled.split_at(40);
        let h = point(&[("learning_rate", 5e-6), ("max_steps", 60.0)]);
        let clean = train(&LearnerSpec::logreg(), req(tr, dv, &h)).unwrap();
        let noisy = train(&LearnerSpec::logreg(), TrainRequest { input_noise: 0.0, ..req(tr, dv, &h) }).unwrap();
        assert_eq!(clean, noisy);
    }

    #[test]
    fn logreg_loss_non_increasing_for_small_lr() {
        let task = blobs();
        let xs: Vec<Vec<f64>> = task.labeled.examples().iter().map(|e| e.features.clone()).collect();
        let ys = task.labeled.labels();
        let mut w = vec![vec![0.0; 3]; 2];
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let (loss, g) = logreg_loss_and_gradient(&w, &xs, &ys, 0.01);
            assert!(loss <= prev + 1e-12);
            prev = loss;
            for (wr, gr) in w.iter_mut().zip(&g) {
                for (a, b) in wr.iter_mut().zip(gr) {
                    *a -= 0.05 * b;
                }
            }
        }
    }

    #[test]
    fn empty_dev_is_degenerate() {
        let task = blobs();
        let tr = task.labeled.all();
        let h = point(&[("pattern", 0.0)]);
        let err = train(&LearnerSpec::nearest_centroid(), req(&tr, &[], &h)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit { .. }));
    }

    #[test]
    fn identity_embedder_returns_features() {
        let ex = Example::new(vec![1.5, -2.0], None);
        assert_eq!(embed(&IdentityEmbedder, &ex), ex.features);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn token_round_trips(values in proptest::collection::vec(-1e9f64..1e9, 1..5)) {
                let h = HyperPoint::new(values.iter().enumerate().map(|(i, v)| (format!("d{i}"), *v)).collect());
                prop_assert_eq!(HyperPoint::parse(&h.token()).unwrap(), h);
            }

            #[test]
            fn feature_map_stays_in_range(p in 0usize..20, dim in 1usize..10) {
                let map = FeatureMap::from_pattern(p as f64, dim).unwrap();
                prop_assert_eq!(map.out_dim(), dim.saturating_sub(p).max(1));
                let x: Vec<f64> = (0..dim).map(|i| i as f64).collect();
                prop_assert!(map.apply(&x).iter().all(|v| *v >= 0.0 && *v < dim as f64));
            }
        }
    }
}
