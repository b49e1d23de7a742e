//! Iterative self-training on top of a finished search.
//!
//! Generation 1 is the plain run: one model per split of the plan, trained
//! with the searched `h*`. Generation `g >= 2` targets
//! `ceil(N_labeled * increasing_factor^(g-1))` labeled-or-pseudo-labeled
//! examples: the previous generation's models pseudo-label
//! `target - N_labeled` pool examples, and each split retrains on its own
//! train indices plus those additions, still checkpointing on its dev set.
//!
//! Single-split labeling uses split k's own model for split k. Cross-split
//! labeling averages the probability vectors of models trained on different
//! splits; with `sample_ratio < 1` each pool example is scored by a seeded
//! subset of `max(1, round(sample_ratio * K))` of them.
//!
//! Noisy training zeroes each input coordinate with probability
//! `noise_rate` at every step, in student generations only.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example, TaskBundle};
use crate::error::{Error, Result};
use crate::learners::{argmax, train, HyperPoint, LearnerSpec, TrainRequest, TrainedModel};
use crate::metrics::{mean_std, MeanStd};
use crate::search::{train_on_split, SearchSettings};
use crate::seed::{derive_seed, rng_from};
use crate::splits::{DataSplit, SplitPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    Single,
    Cross,
}

fn default_generations() -> usize {
    3
}
fn default_pool() -> usize {
    500
}
fn default_factor() -> f64 {
    3.0
}
fn default_ratio() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfTrainConfig {
    #[serde(default = "default_generations")]
    pub generations: usize,
    /// Maximum number of unlabeled examples used (taken from the front of
    /// the pool).
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_factor")]
    pub increasing_factor: f64,
    #[serde(default = "default_ratio")]
    pub sample_ratio: f64,
    pub labeling: Labeling,
    #[serde(default)]
    pub noisy: bool,
    #[serde(default = "default_noise")]
    pub noise_rate: f64,
    /// Label with the dev-best pattern only, instead of every pattern in
    /// `pattern_values`.
    #[serde(default = "default_true")]
    pub best_config_only: bool,
    /// Pattern values trained alongside `h*` to form the labeling ensemble.
    /// Empty: label with the `h*` models only.
    #[serde(default)]
    pub pattern_values: Vec<f64>,
}

impl SelfTrainConfig {
    /// Iterative self-training with the re-evaluation constants: pool 500,
    /// factor 3.0, sample ratio 1.0 (single) or 2/3 (cross).
    pub fn ipet(labeling: Labeling) -> Self {
        Self {
            generations: default_generations(),
            pool_size: default_pool(),
            increasing_factor: default_factor(),
            sample_ratio: match labeling {
                Labeling::Single => 1.0,
                Labeling::Cross => 2.0 / 3.0,
            },
            labeling,
            noisy: false,
            noise_rate: default_noise(),
            best_config_only: true,
            pattern_values: Vec::new(),
        }
    }

    /// As [`SelfTrainConfig::ipet`] with input noise at rate 0.05.
    pub fn noisy_student(labeling: Labeling) -> Self {
        Self {
            noisy: true,
            ..Self::ipet(labeling)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::config("self-training needs at least one generation"));
        }
        if !(self.increasing_factor >= 1.0 && self.increasing_factor.is_finite()) {
            return Err(Error::config("increasing_factor must be >= 1"));
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return Err(Error::config("sample_ratio must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::config("noise_rate must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn target_size(&self, n_labeled: usize, generation: usize) -> usize {
        (n_labeled as f64 * self.increasing_factor.powi(generation as i32 - 1)).ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabel {
    /// Index into the unlabeled pool.
    pub index: usize,
    pub label: usize,
    pub confidence: f64,
}

pub trait ProbabilisticClassifier: Sync {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64>;
}

impl ProbabilisticClassifier for TrainedModel {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        TrainedModel::predict_proba(self, x)
    }
}

/// Mean of member probability vectors.
pub struct Ensemble<'a> {
    pub members: Vec<&'a TrainedModel>,
}

impl ProbabilisticClassifier for Ensemble<'_> {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        mean_proba(self.members.iter().map(|m| m.predict_proba(x)))
    }
}

fn mean_proba(vectors: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for v in vectors {
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b;
        }
        n += 1;
    }
    acc.into_iter().map(|a| a / n as f64).collect()
}

/// Class-balanced confident selection: each class first gets up to
/// `quota / C` of its most confident examples, the remainder goes to the
/// most confident of the rest. Confidence ties break by lower index.
/// Output is sorted by pool index.
pub fn select_balanced(scored: &[(usize, Vec<f64>)], quota: usize, num_classes: usize) -> Vec<PseudoLabel> {
    let mut cands: Vec<PseudoLabel> = scored
        .iter()
        .map(|(i, p)| {
            let label = argmax(p);
            PseudoLabel {
                index: *i,
                label,
                confidence: p[label],
            }
        })
        .collect();
    cands.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.index.cmp(&b.index)));

    let per_class = quota / num_classes.max(1);
    let mut taken = vec![false; cands.len()];
    let mut counts = vec![0usize; num_classes];
    let mut out = Vec::with_capacity(quota);
    for (j, c) in cands.iter().enumerate() {
        if c.label < num_classes && counts[c.label] < per_class {
            counts[c.label] += 1;
            taken[j] = true;
            out.push(*c);
        }
    }
    for (j, c) in cands.iter().enumerate() {
        if out.len() >= quota {
            break;
        }
        if !taken[j] {
            out.push(*c);
        }
    }
    out.truncate(quota);
    out.sort_by_key(|p| p.index);
    out
}

fn check_quota(pool: &Dataset, quota: usize) -> Result<()> {
    if quota > pool.len() {
        return Err(Error::config(format!(
            "pseudo-label quota {quota} exceeds the pool of {}",
            pool.len()
        )));
    }
    Ok(())
}

pub fn pseudo_label_single(model: &dyn ProbabilisticClassifier, pool: &Dataset, quota: usize) -> Result<Vec<PseudoLabel>> {
    check_quota(pool, quota)?;
    let scored: Vec<(usize, Vec<f64>)> = pool
        .examples()
        .par_iter()
        .enumerate()
        .map(|(i, e)| (i, model.predict_proba(&e.features)))
        .collect();
    Ok(select_balanced(&scored, quota, pool.num_classes()))
}

/// Number of models that score each pool example under `sample_ratio`.
pub fn models_per_example(k: usize, sample_ratio: f64) -> usize {
    ((sample_ratio * k as f64).round() as usize).clamp(1, k)
}

/// Cross-split labeling from per-model probabilities `probs[model][example]`.
fn cross_from_probs(probs: &[Vec<Vec<f64>>], num_classes: usize, quota: usize, sample_ratio: f64, seed: u64) -> Vec<PseudoLabel> {
    let k = probs.len();
    let m = models_per_example(k, sample_ratio);
    let n = probs[0].len();
    let scored: Vec<(usize, Vec<f64>)> = (0..n)
        .map(|i| {
            let p = if m == k {
                mean_proba(probs.iter().map(|pm| pm[i].clone()))
            } else {
                let mut rng = rng_from(derive_seed(seed, &["cross", &i.to_string()]));
                let mut chosen = sample(&mut rng, k, m).into_vec();
                chosen.sort_unstable();
                mean_proba(chosen.into_iter().map(|j| probs[j][i].clone()))
            };
            (i, p)
        })
        .collect();
    select_balanced(&scored, quota, num_classes)
}

pub fn pseudo_label_cross(
    models: &[&dyn ProbabilisticClassifier],
    pool: &Dataset,
    quota: usize,
    sample_ratio: f64,
    seed: u64,
) -> Result<Vec<PseudoLabel>> {
    if models.len() < 2 {
        return Err(Error::config("cross-split labeling needs at least two models"));
    }
    check_quota(pool, quota)?;
    let probs: Vec<Vec<Vec<f64>>> = models
        .iter()
        .map(|m| pool.examples().par_iter().map(|e| m.predict_proba(&e.features)).collect())
        .collect();
    Ok(cross_from_probs(&probs, pool.num_classes(), quota, sample_ratio, seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    All,
    Best,
}

/// Models trained with one configuration (a pattern value), one per split.
#[derive(Clone, Debug)]
pub struct ConfigModels {
    pub pattern: f64,
    pub dev_mean: f64,
    pub models: Vec<TrainedModel>,
}

/// `All` averages every model; `Best` averages only the models of the
/// configuration with the highest dev mean (first on ties).
pub fn best_config_ensemble(groups: &[ConfigModels], mode: EnsembleMode) -> Result<Ensemble<'_>> {
    if groups.iter().all(|g| g.models.is_empty()) {
        return Err(Error::EmptyInput("no models to ensemble"));
    }
    let members = match mode {
        EnsembleMode::All => groups.iter().flat_map(|g| g.models.iter()).collect(),
        EnsembleMode::Best => {
            let mut best = 0;
            for (i, g) in groups.iter().enumerate() {
                if g.dev_mean > groups[best].dev_mean {
                    best = i;
                }
            }
            groups[best].models.iter().collect()
        }
    };
    Ok(Ensemble { members })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    /// 1-based.
    pub generation: usize,
    /// Labeled plus pseudo-labeled examples this generation aimed for.
    pub target_size: usize,
    /// The pool ran out before `target_size` was reached.
    pub truncated: bool,
    /// Training-set size of each split's model.
    pub train_sizes: Vec<usize>,
    /// Pseudo-labeled additions per split (empty in generation 1).
    pub additions: Vec<Vec<PseudoLabel>>,
    /// Share of additions matching the pool's hidden labels, when known.
    pub pseudo_label_accuracy: Option<f64>,
    pub test_scores: Vec<f64>,
    pub test: MeanStd,
}

fn train_student(
    bundle: &TaskBundle,
    split: &DataSplit,
    extra: &[Example],
    h: &HyperPoint,
    spec: &LearnerSpec,
    settings: &SearchSettings,
    seed: u64,
    noise: f64,
) -> Result<TrainedModel> {
    let mut train_set = bundle.labeled.select(&split.train);
    train_set.extend(extra.iter());
    let dev_set = bundle.labeled.select(&split.dev);
    train(
        spec,
        TrainRequest {
            train: &train_set,
            dev: Some(&dev_set),
            h,
            seed,
            num_classes: bundle.num_classes(),
            metric: settings.metric,
            input_noise: noise,
            k: Some(split.k),
        },
    )
}

/// Run `config.generations` generations (fewer if the pool runs out).
pub fn self_train(
    bundle: &TaskBundle,
    plan: &SplitPlan,
    h_star: &HyperPoint,
    spec: &LearnerSpec,
    config: &SelfTrainConfig,
    settings: &SearchSettings,
) -> Result<Vec<GenerationRecord>> {
    config.validate()?;
    if matches!(spec, LearnerSpec::Oracle(_)) {
        return Err(Error::config("self-training needs a learner with a predictor, not the oracle"));
    }
    if config.labeling == Labeling::Cross && plan.splits.len() < 2 {
        return Err(Error::config("cross-split labeling needs K >= 2"));
    }
    let pool_n = config.pool_size.min(bundle.unlabeled.len());
    let pool = Dataset::new(
        bundle.unlabeled.role(),
        bundle.num_classes(),
        bundle.unlabeled.examples()[..pool_n].to_vec(),
    )?;
    let n_labeled = bundle.labeled.len();
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let test_set = bundle.test.all();

    // Configurations whose models label the pool. Index 0 is always h*.
    let mut configs = vec![h_star.clone()];
    for &p in &config.pattern_values {
        let h = h_star.with("pattern", p);
        if !configs.contains(&h) {
            configs.push(h);
        }
    }

    let mut records = Vec::new();
    let mut prev: Vec<ConfigModels> = Vec::new();
    for g in 1..=config.generations {
        let target = config.target_size(n_labeled, g);
        let (quota, truncated) = match target.saturating_sub(n_labeled) {
            q if q > pool_n => (pool_n, true),
            q => (q, false),
        };

        // Pseudo-label for each split from the previous generation.
        let additions: Vec<Vec<PseudoLabel>> = if g == 1 {
            vec![Vec::new(); plan.splits.len()]
        } else {
            let mode = if config.best_config_only { EnsembleMode::Best } else { EnsembleMode::All };
            workers.install(|| label_generation(&prev, &pool, quota, mode, config, settings.master_seed, g))?
        };

        let noise = if g >= 2 && config.noisy { config.noise_rate } else { 0.0 };
        let jobs: Vec<(usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..plan.splits.len()).map(move |k| (c, k)))
            .collect();
        let models: Vec<TrainedModel> = workers
            .install(|| {
                jobs.par_iter()
                    .map(|&(c, k)| {
                        let split = &plan.splits[k];
                        if g == 1 {
                            return train_on_split(bundle, plan.strategy, split, &configs[c], spec, settings, None);
                        }
                        let extra: Vec<Example> = additions[k]
                            .iter()
                            .map(|a| Example::new(pool.get(a.index).features.clone(), Some(a.label)))
                            .collect();
                        let seed = derive_seed(
                            settings.master_seed,
                            &["selftrain", &g.to_string(), &format!("{:016x}", split.fingerprint())],
                        );
                        train_student(bundle, split, &extra, &configs[c], spec, settings, seed, noise)
                    })
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .collect::<Result<_>>()?;

        let k_runs = plan.splits.len();
        let mut groups = Vec::with_capacity(configs.len());
        for (c, h) in configs.iter().enumerate() {
            let ms: Vec<TrainedModel> = models[c * k_runs..(c + 1) * k_runs].to_vec();
            let dev: Vec<f64> = ms.iter().map(|m| m.best_dev_score.unwrap()).collect();
            groups.push(ConfigModels {
                pattern: h.get("pattern").unwrap_or(0.0),
                dev_mean: mean_std(&dev)?.mean,
                models: ms,
            });
        }

        let test_scores: Vec<f64> = workers
            .install(|| {
                groups[0]
                    .models
                    .par_iter()
                    .map(|m| m.evaluate(&test_set, settings.metric, "test"))
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .collect::<Result<_>>()?;

        let pseudo_label_accuracy = match (&bundle.unlabeled_truth, g) {
            (Some(truth), 2..) => {
                let all: Vec<&PseudoLabel> = additions.iter().flatten().collect();
                (!all.is_empty()).then(|| all.iter().filter(|a| truth[a.index] == a.label).count() as f64 / all.len() as f64)
            }
            _ => None,
        };

        records.push(GenerationRecord {
            generation: g,
            target_size: n_labeled + quota,
            truncated,
            train_sizes: plan.splits.iter().zip(&additions).map(|(s, a)| s.train.len() + a.len()).collect(),
            additions,
            pseudo_label_accuracy,
            test: mean_std(&test_scores)?,
            test_scores,
        });
        prev = groups;
        if truncated {
            break;
        }
    }
    Ok(records)
}

fn label_generation(
    prev: &[ConfigModels],
    pool: &Dataset,
    quota: usize,
    mode: EnsembleMode,
    config: &SelfTrainConfig,
    master: u64,
    g: usize,
) -> Result<Vec<Vec<PseudoLabel>>> {
    let k_runs = prev[0].models.len();
    match config.labeling {
        Labeling::Single => (0..k_runs)
            .map(|k| {
                let own: Vec<ConfigModels> = prev
                    .iter()
                    .map(|c| ConfigModels {
                        pattern: c.pattern,
                        dev_mean: c.dev_mean,
                        models: vec![c.models[k].clone()],
                    })
                    .collect();
                let ens = best_config_ensemble(&own, mode)?;
                pseudo_label_single(&ens, pool, quota)
            })
            .collect(),
        Labeling::Cross => {
            let ens = best_config_ensemble(prev, mode)?;
            let probs: Vec<Vec<Vec<f64>>> = ens
                .members
                .iter()
                .map(|m| pool.examples().par_iter().map(|e| m.predict_proba(&e.features)).collect())
                .collect();
            if probs.len() < 2 {
                return Err(Error::config("cross-split labeling needs at least two models"));
            }
            Ok((0..k_runs)
                .map(|k| {
                    let seed = derive_seed(master, &["selftrain-label", &g.to_string(), &k.to_string()]);
                    cross_from_probs(&probs, pool.num_classes(), quota, config.sample_ratio, seed)
                })
                .collect())
        }
    }
}
