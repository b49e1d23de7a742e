//! Data-split strategies over the labeled set.
//!
//! Every strategy returns a [`SplitPlan`] of index-only [`DataSplit`]s.
//! Expected sizes for `N` labeled examples, `K` runs and ratio `r`:
//!
//! | strategy | train                     | dev            |
//! |----------|---------------------------|----------------|
//! | CV       | `(K-1) N / K`             | `N / K`        |
//! | MDL      | `N/2 + N (k-1) / (2K)`    | `N / (2K)`     |
//! | BAG      | `N r` draws               | `>= N (1-r)`   |
//! | RAND     | `N r`                     | `N (1-r)`      |
//! | MS       | `N r`                     | `N (1-r)`      |
//! | LOOCV    | `N - 1`                   | `1`            |
//!
//! When `K` does not divide the partitioned count, fold sizes differ by at
//! most one. `N r` is rounded down and the dev side of RAND and MS takes the
//! remaining `N - floor(N r)`.
//!
//! Seeds: CV and MDL draw one permutation from `derive_seed(seed, [tag])`.
//! BAG, RAND and MS draw split `k` from `derive_seed(seed, [tag, k])`, which
//! makes a K-plan a prefix of any K'-plan with K' > K.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::Embedder;
use crate::seed::{derive_seed, fingerprint, rng_from};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "MDL")]
    Mdl,
    #[serde(rename = "BAG")]
    Bag,
    #[serde(rename = "RAND")]
    Rand,
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "LOOCV")]
    Loocv,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Cv,
        Strategy::Mdl,
        Strategy::Bag,
        Strategy::Rand,
        Strategy::Mi,
        Strategy::Ms,
        Strategy::Loocv,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Cv => "CV",
            Strategy::Mdl => "MDL",
            Strategy::Bag => "BAG",
            Strategy::Rand => "RAND",
            Strategy::Mi => "MI",
            Strategy::Ms => "MS",
            Strategy::Loocv => "LOOCV",
        }
    }

    /// Whether the strategy is parameterised by a split ratio.
    pub fn uses_ratio(self) -> bool {
        matches!(self, Strategy::Bag | Strategy::Rand | Strategy::Ms)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown strategy {s:?}")))
    }
}

/// One (train, dev) pair. Indices refer to the labeled dataset. Dev indices
/// are sorted and unique; train indices are sorted and repeat only under
/// bagging.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSplit {
    pub k: usize,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
}

impl DataSplit {
    fn new(k: usize, mut train: Vec<usize>, mut dev: Vec<usize>) -> Self {
        train.sort_unstable();
        dev.sort_unstable();
        Self { k, train, dev }
    }

    /// Identity of the split's contents, used to key per-run seeds.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.train) ^ fingerprint(&self.dev).rotate_left(17)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPlan {
    pub strategy: Strategy,
    pub num_runs: usize,
    pub ratio: Option<f64>,
    pub seed: u64,
    pub splits: Vec<DataSplit>,
    pub warnings: Vec<String>,
}

impl SplitPlan {
    fn new(strategy: Strategy, ratio: Option<f64>, seed: u64, splits: Vec<DataSplit>) -> Self {
        Self {
            strategy,
            num_runs: splits.len(),
            ratio,
            seed,
            splits,
            warnings: Vec::new(),
        }
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// strategy MS
    /// K 2
    /// r 0.5
    /// seed 7
    /// # warning: ...
    /// train 0 2 3
    /// dev 1 4 5
    /// train ...
    /// dev ...
    /// ```
    ///
    /// `r -` marks a strategy without a ratio.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "strategy {}", self.strategy).unwrap();
        writeln!(out, "K {}", self.num_runs).unwrap();
        match self.ratio {
            Some(r) => writeln!(out, "r {r}").unwrap(),
            None => writeln!(out, "r -").unwrap(),
        }
        writeln!(out, "seed {}", self.seed).unwrap();
        for w in &self.warnings {
            writeln!(out, "# warning: {w}").unwrap();
        }
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        for s in &self.splits {
            writeln!(out, "train {}", join(&s.train).trim_end()).unwrap();
            writeln!(out, "dev {}", join(&s.dev).trim_end()).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let mut it = lines.into_iter().peekable();
        let mut field = |name: &str| -> Result<(usize, String)> {
            match it.next() {
                Some((n, l)) => match l.split_once(' ') {
                    Some((key, v)) if key == name => Ok((n, v.to_string())),
                    _ => Err(Error::parse(n, format!("expected `{name} ...`"))),
                },
                None => Err(Error::parse(0, format!("missing `{name}` line"))),
            }
        };
        let (n, v) = field("strategy")?;
        let strategy = v.parse::<Strategy>().map_err(|e| Error::parse(n, e.to_string()))?;
        let (n, v) = field("K")?;
        let num_runs = v.parse::<usize>().map_err(|e| Error::parse(n, e.to_string()))?;
        let (n, v) = field("r")?;
        let ratio = match v.as_str() {
            "-" => None,
            s => Some(s.parse::<f64>().map_err(|e| Error::parse(n, e.to_string()))?),
        };
        let (n, v) = field("seed")?;
        let seed = v.parse::<u64>().map_err(|e| Error::parse(n, e.to_string()))?;

        let mut warnings = Vec::new();
        let mut splits = Vec::new();
        let mut pending: Option<Vec<usize>> = None;
        let mut last_line = n;
        for (n, line) in it {
            last_line = n;
            if let Some(w) = line.strip_prefix("# warning: ") {
                warnings.push(w.to_string());
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let idx = rest
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(n, format!("bad index: {e}")))?;
            match (key, pending.take()) {
                ("train", None) => pending = Some(idx),
                ("dev", Some(train)) => splits.push(DataSplit {
                    k: splits.len(),
                    train,
                    dev: idx,
                }),
                _ => return Err(Error::parse(n, format!("unexpected `{key}` line"))),
            }
        }
        if pending.is_some() {
            return Err(Error::parse(last_line, "train line without a matching dev line"));
        }
        if splits.len() != num_runs {
            return Err(Error::parse(
                last_line,
                format!("header says K={num_runs} but {} splits follow", splits.len()),
            ));
        }
        Ok(Self {
            strategy,
            num_runs,
            ratio,
            seed,
            splits,
            warnings,
        })
    }
}

fn check_runs(strategy: Strategy, k: usize, max: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::config(format!("{strategy} needs K >= 2, got {k}")));
    }
    if k > max {
        return Err(Error::config(format!("{strategy} needs K <= {max}, got {k}")));
    }
    Ok(())
}

fn check_ratio(strategy: Strategy, r: f64, allow_one: bool) -> Result<()> {
    let ok = r > 0.0 && (r < 1.0 || (allow_one && r == 1.0));
    if !ok {
        let range = if allow_one { "(0, 1]" } else { "(0, 1)" };
        return Err(Error::config(format!("{strategy} needs r in {range}, got {r}")));
    }
    Ok(())
}

/// Partition `items` into `k` contiguous folds whose sizes differ by at
/// most one; the first `len % k` folds get the extra element.
fn balanced_folds(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let base = items.len() / k;
    let extra = items.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        out.push(items[start..start + size].to_vec());
        start += size;
    }
    out
}

fn permutation(n: usize, seed: u64, tags: &[&str]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(derive_seed(seed, tags)));
    perm
}

fn complement(n: usize, present: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &i in present {
        mask[i] = true;
    }
    (0..n).filter(|&i| !mask[i]).collect()
}

/// K-fold cross validation: dev sets are the folds of one seeded permutation.
pub fn make_cv(n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    check_runs(Strategy::Cv, k, n)?;
    let folds = balanced_folds(&permutation(n, seed, &["CV"]), k);
    let splits = folds
        .iter()
        .enumerate()
        .map(|(j, dev)| DataSplit::new(j, complement(n, dev), dev.clone()))
        .collect();
    Ok(SplitPlan::new(Strategy::Cv, None, seed, splits))
}

/// Half the data is joint training data; the other half is cut into K folds
/// and split `k` trains on the joint half plus folds before `k`.
pub fn make_mdl(n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    if n % 2 != 0 {
        return Err(Error::config(format!("MDL needs an even number of examples, got {n}")));
    }
    check_runs(Strategy::Mdl, k, n / 2)?;
    let perm = permutation(n, seed, &["MDL"]);
    let (joint, rest) = perm.split_at(n / 2);
    let folds = balanced_folds(rest, k);
    let mut train = joint.to_vec();
    let mut splits = Vec::with_capacity(k);
    for (j, fold) in folds.iter().enumerate() {
        splits.push(DataSplit::new(j, train.clone(), fold.clone()));
        train.extend_from_slice(fold);
    }
    Ok(SplitPlan::new(Strategy::Mdl, None, seed, splits))
}

/// Bagging: `floor(N r)` draws with replacement; dev is the out-of-bag set.
pub fn make_bag(n: usize, k: usize, r: f64, seed: u64) -> Result<SplitPlan> {
    check_ratio(Strategy::Bag, r, true)?;
    if k < 1 {
        return Err(Error::config("BAG needs K >= 1"));
    }
    let draws = (n as f64 * r).floor() as usize;
    if draws == 0 {
        return Err(Error::config(format!("BAG with N={n}, r={r} draws no examples")));
    }
    let mut splits = Vec::with_capacity(k);
    for j in 0..k {
        let mut rng = rng_from(derive_seed(seed, &["BAG", &j.to_string()]));
        let train: Vec<usize> = (0..draws).map(|_| rng.gen_range(0..n)).collect();
        let dev = complement(n, &train);
        if dev.is_empty() {
            return Err(Error::DegenerateSplit {
                strategy: "BAG".into(),
                k: j,
                reason: "every example was drawn; the out-of-bag dev set is empty".into(),
            });
        }
        splits.push(DataSplit::new(j, train, dev));
    }
    Ok(SplitPlan::new(Strategy::Bag, Some(r), seed, splits))
}

fn train_dev_sizes(strategy: Strategy, n: usize, r: f64) -> Result<(usize, usize)> {
    check_ratio(strategy, r, false)?;
    let n_train = (n as f64 * r).floor() as usize;
    let n_dev = n - n_train;
    if n_train == 0 || n_dev == 0 {
        return Err(Error::config(format!(
            "{strategy} with N={n}, r={r} leaves an empty train or dev set"
        )));
    }
    Ok((n_train, n_dev))
}

/// Random sampling: train and dev are two independent samples without
/// replacement, so they may overlap.
pub fn make_rand(n: usize, k: usize, r: f64, seed: u64) -> Result<SplitPlan> {
    let (n_train, n_dev) = train_dev_sizes(Strategy::Rand, n, r)?;
    if k < 1 {
        return Err(Error::config("RAND needs K >= 1"));
    }
    let splits = (0..k)
        .map(|j| {
            let mut rng = rng_from(derive_seed(seed, &["RAND", &j.to_string()]));
            let train = sample(&mut rng, n, n_train).into_vec();
            let dev = sample(&mut rng, n, n_dev).into_vec();
            DataSplit::new(j, train, dev)
        })
        .collect();
    Ok(SplitPlan::new(Strategy::Rand, Some(r), seed, splits))
}

/// Multi-splits: an independent seeded permutation per split, cut at
/// `floor(N r)`. `K = 1` is the classic single fixed split.
pub fn make_ms(n: usize, k: usize, r: f64, seed: u64) -> Result<SplitPlan> {
    let (n_train, _) = train_dev_sizes(Strategy::Ms, n, r)?;
    if k < 1 {
        return Err(Error::config("MS needs K >= 1"));
    }
    let splits = (0..k)
        .map(|j| {
            let perm = permutation(n, seed, &["MS", &j.to_string()]);
            let (train, dev) = perm.split_at(n_train);
            DataSplit::new(j, train.to_vec(), dev.to_vec())
        })
        .collect();
    Ok(SplitPlan::new(Strategy::Ms, Some(r), seed, splits))
}

/// Leave-one-out: split `k` holds out example `k`.
pub fn make_loocv(n: usize) -> Result<SplitPlan> {
    if n < 2 {
        return Err(Error::config(format!("LOOCV needs N >= 2, got {n}")));
    }
    let splits = (0..n)
        .map(|j| DataSplit::new(j, (0..n).filter(|&i| i != j).collect(), vec![j]))
        .collect();
    Ok(SplitPlan::new(Strategy::Loocv, None, 0, splits))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Two-means (Lloyd) from the given initial centers. Returns a membership
/// flag per point (`true` = cluster of the first center).
fn two_means(points: &[Vec<f64>], init: (usize, usize)) -> Vec<bool> {
    let mut c0 = points[init.0].clone();
    let mut c1 = points[init.1].clone();
    let mut assign: Vec<bool> = Vec::new();
    for _ in 0..100 {
        let next: Vec<bool> = points.iter().map(|p| sq_dist(p, &c0) <= sq_dist(p, &c1)).collect();
        if next == assign {
            break;
        }
        assign = next;
        let centroid = |side: bool| -> Option<Vec<f64>> {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, a)| **a == side).map(|(p, _)| p).collect();
            if members.is_empty() {
                return None;
            }
            let mut c = vec![0.0; points[0].len()];
            for m in &members {
                for (ci, v) in c.iter_mut().zip(m.iter()) {
                    *ci += v;
                }
            }
            Some(c.into_iter().map(|v| v / members.len() as f64).collect())
        };
        match (centroid(true), centroid(false)) {
            (Some(a), Some(b)) => {
                c0 = a;
                c1 = b;
            }
            _ => break,
        }
    }
    assign
}

/// Farthest pair over all points (ties: lexicographically smallest pair).
fn farthest_pair(points: &[Vec<f64>]) -> (usize, usize, f64) {
    let mut best = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = sq_dist(&points[i], &points[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    best
}

/// Farthest point from `from` (ties: smallest index).
fn farthest_from(points: &[Vec<f64>], from: usize) -> (usize, f64) {
    let mut best = (from, -1.0);
    for (j, p) in points.iter().enumerate() {
        let d = sq_dist(p, &points[from]);
        if d > best.1 {
            best = (j, d);
        }
    }
    best
}

/// Model-informed splitting: 2-means over embeddings; each clustering yields
/// a split and its role-swapped mirror.
///
/// Clustering `m = 0` starts from the globally farthest pair. Clustering
/// `m > 0` starts from a seeded random point and the point farthest from it.
/// In each pair of splits the larger cluster trains first.
pub fn make_mi(dataset: &Dataset, k: usize, embedder: &dyn Embedder, seed: u64) -> Result<SplitPlan> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::config(format!("MI needs an even K >= 2, got {k}")));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::DegenerateClustering("fewer than two examples".into()));
    }
    let points: Vec<Vec<f64>> = dataset.examples().iter().map(|e| embedder.embed(e)).collect();
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::config("embedder returned vectors of differing dimension"));
    }
    let (a0, b0, d0) = farthest_pair(&points);
    if d0 <= 0.0 {
        return Err(Error::DegenerateClustering("all embeddings are identical".into()));
    }

    let mut splits = Vec::with_capacity(k);
    for m in 0..k / 2 {
        let init = if m == 0 {
            (a0, b0)
        } else {
            let mut rng = rng_from(derive_seed(seed, &["MI", &m.to_string()]));
            let a = rng.gen_range(0..n);
            let (b, d) = farthest_from(&points, a);
            if d <= 0.0 {
                (a0, b0)
            } else {
                (a, b)
            }
        };
        let assign = two_means(&points, init);
        let first: Vec<usize> = (0..n).filter(|&i| assign[i]).collect();
        let second: Vec<usize> = (0..n).filter(|&i| !assign[i]).collect();
        if first.is_empty() || second.is_empty() {
            return Err(Error::DegenerateClustering(format!("clustering {m} produced an empty cluster")));
        }
        let (big, small) = if first.len() > second.len() || (first.len() == second.len() && first[0] < second[0]) {
            (first, second)
        } else {
            (second, first)
        };
        splits.push(DataSplit::new(2 * m, big.clone(), small.clone()));
        splits.push(DataSplit::new(2 * m + 1, small, big));
    }
    Ok(SplitPlan::new(Strategy::Mi, None, seed, splits))
}

/// Uniform entry point. A ratio given to a strategy without one is ignored
/// and recorded as a warning; LOOCV ignores `k` the same way.
pub fn make_splits(
    strategy: Strategy,
    dataset: &Dataset,
    k: usize,
    ratio: Option<f64>,
    seed: u64,
    embedder: Option<&dyn Embedder>,
) -> Result<SplitPlan> {
    let n = dataset.len();
    let need_ratio = || ratio.ok_or_else(|| Error::config(format!("{strategy} needs a split ratio r")));
    let mut warnings = Vec::new();
    if let (false, Some(r)) = (strategy.uses_ratio(), ratio) {
        warnings.push(format!("{strategy} does not use a split ratio; r={r} ignored"));
    }
    let mut plan = match strategy {
        Strategy::Cv => make_cv(n, k, seed)?,
        Strategy::Mdl => make_mdl(n, k, seed)?,
        Strategy::Bag => make_bag(n, k, need_ratio()?, seed)?,
        Strategy::Rand => make_rand(n, k, need_ratio()?, seed)?,
        Strategy::Ms => make_ms(n, k, need_ratio()?, seed)?,
        Strategy::Mi => make_mi(dataset, k, embedder.unwrap_or(&crate::learners::IdentityEmbedder), seed)?,
        Strategy::Loocv => {
            if k != n {
                warnings.push(format!("LOOCV uses K=N={n}; K={k} ignored"));
            }
            let mut p = make_loocv(n)?;
            p.seed = seed;
            p
        }
    };
    plan.warnings = warnings;
    Ok(plan)
}
