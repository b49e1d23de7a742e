//! Acceptance suite: one PASS/FAIL line per criterion, each checked at its
//! stated tolerance and runtime bound. Exits non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitbench::config::{ExperimentConfig, LOGREG_CONFIG};
use splitbench::learners::{logreg_loss_and_gradient, train, OracleDim, TrainRequest};
use splitbench::metrics::{sensitivity, spearman, stability_scan, ScanConfig, DEFAULT_SCAN_KS};
use splitbench::runlog::{replay, RunLog};
use splitbench::selftrain::{pseudo_label_cross, pseudo_label_single, self_train, Labeling, ProbabilisticClassifier, SelfTrainConfig};
use splitbench::splits::{make_bag, make_cv, make_loocv, make_mdl, make_ms, make_rand, DataSplit};
use splitbench::{
    generate_synthetic_task, run_audit, run_search, Error, LearnerSpec, Metric, OracleSpec, SearchSettings,
    Strategy, SyntheticTaskConfig,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn ok<T>(r: splitbench::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn set(v: &[usize]) -> BTreeSet<usize> {
    v.iter().copied().collect()
}

// 1 ------------------------------------------------------------------------

fn split_size_exactness() -> Outcome {
    let (n, k, r) = (64usize, 4usize, 0.5f64);
    let seed = 3;

    // Table formulas.
    let cv_train = (k - 1) * n / k;
    let cv_dev = n / k;
    let mdl_train: Vec<usize> = (1..=k).map(|i| n / 2 + n * (i - 1) / (2 * k)).collect();
    let mdl_dev = n / (2 * k);
    let ms_train = (n as f64 * r).floor() as usize;

    let cv = ok(make_cv(n, k, seed))?;
    ensure!(cv.splits.iter().all(|s| s.train.len() == cv_train && s.dev.len() == cv_dev), "CV sizes");
    let mdl = ok(make_mdl(n, k, seed))?;
    let got: Vec<usize> = mdl.splits.iter().map(|s| s.train.len()).collect();
    ensure!(got == mdl_train, "MDL train sizes {got:?} != {mdl_train:?}");
    ensure!(mdl.splits.iter().all(|s| s.dev.len() == mdl_dev), "MDL dev sizes");
    for plan in [ok(make_ms(n, k, r, seed))?, ok(make_rand(n, k, r, seed))?] {
        ensure!(
            plan.splits.iter().all(|s| s.train.len() == ms_train && s.dev.len() == n - ms_train),
            "{} sizes",
            plan.strategy
        );
    }
    let bag = ok(make_bag(n, k, r, seed))?;
    for s in &bag.splits {
        ensure!(s.train.len() == ms_train, "BAG draws {}", s.train.len());
        let oob: BTreeSet<usize> = (0..n).filter(|i| !s.train.contains(i)).collect();
        ensure!(set(&s.dev) == oob, "BAG dev is not the out-of-bag complement");
    }
    Ok(format!("CV {cv_train}/{cv_dev}, MDL {mdl_train:?}/{mdl_dev}, MS/RAND {ms_train}/{}, BAG {ms_train} draws", n - ms_train))
}

// 2 ------------------------------------------------------------------------

fn check_partition(splits: &[DataSplit], n: usize) -> Result<(), String> {
    let mut seen = vec![false; n];
    for s in splits {
        for &i in &s.dev {
            ensure!(!seen[i], "index {i} in two dev folds");
            seen[i] = true;
        }
        let train = set(&s.train);
        ensure!(train.len() == s.train.len(), "duplicate train index");
        ensure!(s.dev.iter().all(|i| !train.contains(i)), "train/dev overlap");
        ensure!(train.len() + s.dev.len() == n, "train is not the dev complement");
    }
    ensure!(seen.iter().all(|&b| b), "dev folds do not cover");
    Ok(())
}

fn structural_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut combos = 0;
    let mut bag_degenerate = 0;
    while combos < 1000 {
        let n = rng.gen_range(2..=80usize);
        let k = rng.gen_range(1..=12usize);
        let r = rng.gen_range(0.1..0.9f64);
        let seed: u64 = rng.gen();
        let ctx = format!("(N={n}, K={k}, r={r:.3}, seed={seed})");

        if k >= 2 && k <= n {
            let cv = ok(make_cv(n, k, seed))?;
            check_partition(&cv.splits, n).map_err(|e| format!("CV {ctx}: {e}"))?;
        }
        if n <= 40 {
            let loo = ok(make_loocv(n))?;
            check_partition(&loo.splits, n).map_err(|e| format!("LOOCV {ctx}: {e}"))?;
            ensure!(loo.splits.iter().all(|s| s.dev.len() == 1), "LOOCV dev size {ctx}");
        }
        if n % 2 == 0 && k >= 2 && k <= n / 2 {
            let mdl = ok(make_mdl(n, k, seed))?;
            let mut devs = BTreeSet::new();
            for (j, s) in mdl.splits.iter().enumerate() {
                let d = set(&s.dev);
                ensure!(devs.is_disjoint(&d), "MDL dev overlap {ctx}");
                ensure!(set(&s.train).is_disjoint(&d), "MDL train/dev overlap {ctx}");
                devs.extend(d);
                if j == 0 {
                    ensure!(s.train.len() == n / 2, "MDL shared half {ctx}");
                } else {
                    let prev = &mdl.splits[j - 1];
                    let expect: BTreeSet<usize> = set(&prev.train).union(&set(&prev.dev)).copied().collect();
                    ensure!(set(&s.train) == expect, "MDL train is not cumulative {ctx}");
                }
            }
        }
        let n_train = (n as f64 * r).floor() as usize;
        if n_train >= 1 && n_train < n {
            for s in &ok(make_ms(n, k, r, seed))?.splits {
                let (t, d) = (set(&s.train), set(&s.dev));
                ensure!(t.is_disjoint(&d) && t.len() + d.len() == n, "MS split not a partition {ctx}");
                ensure!(t.len() == n_train, "MS size {ctx}");
            }
            for s in &ok(make_rand(n, k, r, seed))?.splits {
                ensure!(set(&s.train).len() == s.train.len(), "RAND duplicate train {ctx}");
                ensure!(set(&s.dev).len() == s.dev.len(), "RAND duplicate dev {ctx}");
                ensure!(s.train.len() == n_train && s.dev.len() == n - n_train, "RAND size {ctx}");
            }
            match make_bag(n, k, r, seed) {
                Ok(bag) => {
                    for s in &bag.splits {
                        let drawn = set(&s.train);
                        let oob: BTreeSet<usize> = (0..n).filter(|i| !drawn.contains(i)).collect();
                        ensure!(s.train.len() == n_train, "BAG draws {ctx}");
                        ensure!(set(&s.dev) == oob && !oob.is_empty(), "BAG complement {ctx}");
                    }
                }
                Err(Error::DegenerateSplit { .. }) => bag_degenerate += 1,
                Err(e) => return Err(format!("BAG {ctx}: {e}")),
            }
        }
        combos += 1;
    }
    Ok(format!("{combos} combinations, {bag_degenerate} degenerate BAG draws reported"))
}

// 3 ------------------------------------------------------------------------

fn loocv_equals_cv() -> Outcome {
    for n in 2..=64 {
        let canon = |splits: &[DataSplit]| -> BTreeSet<(Vec<usize>, Vec<usize>)> {
            splits.iter().map(|s| (s.dev.clone(), s.train.clone())).collect()
        };
        let loo = ok(make_loocv(n))?;
        let cv = ok(make_cv(n, n, n as u64))?;
        ensure!(loo.splits.len() == n, "LOOCV has {} splits for N={n}", loo.splits.len());
        ensure!(canon(&loo.splits) == canon(&cv.splits), "split sets differ at N={n}");
    }
    Ok("N = 2..=64".into())
}

// 4 ------------------------------------------------------------------------

fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut undefined = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(2..=8);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0..4) as f64).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.gen_range(0..4) as f64).collect();
        let (rx, ry) = (brute_ranks(&x), brute_ranks(&y));
        let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
        match spearman(&x, &y) {
            Ok(rho) => {
                ensure!(!constant(&x) && !constant(&y), "rho defined for constant input {x:?} {y:?}");
                let d = (rho - pearson(&rx, &ry)).abs();
                worst = worst.max(d);
                ensure!(d <= 1e-12, "rho {rho} vs brute force on {x:?} {y:?}");
                checked += 1;
            }
            Err(_) => {
                ensure!(constant(&x) || constant(&y), "rho undefined on {x:?} {y:?}");
                undefined += 1;
            }
        }
    }
    for _ in 0..200 {
        let len = rng.gen_range(2..=8);
        let mut x: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        ensure!((ok(spearman(&x, &x))? - 1.0).abs() <= 1e-12, "rho(x, x) != 1");
        x.sort_by(f64::total_cmp);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        ensure!((ok(spearman(&x, &rev))? + 1.0).abs() <= 1e-12, "rho(x, reverse) != -1");
    }
    Ok(format!("{checked} tied vectors within {worst:.1e}, {undefined} constant inputs rejected"))
}

// 5 ------------------------------------------------------------------------

/// h* from the run-log text alone: mean dev per point, first strict max.
fn argmax_from_log(text: &str) -> Result<String, String> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if v["record"] == "run" {
            let h = v["h"].as_str().unwrap().to_string();
            let dev = v["dev_score"].as_f64().unwrap();
            let e = sums.entry(h.clone()).or_insert_with(|| {
                order.push(h);
                (0.0, 0)
            });
            e.0 += dev;
            e.1 += 1;
        }
    }
    let mean = |h: &String| sums[h].0 / sums[h].1 as f64;
    let mut best = &order[0];
    for h in &order {
        if mean(h) > mean(best) {
            best = h;
        }
    }
    Ok(best.clone())
}

fn selection_soundness() -> Outcome {
    let task = ok(generate_synthetic_task(&SyntheticTaskConfig::default()))?;
    let strategies = [Strategy::Cv, Strategy::Mdl, Strategy::Bag, Strategy::Rand, Strategy::Ms];
    let mut wrong_argmax = 0;
    for sigma in [0.4, 0.0] {
        let oracle = OracleSpec::bundled(sigma);
        let space = ok(oracle.space())?;
        let spec = LearnerSpec::Oracle(oracle);
        for seed in 0..100u64 {
            let strategy = strategies[seed as usize % strategies.len()];
            let ratio = strategy.uses_ratio().then_some(0.5);
            let plan = ok(splitbench::make_splits(strategy, &task.labeled, 4, ratio, seed, None))?;
            let settings = SearchSettings::new(seed).with_workers(4);
            let result = ok(run_search(&task, &plan, &space, &spec, &settings))?;
            let text = RunLog::from_result("synthetic", &result, ratio, Metric::Accuracy, seed).to_text();
            let brute = argmax_from_log(&text)?;
            ensure!(brute == result.best_h().token(), "seed {seed}: h* {} vs log argmax {brute}", result.best_h());
            if sigma == 0.0 {
                ensure!(result.best_h() == &OracleSpec::bundled_argmax(), "sigma=0 seed {seed}: h* {}", result.best_h());
            } else if result.best_h() != &OracleSpec::bundled_argmax() {
                wrong_argmax += 1;
            }
        }
    }
    Ok(format!("200 searches agree with the log argmax; noisy runs missed the true argmax {wrong_argmax}/100 times"))
}

// 6 ------------------------------------------------------------------------

fn determinism_under_parallelism() -> Outcome {
    let mut lines = 0;
    for text in [None, Some(LOGREG_CONFIG)] {
        let base = match text {
            None => ExperimentConfig::bundled(),
            Some(t) => ok(ExperimentConfig::parse(t))?,
        };
        let task = ok(base.load_task())?;
        let plan = ok(base.plan(&task, base.split.strategy, base.split.k))?;
        let space = ok(base.space())?;
        let mut logs = Vec::new();
        for workers in [1, 4, 8] {
            let settings = base.settings().with_workers(workers);
            let bench = ok(run_search(&task, &plan, &space, &base.learner, &settings))?;
            let audit = ok(run_audit(&task, &plan, &space, &base.learner, &settings))?;
            let pair: Vec<String> = [bench, audit]
                .iter()
                .map(|r| RunLog::from_result(&base.task_name, r, base.split.ratio, base.metric, base.seed).to_text())
                .collect();
            for t in &pair {
                ok(replay(t))?;
            }
            logs.push(pair);
        }
        ensure!(logs[0] == logs[1] && logs[0] == logs[2], "{}: logs differ across worker counts", base.task_name);
        lines += logs[0].iter().map(|t| t.lines().count()).sum::<usize>();
    }
    Ok(format!("{lines} log lines identical for workers 1, 4, 8; all replay"))
}

// 7 ------------------------------------------------------------------------

fn finding_one() -> Outcome {
    let cfg = ExperimentConfig::bundled();
    let task = ok(cfg.load_task())?;
    let space = ok(cfg.space())?;
    ensure!(space.grid_size() >= 16, "grid too small");
    let seeds = 100u64;
    let mut stats = Vec::new();
    for strategy in [Strategy::Cv, Strategy::Mdl, Strategy::Ms] {
        let (mut rho, mut spread) = (0.0, 0.0);
        for seed in 0..seeds {
            let scan = ScanConfig {
                strategy,
                ratio: cfg.split.ratio,
                space: space.clone(),
                spec: cfg.learner.clone(),
                settings: SearchSettings::new(seed).with_workers(4),
            };
            let (report, _) = ok(stability_scan(&task, &scan, &DEFAULT_SCAN_KS))?;
            rho += report.entries.iter().map(|e| e.rho).sum::<f64>() / report.entries.len() as f64;
            spread += report.performance_std;
        }
        stats.push((strategy, rho / seeds as f64, spread / seeds as f64));
    }
    let detail = stats
        .iter()
        .map(|(s, r, p)| format!("{s}: rho {r:.3}, cross-K std {p:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    let ms = stats[2];
    for other in &stats[..2] {
        ensure!(ms.1 >= other.1, "MS rho below {}: {detail}", other.0);
        ensure!(ms.2 <= other.2, "MS cross-K std above {}: {detail}", other.0);
    }
    Ok(detail)
}

// 8 ------------------------------------------------------------------------

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn noise_variance_scaling() -> Outcome {
    let task = ok(generate_synthetic_task(&SyntheticTaskConfig::default()))?;
    let spec = LearnerSpec::Oracle(OracleSpec::bundled(0.4));
    let h = OracleSpec::bundled_argmax();
    let train_set = task.labeled.select(&(0..16).collect::<Vec<_>>());
    // Disjoint seed ranges so the two variance estimates are independent.
    let draws = |dev_n: usize, seeds: std::ops::Range<u64>| -> Result<Vec<f64>, String> {
        let dev_set = task.labeled.select(&(16..16 + dev_n).collect::<Vec<_>>());
        seeds
            .map(|seed| {
                let m = ok(train(
                    &spec,
                    TrainRequest {
                        train: &train_set,
                        dev: Some(&dev_set),
                        h: &h,
                        seed,
                        num_classes: 2,
                        metric: Metric::Accuracy,
                        input_noise: 0.0,
                        k: None,
                    },
                ))?;
                Ok(m.best_dev_score.unwrap())
            })
            .collect()
    };
    let v16 = sample_var(&draws(16, 0..10_000)?);
    let v32 = sample_var(&draws(32, 10_000..20_000)?);
    let ratio = v16 / v32;
    ensure!((ratio - 2.0).abs() <= 0.2, "variance ratio {ratio:.4} (|dev| 16 vs 32)");
    Ok(format!("var(|dev|=16) / var(|dev|=32) = {ratio:.4} over 10^4 draws each"))
}

// 9 ------------------------------------------------------------------------

fn selftrain_schedule() -> Outcome {
    let cfg = ok(ExperimentConfig::parse(LOGREG_CONFIG))?;
    let task = ok(cfg.load_task())?;
    ensure!(task.labeled.len() == 32 && task.unlabeled.len() == 500, "task shape");
    let plan = ok(cfg.plan(&task, Strategy::Ms, 4))?;
    let settings = cfg.settings();
    let searched = ok(run_search(&task, &plan, &ok(cfg.space())?, &cfg.learner, &settings))?;
    let h = searched.best_h();

    let st = SelfTrainConfig {
        generations: 6,
        ..SelfTrainConfig::ipet(Labeling::Cross)
    };
    let gens = ok(self_train(&task, &plan, h, &cfg.learner, &st, &settings))?;
    let sizes: Vec<usize> = gens.iter().map(|g| g.target_size).collect();
    let mut expected = Vec::new();
    for g in 1.. {
        let target = 32 * 3usize.pow(g - 1);
        if target - 32 > 500 {
            expected.push(32 + 500);
            break;
        }
        expected.push(target);
    }
    ensure!(sizes == expected, "targets {sizes:?} != {expected:?}");
    ensure!(gens.last().unwrap().truncated && gens.iter().rev().skip(1).all(|g| !g.truncated), "truncation flags");
    for g in &gens {
        for (s, adds) in plan.splits.iter().zip(&g.additions) {
            ensure!(adds.len() == g.target_size - 32, "additions in generation {}", g.generation);
            ensure!(
                g.train_sizes[s.k] == s.train.len() + adds.len(),
                "train size in generation {}",
                g.generation
            );
        }
    }

    let one = SelfTrainConfig {
        generations: 1,
        ..SelfTrainConfig::ipet(Labeling::Single)
    };
    let g1 = ok(self_train(&task, &plan, h, &cfg.learner, &one, &settings))?;
    let plain: Vec<f64> = searched.records.iter().filter_map(|r| r.test_score).collect();
    ensure!(g1.len() == 1 && g1[0].test_scores == plain, "G=1 differs from the plain run");
    ensure!(g1[0].test == searched.test, "G=1 summary differs");

    let model = ok(train(
        &cfg.learner,
        TrainRequest {
            train: &task.labeled.all(),
            dev: Some(&task.labeled.all()),
            h,
            seed: 0,
            num_classes: task.num_classes(),
            metric: cfg.metric,
            input_noise: 0.0,
            k: None,
        },
    ))?;
    let single = ok(pseudo_label_single(&model, &task.unlabeled, 96))?;
    let copies: Vec<&dyn ProbabilisticClassifier> = vec![&model; 4];
    for ratio in [1.0, 2.0 / 3.0, 0.25] {
        let cross = ok(pseudo_label_cross(&copies, &task.unlabeled, 96, ratio, 5))?;
        let same = cross.len() == single.len()
            && cross.iter().zip(&single).all(|(a, b)| {
                a.index == b.index && a.label == b.label && (a.confidence - b.confidence).abs() <= 1e-12
            });
        ensure!(same, "cross-split labels differ from single-split at sample ratio {ratio}");
    }
    Ok(format!("targets {sizes:?}, G=1 matches the plain run, identical-model ensembles match"))
}

// 10 -----------------------------------------------------------------------

fn sensitivity_nullity_and_dominance() -> Outcome {
    let mut oracle = OracleSpec::bundled(0.4);
    oracle.dims.push(OracleDim {
        name: "warmup".into(),
        values: vec![0.0, 0.1, 0.2],
        effects: vec![0.0, 0.0, 0.0],
    });
    let fixed = OracleSpec::bundled_argmax().with("warmup", 0.0);

    // Dominant dimension from the true-score table: largest spread of true
    // scores when it alone varies around the fixed point.
    let mut truth_spread = Vec::new();
    for d in &oracle.dims {
        let scores: Vec<f64> = d
            .values
            .iter()
            .map(|&v| oracle.true_score(&fixed.with(&d.name, v)).unwrap())
            .collect();
        truth_spread.push((d.name.clone(), sample_var(&scores).sqrt()));
    }
    let dominant = truth_spread
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
        .clone();

    let task = ok(generate_synthetic_task(&SyntheticTaskConfig::default()))?;
    let spec = LearnerSpec::Oracle(oracle.clone());
    let mut details = Vec::new();
    for seed in 0..10u64 {
        let plan = ok(make_ms(64, 4, 0.5, seed))?;
        let settings = SearchSettings::new(seed);
        let mut reports = Vec::new();
        for d in &oracle.dims {
            reports.push(ok(sensitivity(&task, &plan, &spec, &settings, &d.name, &d.values, &fixed))?);
        }
        let null = reports.iter().find(|r| r.factor == "warmup").unwrap();
        ensure!(null.dev_std == 0.0 && null.test_std == 0.0, "ignored factor std ({}, {})", null.dev_std, null.test_std);
        let top = reports.iter().find(|r| r.factor == dominant).unwrap();
        for r in reports.iter().filter(|r| r.factor != dominant) {
            ensure!(
                top.dev_std > r.dev_std && top.test_std > r.test_std,
                "seed {seed}: {dominant} ({:.4}, {:.4}) not above {} ({:.4}, {:.4})",
                top.dev_std,
                top.test_std,
                r.factor,
                r.dev_std,
                r.test_std
            );
        }
        if seed == 0 {
            details.push(format!("{dominant} std ({:.4}, {:.4}), warmup (0, 0)", top.dev_std, top.test_std));
        }
    }
    Ok(format!("10 seeds; {}", details.join("")))
}

// 11 -----------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let classes = rng.gen_range(2..=4);
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=6);
        let l2 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.5) };
        let w: Vec<Vec<f64>> = (0..classes).map(|_| (0..=dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let (_, grad) = logreg_loss_and_gradient(&w, &x, &y, l2);
        let eps = 1e-5;
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for c in 0..classes {
            for j in 0..=dim {
                let mut plus = w.clone();
                plus[c][j] += eps;
                let mut minus = w.clone();
                minus[c][j] -= eps;
                let numeric = (logreg_loss_and_gradient(&plus, &x, &y, l2).0 - logreg_loss_and_gradient(&minus, &x, &y, l2).0) / (2.0 * eps);
                diff += (grad[c][j] - numeric).powi(2);
                norm += grad[c][j].powi(2).max(numeric.powi(2));
            }
        }
        let rel = diff.sqrt() / norm.sqrt().max(1e-12);
        worst = worst.max(rel);
        ensure!(rel <= 1e-5, "relative error {rel:.2e} (C={classes}, d={dim}, n={n}, l2={l2:.3})");
    }
    Ok(format!("50 instances, worst relative error {worst:.2e}"))
}

// --------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("split-size exactness", Duration::from_secs(1), split_size_exactness),
        ("structural split invariants", Duration::from_secs(10), structural_invariants),
        ("LOOCV equals CV with K=N", Duration::from_secs(1), loocv_equals_cv),
        ("Spearman brute-force equivalence", Duration::from_secs(5), spearman_oracle),
        ("selection soundness", Duration::from_secs(30), selection_soundness),
        ("determinism under parallelism", Duration::from_secs(60), determinism_under_parallelism),
        ("MS correlation and stability vs CV, MDL", Duration::from_secs(300), finding_one),
        ("oracle noise-variance scaling", Duration::from_secs(10), noise_variance_scaling),
        ("self-training schedule", Duration::from_secs(60), selftrain_schedule),
        ("sensitivity nullity and dominance", Duration::from_secs(30), sensitivity_nullity_and_dominance),
        ("logistic-regression gradient check", Duration::from_secs(10), gradient_check),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > *limit => Err(format!("{d}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
