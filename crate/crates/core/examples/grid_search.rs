//! Benchmark-mode grid search with logistic regression: select h* on mean
//! dev score over K=4 Multi-Splits, then score only h* on test.

use splitbench::learners::HyperDim;
use splitbench::splits::make_ms;
use splitbench::{generate_synthetic_task, run_search, HyperSpace, LearnerSpec, SearchSettings, SyntheticTaskConfig};

fn main() -> splitbench::Result<()> {
    let task = generate_synthetic_task(&SyntheticTaskConfig {
        num_classes: 3,
        dim: 4,
        separation: 2.5,
        n_labeled: 32,
        ..Default::default()
    })?;
    let space = HyperSpace::new(vec![
        HyperDim { name: "pattern".into(), values: vec![0.0, 1.0, 2.0, 3.0] },
        HyperDim { name: "learning_rate".into(), values: vec![5e-6, 1e-5] },
        HyperDim { name: "max_steps".into(), values: vec![250.0, 500.0] },
        HyperDim { name: "eval_frequency".into(), values: vec![0.02, 0.04] },
    ])?;
    let plan = make_ms(task.labeled.len(), 4, 0.5, 11)?;
    let settings = SearchSettings::new(11).with_workers(4);
    let result = run_search(&task, &plan, &space, &LearnerSpec::logreg(), &settings)?;

    let mut ranked: Vec<_> = result.points.iter().collect();
    ranked.sort_by(|a, b| b.dev.unwrap().mean.total_cmp(&a.dev.unwrap().mean));
    println!("top grid points by mean dev accuracy:");
    for p in ranked.iter().take(5) {
        println!("  {:.4} ±{:.4}  {}", p.dev.unwrap().mean, p.dev.unwrap().std, p.h);
    }
    println!("\nh* = {}", result.best_h());
    println!("test accuracy of its {} checkpoints: {:.4} ±{:.4}", result.test.n, result.test.mean, result.test.std);
    let steps: Vec<usize> = result.records.iter().filter(|r| r.test_score.is_some()).map(|r| r.checkpoint_step).collect();
    println!("checkpoint steps: {steps:?}");
    Ok(())
}
