//! Practical mode: after selecting h*, retrain it on all labeled data under
//! L seeds and compare with the benchmark-mode estimate.
//!
//! Zero-initialised full-batch logistic regression is deterministic given
//! its data, so the L re-runs agree exactly; the oracle learner below shows
//! the seed spread.

use splitbench::config::ExperimentConfig;
use splitbench::{practical_rerun, run_search};

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::parse(splitbench::config::LOGREG_CONFIG)?;
    let task = cfg.load_task()?;
    let plan = cfg.plan(&task, cfg.split.strategy, cfg.split.k)?;
    let searched = run_search(&task, &plan, &cfg.space()?, &cfg.learner, &cfg.settings())?;
    println!("h* = {}", searched.best_h());
    println!("benchmark: {:.4} ±{:.4} over K={}", searched.test.mean, searched.test.std, searched.test.n);
    for l in [1, 4, 8] {
        let rerun = practical_rerun(&task, searched.best_h(), &cfg.learner, l, &cfg.settings())?;
        println!("practical: {:.4} ±{:.4} over L={l}", rerun.test.mean, rerun.test.std);
    }

    let oracle = ExperimentConfig::bundled();
    let task = oracle.load_task()?;
    let h = splitbench::OracleSpec::bundled_argmax();
    let rerun = practical_rerun(&task, &h, &oracle.learner, 8, &oracle.settings())?;
    println!("\noracle at its best point: {:.4} ±{:.4} over L=8", rerun.test.mean, rerun.test.std);
    Ok(())
}
