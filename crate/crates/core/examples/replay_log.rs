//! Write a run log, parse it back, and replay it.

use splitbench::config::ExperimentConfig;
use splitbench::run_search;
use splitbench::runlog::{replay, RunLog};

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::bundled();
    let task = cfg.load_task()?;
    let plan = cfg.plan(&task, cfg.split.strategy, cfg.split.k)?;
    let result = run_search(&task, &plan, &cfg.space()?, &cfg.learner, &cfg.settings())?;
    let text = RunLog::from_result(&cfg.task_name, &result, cfg.split.ratio, cfg.metric, cfg.seed).to_text();

    println!("{} lines; first two:", text.lines().count());
    for line in text.lines().take(2) {
        println!("  {line}");
    }
    assert_eq!(RunLog::parse(&text)?.to_text(), text);
    let replayed = replay(&text)?;
    assert_eq!(replayed, result);
    println!("replayed: h* = {}, test {:.4} ±{:.4}", replayed.best_h(), replayed.test.mean, replayed.test.std);

    let corrupted = text.replacen("\"dev_score\":", "\"dev_score\":1", 1);
    println!("after corrupting one dev score: {}", replay(&corrupted).unwrap_err());
    Ok(())
}
