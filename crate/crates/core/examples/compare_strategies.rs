//! Audit every strategy on the bundled oracle experiment and print the
//! performance and dev-test correlation tables.

use splitbench::config::ExperimentConfig;
use splitbench::metrics::{render_correlation_table, render_performance_table, StrategyReport};
use splitbench::run_audit;

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::bundled();
    let task = cfg.load_task()?;
    let space = cfg.space()?;
    let mut reports = Vec::new();
    for &strategy in &cfg.split.strategies {
        let plan = cfg.plan(&task, strategy, cfg.split.k)?;
        let result = run_audit(&task, &plan, &space, &cfg.learner, &cfg.settings())?;
        reports.push(StrategyReport::from_audit(&cfg.task_name, &result, None)?);
    }
    println!("{}", render_performance_table(&reports, cfg.metric.as_str()));
    println!("{}", render_correlation_table(&reports));
    Ok(())
}
