//! Sensitivity of dev and test scores to each grid dimension, and to the
//! training-order seed, around the oracle's best point.

use splitbench::config::ExperimentConfig;
use splitbench::metrics::{render_sensitivity_table, sensitivity, TRAIN_ORDER_FACTOR};
use splitbench::OracleSpec;

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::bundled();
    let task = cfg.load_task()?;
    let plan = cfg.plan(&task, cfg.split.strategy, cfg.split.k)?;
    let space = cfg.space()?;
    let fixed = OracleSpec::bundled_argmax();
    let mut reports = Vec::new();
    for dim in space.dims() {
        reports.push(sensitivity(&task, &plan, &cfg.learner, &cfg.settings(), &dim.name, &dim.values, &fixed)?);
    }
    let seeds: Vec<f64> = (0..5).map(f64::from).collect();
    reports.push(sensitivity(&task, &plan, &cfg.learner, &cfg.settings(), TRAIN_ORDER_FACTOR, &seeds, &fixed)?);
    print!("{}", render_sensitivity_table(&reports));
    Ok(())
}
