//! Scan K over {2, 4, 8, 16} for CV, MDL and MS, averaged over 20 master
//! seeds of the oracle experiment.

use splitbench::config::ExperimentConfig;
use splitbench::metrics::{stability_scan, ScanConfig, DEFAULT_SCAN_KS};
use splitbench::{SearchSettings, Strategy};

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::bundled();
    let task = cfg.load_task()?;
    let seeds = 20;
    println!("{:<5} {:>10} {:>14}", "", "mean rho", "cross-K std");
    for strategy in [Strategy::Cv, Strategy::Mdl, Strategy::Ms] {
        let (mut rho, mut spread) = (0.0, 0.0);
        for seed in 0..seeds {
            let scan = ScanConfig {
                strategy,
                ratio: cfg.split.ratio,
                space: cfg.space()?,
                spec: cfg.learner.clone(),
                settings: SearchSettings::new(seed).with_workers(4),
            };
            let (report, _) = stability_scan(&task, &scan, &DEFAULT_SCAN_KS)?;
            rho += report.entries.iter().map(|e| e.rho).sum::<f64>() / report.entries.len() as f64;
            spread += report.performance_std;
        }
        let n = seeds as f64;
        println!("{:<5} {:>10.3} {:>14.4}", strategy.tag(), rho / n, spread / n);
    }
    Ok(())
}
