//! Single- and cross-split self-training, with and without input noise,
//! on the logistic-regression experiment.

use splitbench::config::{ExperimentConfig, LOGREG_CONFIG};
use splitbench::run_search;
use splitbench::selftrain::{self_train, Labeling, SelfTrainConfig};

fn main() -> splitbench::Result<()> {
    let cfg = ExperimentConfig::parse(LOGREG_CONFIG)?;
    let task = cfg.load_task()?;
    let plan = cfg.plan(&task, cfg.split.strategy, cfg.split.k)?;
    let searched = run_search(&task, &plan, &cfg.space()?, &cfg.learner, &cfg.settings())?;
    println!("h* = {}\n", searched.best_h());

    let variants = [
        ("single", SelfTrainConfig::ipet(Labeling::Single)),
        ("cross", SelfTrainConfig::ipet(Labeling::Cross)),
        ("noisy single", SelfTrainConfig::noisy_student(Labeling::Single)),
        ("noisy cross", SelfTrainConfig::noisy_student(Labeling::Cross)),
    ];
    for (name, st) in variants {
        let gens = self_train(&task, &plan, searched.best_h(), &cfg.learner, &st, &cfg.settings())?;
        let cells: Vec<String> = gens
            .iter()
            .map(|g| {
                let acc = g.pseudo_label_accuracy.map_or("-".into(), |a| format!("{a:.3}"));
                format!("g{} n={} {:.4} (labels {acc})", g.generation, g.target_size, g.test.mean)
            })
            .collect();
        println!("{name:<13} {}", cells.join("  |  "));
    }
    Ok(())
}
