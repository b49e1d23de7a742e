//! Build every split strategy on a 64-example set and print the train/dev
//! sizes of each split.

use splitbench::learners::IdentityEmbedder;
use splitbench::{generate_synthetic_task, make_splits, Strategy, SyntheticTaskConfig};

fn main() -> splitbench::Result<()> {
    let task = generate_synthetic_task(&SyntheticTaskConfig::default())?;
    for strategy in Strategy::ALL {
        let ratio = strategy.uses_ratio().then_some(0.5);
        let plan = make_splits(strategy, &task.labeled, 4, ratio, 1, Some(&IdentityEmbedder))?;
        let sizes: Vec<String> = plan
            .splits
            .iter()
            .take(4)
            .map(|s| format!("{}/{}", s.train.len(), s.dev.len()))
            .collect();
        let more = if plan.splits.len() > 4 {
            format!(" ... ({} splits)", plan.splits.len())
        } else {
            String::new()
        };
        println!("{:<6} {}{more}", strategy.tag(), sizes.join("  "));
        for w in &plan.warnings {
            println!("       warning: {w}");
        }
    }

    // BAG draws with replacement, so its train list has repeats.
    let bag = make_splits(Strategy::Bag, &task.labeled, 1, Some(0.5), 1, None)?;
    let mut unique = bag.splits[0].train.clone();
    unique.dedup();
    println!("\nBAG split 0: {} draws, {} distinct, {} out-of-bag", bag.splits[0].train.len(), unique.len(), bag.splits[0].dev.len());
    println!("\n{}", make_splits(Strategy::Ms, &task.labeled, 2, Some(0.5), 1, None)?.to_text());
    Ok(())
}
