//! Generate the bundled synthetic task and round-trip a dataset file.

use splitbench::{generate_synthetic_task, Dataset, SyntheticTaskConfig};

fn main() -> splitbench::Result<()> {
    let cfg = SyntheticTaskConfig::default();
    let task = generate_synthetic_task(&cfg)?;
    println!(
        "{} classes, dim {}: {} labeled, {} unlabeled, {} test",
        task.num_classes(),
        task.labeled.dim(),
        task.labeled.len(),
        task.unlabeled.len(),
        task.test.len()
    );
    for (c, mean) in cfg.class_means().iter().enumerate() {
        println!("class {c} mean {mean:?}");
    }

    let text = task.labeled.to_text();
    println!("\nfirst lines of the labeled file:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    assert_eq!(Dataset::from_text(&text)?, task.labeled);
    Ok(())
}
