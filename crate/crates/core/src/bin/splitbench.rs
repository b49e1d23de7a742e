use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splitbench::config::ExperimentConfig;
use splitbench::metrics::{render_sensitivity_table, sensitivity, TRAIN_ORDER_FACTOR};
use splitbench::runlog::{build_report, pseudo_label_audit, replay, RunLog};
use splitbench::selftrain::self_train;
use splitbench::{practical_rerun, run_audit, run_search, Error, Result, SearchResult, Strategy, TaskBundle};

#[derive(Parser)]
#[command(name = "splitbench", version, about = "Few-shot model selection over data-split strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults to the bundled oracle experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Strategy override; a comma-separated list for compare-strategies.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Number of runs K override.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Split ratio r override.
    #[arg(long, global = true)]
    ratio: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the split plan.
    Splits,
    /// Benchmark-mode grid search.
    Search,
    /// Search, then retrain h* on all labeled data under L seeds.
    Rerun,
    /// Audit-mode search for each strategy and the strategy tables.
    CompareStrategies,
    /// Audit-mode searches over the configured K values.
    StabilityScan,
    /// Vary one factor around h* and report score std.
    Sensitivity,
    /// Search, then iterative self-training.
    Selftrain,
    /// Regenerate the strategy tables from the audit logs in a directory.
    Report {
        /// Directory of run logs (defaults to the output directory).
        dir: Option<PathBuf>,
    },
    /// Recompute a run log and check it reproduces byte for byte.
    Replay { log: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "record": "error",
                "kind": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::bundled(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(k) = c.k {
        cfg.split.k = k;
    }
    if let Some(r) = c.ratio {
        cfg.split.ratio = Some(r);
    }
    if let Some(s) = &c.strategy {
        let list = s.split(',').map(|t| t.trim().parse()).collect::<Result<Vec<Strategy>>>()?;
        cfg.split.strategy = list[0];
        if list.len() > 1 || !cfg.split.strategies.is_empty() {
            cfg.split.strategies = list;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn search_log(cfg: &ExperimentConfig, result: &SearchResult) -> RunLog {
    let ratio = result.strategy.and_then(|s| cfg.ratio_for(s));
    RunLog::from_result(&cfg.task_name, result, ratio, cfg.metric, cfg.seed)
}

fn benchmark(cfg: &ExperimentConfig, bundle: &TaskBundle) -> Result<SearchResult> {
    let plan = cfg.plan(bundle, cfg.split.strategy, cfg.split.k)?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    let result = run_search(bundle, &plan, &cfg.space()?, &cfg.learner, &cfg.settings())?;
    let log = search_log(cfg, &result);
    write(
        &cfg.output_dir,
        &format!("search-{}-K{}.jsonl", cfg.split.strategy, cfg.split.k),
        &log.to_text(),
    )?;
    println!(
        "h* = {}  test {} = {:.4} ±{:.4} over K={}",
        result.best_h(),
        cfg.metric.as_str(),
        result.test.mean,
        result.test.std,
        result.num_runs
    );
    Ok(result)
}

fn audit_logs(cfg: &ExperimentConfig, bundle: &TaskBundle, strategies: &[Strategy], ks: &[usize]) -> Result<Vec<RunLog>> {
    let space = cfg.space()?;
    let mut logs = Vec::new();
    for &s in strategies {
        for &k in ks {
            let plan = cfg.plan(bundle, s, k)?;
            let result = run_audit(bundle, &plan, &space, &cfg.learner, &cfg.settings())?;
            let log = search_log(cfg, &result);
            write(&cfg.output_dir, &format!("audit-{s}-K{k}.jsonl"), &log.to_text())?;
            logs.push(log);
        }
    }
    Ok(logs)
}

fn write_report(cfg: &ExperimentConfig, logs: &[RunLog]) -> Result<()> {
    let report = build_report(logs)?;
    write(&cfg.output_dir, "report.txt", &report.text)?;
    write(&cfg.output_dir, "report.csv", &report.csv)?;
    if let Some(curves) = &report.stability_csv {
        write(&cfg.output_dir, "stability.csv", curves)?;
    }
    print!("{}", report.text);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Replay { log } = &cli.command {
        let text = fs::read_to_string(log)?;
        let result = replay(&text).map_err(|e| e.in_file(log))?;
        println!("replay ok: {} records, h* = {}", result.records.len(), result.best_h());
        return Ok(());
    }
    let cfg = load_config(&cli.common)?;
    if let Command::Report { dir } = &cli.command {
        let dir = dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|x| x == "jsonl"));
        paths.sort();
        let logs = paths.iter().map(RunLog::read).collect::<Result<Vec<_>>>()?;
        print!("{}", build_report(&logs)?.text);
        return Ok(());
    }

    let bundle = cfg.load_task()?;
    match cli.command {
        Command::Splits => {
            let plan = cfg.plan(&bundle, cfg.split.strategy, cfg.split.k)?;
            for w in &plan.warnings {
                eprintln!("warning: {w}");
            }
            write(
                &cfg.output_dir,
                &format!("splits-{}-K{}.txt", plan.strategy, cfg.split.k),
                &plan.to_text(),
            )?;
        }
        Command::Search => {
            benchmark(&cfg, &bundle)?;
        }
        Command::Rerun => {
            let l = cfg
                .practical
                .as_ref()
                .map(|p| p.l)
                .ok_or_else(|| Error::Config("rerun needs a [practical] section".into()))?;
            let searched = benchmark(&cfg, &bundle)?;
            let result = practical_rerun(&bundle, searched.best_h(), &cfg.learner, l, &cfg.settings())?;
            write(&cfg.output_dir, &format!("rerun-L{l}.jsonl"), &search_log(&cfg, &result).to_text())?;
            println!(
                "practical: test {} = {:.4} ±{:.4} over L={l}",
                cfg.metric.as_str(),
                result.test.mean,
                result.test.std
            );
        }
        Command::CompareStrategies => {
            let strategies = if cfg.split.strategies.is_empty() {
                vec![cfg.split.strategy]
            } else {
                cfg.split.strategies.clone()
            };
            let logs = audit_logs(&cfg, &bundle, &strategies, &[cfg.split.k])?;
            write_report(&cfg, &logs)?;
        }
        Command::StabilityScan => {
            let ks = cfg
                .stability
                .as_ref()
                .map(|s| s.ks.clone())
                .unwrap_or_else(|| splitbench::metrics::DEFAULT_SCAN_KS.to_vec());
            let strategies = if cli.common.strategy.is_some() || cfg.split.strategies.is_empty() {
                vec![cfg.split.strategy]
            } else {
                cfg.split.strategies.clone()
            };
            for &s in &strategies {
                for &k in &ks {
                    check_k(s, k)?;
                }
            }
            let logs = audit_logs(&cfg, &bundle, &strategies, &ks)?;
            write_report(&cfg, &logs)?;
        }
        Command::Sensitivity => {
            let searched = benchmark(&cfg, &bundle)?;
            let plan = cfg.plan(&bundle, cfg.split.strategy, cfg.split.k)?;
            let space = cfg.space()?;
            let factors: Vec<(String, Vec<f64>)> = match &cfg.sensitivity {
                Some(s) if s.values.is_empty() => vec![(s.factor.clone(), space.dim(&s.factor).unwrap().values.clone())],
                Some(s) => vec![(s.factor.clone(), s.values.clone())],
                None => space.dims().iter().map(|d| (d.name.clone(), d.values.clone())).collect(),
            };
            let mut reports = Vec::new();
            for (factor, values) in &factors {
                let fixed = searched.best_h();
                if factor != TRAIN_ORDER_FACTOR && fixed.get(factor).is_none() {
                    return Err(Error::Config(format!("unknown sensitivity factor {factor:?}")));
                }
                reports.push(sensitivity(&bundle, &plan, &cfg.learner, &cfg.settings(), factor, values, fixed)?);
            }
            let table = render_sensitivity_table(&reports);
            write(&cfg.output_dir, "sensitivity.txt", &table)?;
            print!("{table}");
        }
        Command::Selftrain => {
            let st = cfg
                .selftrain
                .clone()
                .ok_or_else(|| Error::Config("selftrain needs a [selftrain] section".into()))?;
            let searched = benchmark(&cfg, &bundle)?;
            let plan = cfg.plan(&bundle, cfg.split.strategy, cfg.split.k)?;
            let gens = self_train(&bundle, &plan, searched.best_h(), &cfg.learner, &st, &cfg.settings())?;
            let log = search_log(&cfg, &searched).with_generations(&gens);
            write(
                &cfg.output_dir,
                &format!("selftrain-{}-K{}.jsonl", cfg.split.strategy, cfg.split.k),
                &log.to_text(),
            )?;
            write(&cfg.output_dir, "pseudo_labels.tsv", &pseudo_label_audit(&gens))?;
            for g in &gens {
                println!(
                    "generation {}: target {}{}  test {:.4} ±{:.4}",
                    g.generation,
                    g.target_size,
                    if g.truncated { " (pool exhausted)" } else { "" },
                    g.test.mean,
                    g.test.std
                );
            }
        }
        Command::Report { .. } | Command::Replay { .. } => unreachable!(),
    }
    Ok(())
}

fn check_k(strategy: Strategy, k: usize) -> Result<()> {
    if strategy == Strategy::Mi && k % 2 != 0 {
        return Err(Error::Config(format!("MI needs an even K, got {k}")));
    }
    Ok(())
}
