use std::fs;

use anyhow::Context;
use shapemeans_sim::{run_study, write_wmse_csv, StudyConfig};

use crate::args::SimulateArgs;
use crate::read_input;

/// Replications when neither the flag nor the scenario sets them.
pub const DEFAULT_REPS: usize = 1000;

/// Runs every scenario, prints one summary line each, and writes
/// `<scenario>.json`, `<scenario>_domains.csv` and `wmse.csv` into the
/// output directory.
pub fn run(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = StudyConfig::from_json(&read_input(&args.config)?)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut reports = Vec::with_capacity(cfg.scenarios.len());
    for scenario in &cfg.scenarios {
        let reps = args.reps.or(scenario.reps).unwrap_or(DEFAULT_REPS);
        let report = run_study(scenario, reps, args.seed, args.threads)
            .with_context(|| format!("scenario {}", scenario.name))?;
        println!("{}", report.summary_line());
        report.write_files(&args.out)?;
        reports.push(report);
    }
    let path = args.out.join("wmse.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_wmse_csv(&reports, file)?;
    Ok(())
}
