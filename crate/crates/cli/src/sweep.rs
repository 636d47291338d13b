//! `axsnn sweep` — run the full robustness grid search and write reports.

use std::path::PathBuf;

use clap::Args;

use axsnn_core::{sweep, Result};

use crate::config::ConfigArgs;
use crate::data::DataArgs;
use crate::EXIT_NO_CONFIG_MET_QUALITY;

/// Sweep the configured grid over (v_th, T, precision scheme, approximation
/// level, attack, epsilon): train or load the accurate networks, gate them
/// on quality, attack them, and score every approximate variant. Writes the
/// full report as CSV and JSON. Exits 2 when no configuration reached the
/// quality level Q.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub data: DataArgs,

    /// Report rows as CSV, one row per grid cell.
    #[arg(long, value_name = "FILE", default_value = "report.csv")]
    pub out_csv: PathBuf,

    /// Full report as JSON, including per-layer thresholds, skipped
    /// configurations, and best rows per attack.
    #[arg(long, value_name = "FILE", default_value = "report.json")]
    pub out_json: PathBuf,

    /// Also write (epsilon, attacked accuracy) series per configuration as
    /// CSV for external plotting.
    #[arg(long, value_name = "FILE")]
    pub emit_plotdata: Option<PathBuf>,
}

pub fn run(args: &SweepArgs) -> Result<i32> {
    let cfg = args.config.build()?;
    let data = args.data.build(cfg.neuromorphic)?;

    let report = sweep(&cfg, &data)?;

    std::fs::write(&args.out_csv, report.to_csv())?;
    std::fs::write(&args.out_json, report.to_json()?)?;
    if let Some(path) = &args.emit_plotdata {
        std::fs::write(path, report.plotdata_csv())?;
    }

    println!(
        "swept {} configurations ({} skipped by the quality gate) in {:.1} s",
        report.rows.len(),
        report.skipped.len(),
        report.runtime_seconds
    );
    for entry in &report.best {
        match &entry.row {
            Some(row) => println!(
                "best under {}: v_th {} T {} {} a_lvl {} epsilon {} -> R {:.2}",
                entry.attack,
                row.v_th,
                row.time_steps,
                row.scheme,
                row.a_lvl,
                row.epsilon,
                row.robustness
            ),
            None => println!("best under {}: no configuration met Q", entry.attack),
        }
    }
    println!("report -> {} and {}", args.out_csv.display(), args.out_json.display());

    if report.met_quality() {
        Ok(0)
    } else {
        eprintln!("no configuration met the quality level Q = {}%", cfg.quality);
        Ok(EXIT_NO_CONFIG_MET_QUALITY)
    }
}
