//! `axsnn eval` — score a single grid configuration through the pipeline.

use clap::Args;

use axsnn_core::{evaluate_config, AttackKind, GridPoint, Result, SchemeKind};

use crate::config::ConfigArgs;
use crate::data::DataArgs;
use crate::EXIT_QUALITY_GATE;

/// Evaluate one (v_th, T, scheme, a_lvl, attack, epsilon) cell: train or
/// load the accurate network, craft the attack, build the approximate
/// network, and report its robustness. Exits 3 when the accurate network
/// fails the quality gate.
#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub data: DataArgs,

    /// Neuron firing threshold.
    #[arg(long, default_value_t = 1.0)]
    pub v_th: f64,

    /// Simulation time steps per sample.
    #[arg(long, default_value_t = 12)]
    pub time_steps: usize,

    /// Weight precision scheme: INT8, FP16, or FP32.
    #[arg(long, default_value = "FP32")]
    pub scheme: SchemeKind,

    /// Approximation (pruning) level.
    #[arg(long, default_value_t = 0.0)]
    pub a_lvl: f64,

    /// Attack kind; defaults to PGD, or FRAME on neuromorphic runs.
    #[arg(long)]
    pub attack: Option<AttackKind>,

    /// Attack budget.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,

    /// Emit the row as JSON instead of key: value lines.
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: &EvalArgs) -> Result<i32> {
    let cfg = args.config.build()?;
    let data = args.data.build(cfg.neuromorphic)?;
    let attack = args.attack.unwrap_or(if cfg.neuromorphic {
        AttackKind::Frame
    } else {
        AttackKind::Pgd
    });
    let point = GridPoint {
        v_th: args.v_th,
        time_steps: args.time_steps,
        scheme: args.scheme,
        a_lvl: args.a_lvl,
        attack,
        epsilon: args.epsilon,
    };

    match evaluate_config(&cfg, &data, &point)? {
        Some(row) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&row)?);
            } else {
                println!(
                    "v_th {} T {} {} a_lvl {} {} epsilon {}",
                    row.v_th, row.time_steps, row.scheme, row.a_lvl, row.attack, row.epsilon
                );
                println!("clean accuracy:    {:.2}%", row.clean_accuracy);
                println!("attacked accuracy: {:.2}%", row.attacked_accuracy);
                println!("robustness:        {:.2}", row.robustness);
                println!("flipped samples:   {}/{}", row.adv_count, row.samples);
                println!("layer thresholds:  {:?}", row.layer_ath);
                println!("pruned fraction:   {:?}", row.pruned_fraction);
            }
            Ok(0)
        }
        None => {
            eprintln!(
                "quality gate: the accurate network at v_th {} with {} time steps \
                 is below Q = {}%",
                args.v_th, args.time_steps, cfg.quality
            );
            Ok(EXIT_QUALITY_GATE)
        }
    }
}
