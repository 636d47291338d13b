//! `axsnn attack` — craft adversarial examples against a trained network.
//!
//! Gradient-sign attacks (PGD, BIM) perturb an image dataset and write the
//! adversarial set as IDX files. Event-stream attacks (FRAME, SPARSE) read
//! one stream and write the attacked stream.

use std::path::PathBuf;

use clap::Args;

use axsnn_core::rng::keyed_u64;
use axsnn_core::{
    bim, evaluate_accuracy, frame_attack, load_checkpoint, load_events, pgd, save_events,
    save_idx_images, save_idx_labels, sparse_attack, AttackConfig, AttackKind, DeskData, Error,
    Image, RasterSpec, Result, TrainData,
};

use crate::data::DataArgs;

/// Craft adversarial examples against a trained network. PGD and BIM
/// perturb an image dataset and write IDX files; FRAME and SPARSE attack a
/// single event stream.
#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Attack kind: PGD, BIM, FRAME, or SPARSE.
    #[arg(long)]
    pub attack: AttackKind,

    /// Trained checkpoint (required for PGD, BIM, SPARSE).
    #[arg(long, value_name = "FILE")]
    pub net: Option<PathBuf>,

    /// l-infinity budget in pixel units (PGD/BIM).
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,

    /// Gradient step size; defaults to epsilon / 4.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Attack iterations.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,

    /// Pixels toggled per SPARSE iteration.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Base seed for attack randomness and evaluation encodings.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub data: DataArgs,

    /// Adversarial images output (IDX, PGD/BIM).
    #[arg(long, value_name = "FILE")]
    pub out_images: Option<PathBuf>,

    /// Labels of the attacked set (IDX, PGD/BIM).
    #[arg(long, value_name = "FILE")]
    pub out_labels: Option<PathBuf>,

    /// Input event stream (FRAME/SPARSE).
    #[arg(long, value_name = "FILE")]
    pub in_stream: Option<PathBuf>,

    /// Attacked event stream output (FRAME/SPARSE).
    #[arg(long, value_name = "FILE")]
    pub out_stream: Option<PathBuf>,

    /// True label of the input stream (SPARSE).
    #[arg(long)]
    pub label: Option<usize>,

    /// Raster time bins for stream attacks.
    #[arg(long, default_value_t = 12)]
    pub bins: usize,
}

pub fn run(args: &AttackArgs) -> Result<i32> {
    match args.attack {
        AttackKind::Pgd | AttackKind::Bim => attack_images(args),
        AttackKind::Frame | AttackKind::Sparse => attack_stream(args),
    }
}

fn require<'a, T>(opt: &'a Option<T>, flag: &str, attack: AttackKind) -> Result<&'a T> {
    opt.as_ref()
        .ok_or_else(|| Error::Config(format!("{attack} requires --{flag}")))
}

fn attack_config(args: &AttackArgs) -> AttackConfig {
    let mut cfg = AttackConfig::new(args.attack, args.epsilon);
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    cfg.n_iter = args.iters;
    cfg.k = args.k;
    cfg
}

/// Perturb the test split of an image dataset and write it as IDX files.
/// Intensities are rounded to 8 bits on write, like any IDX image.
fn attack_images(args: &AttackArgs) -> Result<i32> {
    let net_path = require(&args.net, "net", args.attack)?;
    let out_images = require(&args.out_images, "out-images", args.attack)?;
    let (net, _) = crate::annotate(load_checkpoint(net_path), net_path)?;

    let data = args.data.build(false)?;
    let test = match &data {
        DeskData::Images { test, .. } => test.clone(),
        DeskData::Streams { .. } => {
            return Err(Error::Config(format!(
                "{} attacks images; the dataset is event streams",
                args.attack
            )))
        }
    };

    let base = attack_config(args);
    let mut adversarial: Vec<(Image, usize)> = Vec::with_capacity(test.len());
    for (idx, (img, label)) in test.iter().enumerate() {
        let mut cfg = base;
        cfg.seed = keyed_u64(args.seed, 0x6174, idx as u64);
        let adv = match args.attack {
            AttackKind::Pgd => pgd(&net, img, *label, &cfg)?,
            AttackKind::Bim => bim(&net, img, *label, &cfg)?,
            _ => unreachable!("image attacks only"),
        };
        adversarial.push((adv, *label));
    }

    let clean = evaluate_accuracy(&net, &TrainData::Images(test), args.seed)?;
    let attacked =
        evaluate_accuracy(&net, &TrainData::Images(adversarial.clone()), args.seed)?;

    let images: Vec<Image> = adversarial.iter().map(|(i, _)| i.clone()).collect();
    let labels: Vec<u8> = adversarial.iter().map(|(_, l)| *l as u8).collect();
    save_idx_images(out_images, &images)?;
    if let Some(out_labels) = &args.out_labels {
        save_idx_labels(out_labels, &labels)?;
    }

    println!(
        "{} at epsilon {}: accuracy {clean:.2}% -> {attacked:.2}% over {} samples -> {}",
        args.attack,
        args.epsilon,
        images.len(),
        out_images.display()
    );
    Ok(0)
}

/// Attack a single event stream and write the result.
fn attack_stream(args: &AttackArgs) -> Result<i32> {
    let in_stream = require(&args.in_stream, "in-stream", args.attack)?;
    let out_stream = require(&args.out_stream, "out-stream", args.attack)?;
    let stream = crate::annotate(load_events(in_stream), in_stream)?;
    let window = stream
        .last_timestamp()
        .map(|t| (0.0, t + 1.0))
        .ok_or_else(|| Error::Config("input stream has no events to attack".into()))?;
    let spec = RasterSpec::new(args.bins, window)?;

    let attacked = match args.attack {
        AttackKind::Frame => frame_attack(&stream, &spec)?,
        AttackKind::Sparse => {
            let net_path = require(&args.net, "net", args.attack)?;
            let label = *require(&args.label, "label", args.attack)?;
            let (net, _) = crate::annotate(load_checkpoint(net_path), net_path)?;
            let mut cfg = attack_config(args);
            cfg.seed = args.seed;
            sparse_attack(&net, &stream, label, &cfg, &spec)?
        }
        _ => unreachable!("stream attacks only"),
    };

    save_events(&attacked, out_stream)?;
    println!(
        "{}: {} events -> {} events -> {}",
        args.attack,
        stream.len(),
        attacked.len(),
        out_stream.display()
    );
    Ok(0)
}
