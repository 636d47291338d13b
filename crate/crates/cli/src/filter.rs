//! `axsnn filter` — denoise an event stream with the correlation filter.

use std::path::PathBuf;

use clap::Args;

use axsnn_core::{aqf_filter, load_events, save_events, AqfParams, Result};

/// Filter an event stream: events without recent neighborhood support are
/// dropped, kept events carry quantized timestamps.
#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Input event stream.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Filtered output stream.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,

    /// Timestamp quantization step; 0 keeps timestamps exact.
    #[arg(long, default_value_t = AqfParams::default().q_t)]
    pub q_t: f64,

    /// Neighborhood radius in pixels.
    #[arg(long, default_value_t = AqfParams::default().s)]
    pub s: usize,

    /// Activity count above which a pixel is flagged hot.
    #[arg(long, default_value_t = AqfParams::default().t1)]
    pub t1: u32,

    /// Maximum age of neighborhood support before an event is dropped.
    #[arg(long, default_value_t = AqfParams::default().t2)]
    pub t2: f64,
}

pub fn run(args: &FilterArgs) -> Result<i32> {
    let params = AqfParams {
        q_t: args.q_t,
        s: args.s,
        t1: args.t1,
        t2: args.t2,
    };
    let stream = crate::annotate(load_events(&args.input), &args.input)?;
    let filtered = aqf_filter(&stream, &params)?;
    save_events(&filtered, &args.output)?;
    println!(
        "kept {} removed {} -> {}",
        filtered.len(),
        stream.len() - filtered.len(),
        args.output.display()
    );
    Ok(0)
}
