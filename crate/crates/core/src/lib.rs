//! Workbench for studying approximate spiking neural networks under
//! adversarial attack: a leaky integrate-and-fire simulator with surrogate-
//! gradient training, precision scaling and activity-guided pruning,
//! gradient and event-stream attacks, an event correlation filter, and a
//! grid-sweep harness that searches for robust configurations.
//!
//! Layout:
//! - [`codec`]: images, spike tensors, event streams, file formats, and
//!   synthetic data generators.
//! - [`snn`]: the spiking network, its dynamics, and checkpointing.
//! - [`train`]: surrogate-gradient training and input gradients.
//! - [`precision`]: INT8/FP16/FP32 weight scaling.
//! - [`approx`]: activity-calibrated approximation thresholds and pruning.
//! - [`attacks`]: gradient-sign attacks on images, sparse and frame attacks
//!   on event streams.
//! - [`aqf`]: the quantize-and-correlate event filter defense.
//! - [`harness`]: the configuration sweep, robustness metric, and reports.

mod bin_io;

pub mod approx;
pub mod aqf;
pub mod attacks;
pub mod codec;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod precision;
pub mod rng;
pub mod snn;
pub mod train;

pub use approx::{
    approximate, calibrate, compute_ath, layer_thresholds, AxNetwork, LayerApproxStats,
    LayerThreshold, CALIBRATION_SAMPLES,
};
pub use aqf::{aqf_filter, aqf_filter_detailed, AqfParams, FilterState};
pub use attacks::{bim, frame_attack, pgd, sparse_attack, AttackConfig, AttackKind};
pub use codec::{
    load_events, load_idx_images, load_idx_labels, rasterize, rate_encode, save_events,
    save_idx_images, save_idx_labels, synth_gesture, synth_images, Event, EventStream, Image,
    PolarityRaster, RasterSpec, SpikeTensor,
};
pub use error::{Error, Result};
pub use harness::{
    evaluate_config, robustness, sweep, sweep_with, ConfigEvaluator, DeskData, EvalOutcome,
    GridPoint, PreparedEvaluator, ReportRow, RobustnessReport, SweepConfig,
};
pub use precision::{precision_scale, quantize_network, QuantScheme, SchemeKind};
pub use snn::{lif_step, spike_probability, DenseLayer, ForwardPass, LifParams, Network};
pub use train::{
    check_quality, evaluate_accuracy, input_gradient, input_gradient_smooth, input_spike_gradient,
    load_checkpoint, save_checkpoint, smooth_loss, train_accurate, CheckpointMeta, TrainConfig,
    TrainData,
};
