//! Weight precision scaling: INT8 / binary16 / binary32 quantize-dequantize.
//!
//! Quantization is "fake": weights are rounded to the target representation
//! and immediately widened back to f64, so all downstream arithmetic stays in
//! one numeric domain while carrying the low-precision values exactly.

use std::str::FromStr;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::snn::{DenseLayer, Network};

/// The three supported weight precisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "INT8")]
    Int8,
    #[serde(rename = "FP16")]
    Fp16,
    #[serde(rename = "FP32")]
    Fp32,
}

impl SchemeKind {
    /// Report label for this precision.
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Int8 => "INT8",
            SchemeKind::Fp16 => "FP16",
            SchemeKind::Fp32 => "FP32",
        }
    }

    /// Storage width in bits; used as a tie-breaker when ranking configs.
    pub fn bit_width(&self) -> u32 {
        match self {
            SchemeKind::Int8 => 8,
            SchemeKind::Fp16 => 16,
            SchemeKind::Fp32 => 32,
        }
    }

    pub const ALL: [SchemeKind; 3] = [SchemeKind::Int8, SchemeKind::Fp16, SchemeKind::Fp32];
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "INT8" => Ok(SchemeKind::Int8),
            "FP16" => Ok(SchemeKind::Fp16),
            "FP32" => Ok(SchemeKind::Fp32),
            other => Err(Error::Config(format!(
                "unknown precision scheme '{other}' (expected INT8, FP16 or FP32)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A fitted per-layer quantization scheme. For INT8 the scale is frozen at
/// fit time so re-applying the same scheme is exactly idempotent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuantScheme {
    Fp32,
    Fp16,
    Int8 {
        /// Dequantization step; > 0. One integer unit equals `scale`.
        scale: f64,
        /// Always 0: symmetric quantization preserves sign and zero.
        zero_point: i8,
    },
}

impl QuantScheme {
    /// Fit a scheme of the given kind to one layer's weights.
    ///
    /// INT8 uses a symmetric per-layer scale max|w|/127; an all-zero layer
    /// gets scale 1 so the mapping stays the identity on zeros.
    pub fn fit(kind: SchemeKind, weights: &Matrix) -> QuantScheme {
        match kind {
            SchemeKind::Fp32 => QuantScheme::Fp32,
            SchemeKind::Fp16 => QuantScheme::Fp16,
            SchemeKind::Int8 => {
                let max = weights.max_abs();
                let scale = if max > 0.0 { max / 127.0 } else { 1.0 };
                QuantScheme::Int8 {
                    scale,
                    zero_point: 0,
                }
            }
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            QuantScheme::Fp32 => SchemeKind::Fp32,
            QuantScheme::Fp16 => SchemeKind::Fp16,
            QuantScheme::Int8 { .. } => SchemeKind::Int8,
        }
    }

    /// Quantize-dequantize a single weight.
    #[inline]
    pub fn apply(&self, w: f64) -> f64 {
        match *self {
            QuantScheme::Fp32 => w,
            QuantScheme::Fp16 => {
                // Round-to-nearest-even into binary16, saturating at the
                // finite range so widened weights stay finite.
                let h = f16::from_f64(w);
                let h = if h.is_infinite() {
                    if h.is_sign_positive() {
                        f16::MAX
                    } else {
                        f16::MIN
                    }
                } else {
                    h
                };
                h.to_f64()
            }
            QuantScheme::Int8 { scale, .. } => {
                let q = (w / scale).round().clamp(-128.0, 127.0);
                q * scale
            }
        }
    }
}

/// Quantize-dequantize a whole weight matrix under a fitted scheme.
pub fn precision_scale(weights: &Matrix, scheme: &QuantScheme) -> Matrix {
    weights.map(|w| scheme.apply(w))
}

/// Largest absolute difference between original and precision-scaled
/// weights; the representation-error yardstick used by the quality checks.
pub fn quant_error_bound(weights: &Matrix, scheme: &QuantScheme) -> f64 {
    weights
        .data()
        .iter()
        .map(|&w| (w - scheme.apply(w)).abs())
        .fold(0.0, f64::max)
}

/// Precision-scale every layer of a network, fitting one scheme per layer.
///
/// Returns the scaled network together with the fitted schemes in layer
/// order, so callers can re-apply or record them.
pub fn quantize_network(net: &Network, kind: SchemeKind) -> Result<(Network, Vec<QuantScheme>)> {
    let mut layers = Vec::with_capacity(net.layers().len());
    let mut schemes = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let scheme = QuantScheme::fit(kind, layer.weights());
        let scaled = precision_scale(layer.weights(), &scheme);
        layers.push(DenseLayer::new(scaled, *layer.params())?);
        schemes.push(scheme);
    }
    Ok((Network::new(layers, net.time_steps())?, schemes))
}
