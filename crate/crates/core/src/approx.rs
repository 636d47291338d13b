//! Approximation thresholds and connection pruning: turn an accurate,
//! precision-scaled network into its approximate counterpart by removing
//! weak connections.
//!
//! The threshold blends three ingredients measured on a clean calibration
//! run: how busy a layer is (spikes per time step across its fan-in), how
//! likely each neuron is to fire (mean membrane potential against the
//! threshold voltage), and how much synaptic weight feeds each neuron. The
//! user-facing approximation level then scales that threshold into a weight
//! magnitude cutoff.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::bin_io::BinReader;
use crate::codec::SpikeTensor;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::snn::{ForwardPass, Network};

/// Magic bytes introducing the mask section of an approximate checkpoint.
const MASK_MAGIC: &[u8; 4] = b"AXMK";
const MASK_VERSION: u32 = 1;

/// Number of clean samples used to gather calibration statistics.
pub const CALIBRATION_SAMPLES: usize = 64;

/// Activity statistics of one layer over a calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerApproxStats {
    /// Connections feeding each neuron (dense fan-in).
    pub fan_in: usize,
    /// Total spikes the layer emitted over the whole calibration run.
    pub layer_spikes: f64,
    /// Per-neuron sum of incoming precision-scaled weights.
    pub weight_sums: Vec<f64>,
    /// Per-neuron mean pre-reset membrane potential.
    pub mean_membrane: Vec<f64>,
}

impl LayerApproxStats {
    /// Per-neuron firing probability estimate, clamped into [0, 1].
    pub fn spike_probabilities(&self, v_th: f64) -> Vec<f64> {
        self.mean_membrane
            .iter()
            .map(|&m| (m / v_th).clamp(0.0, 1.0))
            .collect()
    }
}

/// Per-layer approximation threshold and the factor that converts it back
/// into the weight-magnitude domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerThreshold {
    /// Threshold per neuron: drive rate x spike probability x weight sum.
    pub per_neuron: Vec<f64>,
    /// Layer-level threshold: mean of the per-neuron values. This is the
    /// raw value recorded in reports.
    pub layer: f64,
    /// Spike drive rate c * N_s / T; dividing the layer threshold by this
    /// maps it into weight units for pruning.
    pub drive_rate: f64,
}

/// Evaluate the approximation threshold for one layer.
pub fn compute_ath(stats: &LayerApproxStats, time_steps: usize, v_th: f64) -> Result<LayerThreshold> {
    if time_steps == 0 {
        return Err(Error::InvalidParam {
            name: "time_steps",
            reason: "at least one time step required".into(),
        });
    }
    if !(v_th.is_finite() && v_th > 0.0) {
        return Err(Error::InvalidParam {
            name: "v_th",
            reason: format!("threshold voltage must be positive, got {v_th}"),
        });
    }
    if stats.weight_sums.len() != stats.mean_membrane.len() || stats.weight_sums.is_empty() {
        return Err(Error::Dimension {
            context: "compute_ath stats",
            expected: format!("{} nonzero neuron entries", stats.weight_sums.len()),
            actual: format!("{} membrane entries", stats.mean_membrane.len()),
        });
    }
    let drive_rate = stats.fan_in as f64 * stats.layer_spikes / time_steps as f64;
    let probs = stats.spike_probabilities(v_th);
    let per_neuron: Vec<f64> = probs
        .iter()
        .zip(&stats.weight_sums)
        .map(|(&p, &w)| drive_rate * p * w)
        .collect();
    let layer = per_neuron.iter().sum::<f64>() / per_neuron.len() as f64;
    Ok(LayerThreshold {
        per_neuron,
        layer,
        drive_rate,
    })
}

/// Run clean samples through the network and gather per-layer statistics.
pub fn calibrate(net: &Network, samples: &[SpikeTensor]) -> Result<Vec<LayerApproxStats>> {
    if samples.is_empty() {
        return Err(Error::MissingCalibration);
    }
    let mut stats: Vec<LayerApproxStats> = net
        .layers()
        .iter()
        .map(|l| LayerApproxStats {
            fan_in: l.fan_in(),
            layer_spikes: 0.0,
            weight_sums: l.weights().col_sums(),
            mean_membrane: vec![0.0; l.fan_out()],
        })
        .collect();
    for sample in samples {
        let pass = net.forward(sample)?;
        for (stat, trace) in stats.iter_mut().zip(&pass.traces) {
            stat.layer_spikes += trace.total_spikes();
            for (acc, m) in stat.mean_membrane.iter_mut().zip(trace.mean_membrane()) {
                *acc += m;
            }
        }
    }
    let n = samples.len() as f64;
    for stat in &mut stats {
        for m in &mut stat.mean_membrane {
            *m /= n;
        }
    }
    Ok(stats)
}

/// Thresholds for every layer of a calibrated network.
pub fn layer_thresholds(net: &Network, stats: &[LayerApproxStats]) -> Result<Vec<LayerThreshold>> {
    if stats.len() != net.layers().len() {
        return Err(Error::Dimension {
            context: "layer_thresholds",
            expected: format!("{} layers", net.layers().len()),
            actual: format!("{} stat entries", stats.len()),
        });
    }
    net.layers()
        .iter()
        .zip(stats)
        .map(|(layer, stat)| compute_ath(stat, net.time_steps(), layer.params().v_th))
        .collect()
}

/// Stable ascending sort of a weight matrix, returned as (flat index, value)
/// pairs; duplicates keep their original relative order.
pub fn sort_weights(weights: &Matrix) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = weights.data().iter().copied().enumerate().collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

/// A network with some connections masked out, plus the bookkeeping needed
/// to report how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct AxNetwork {
    base: Network,
    /// One byte per weight, row-major per layer; 1 keeps the connection.
    masks: Vec<Vec<u8>>,
    /// Raw layer thresholds the masks were derived from.
    layer_ath: Vec<f64>,
    a_lvl: f64,
}

/// Prune connections of a precision-scaled network.
///
/// The cutoff for layer l is `a_lvl * |ath_l| / drive_rate_l`: the layer
/// threshold mapped into the weight-magnitude domain and scaled by the
/// user-facing approximation level. Connections with |w| below the cutoff
/// are removed; a_lvl = 0 (or a silent layer) prunes nothing.
pub fn approximate(
    net: &Network,
    thresholds: &[LayerThreshold],
    a_lvl: f64,
) -> Result<AxNetwork> {
    if !(a_lvl.is_finite() && a_lvl >= 0.0) {
        return Err(Error::InvalidParam {
            name: "a_lvl",
            reason: format!("approximation level must be finite and >= 0, got {a_lvl}"),
        });
    }
    if thresholds.len() != net.layers().len() {
        return Err(Error::Dimension {
            context: "approximate thresholds",
            expected: format!("{} layers", net.layers().len()),
            actual: format!("{} thresholds", thresholds.len()),
        });
    }
    let mut masks = Vec::with_capacity(net.layers().len());
    for (layer, th) in net.layers().iter().zip(thresholds) {
        let cutoff = if th.drive_rate > 0.0 {
            a_lvl * th.layer.abs() / th.drive_rate
        } else {
            0.0
        };
        let mask: Vec<u8> = layer
            .weights()
            .data()
            .iter()
            .map(|&w| u8::from(w.abs() >= cutoff))
            .collect();
        masks.push(mask);
    }
    Ok(AxNetwork {
        base: net.clone(),
        masks,
        layer_ath: thresholds.iter().map(|t| t.layer).collect(),
        a_lvl,
    })
}

impl AxNetwork {
    pub fn base(&self) -> &Network {
        &self.base
    }

    pub fn masks(&self) -> &[Vec<u8>] {
        &self.masks
    }

    pub fn layer_ath(&self) -> &[f64] {
        &self.layer_ath
    }

    pub fn a_lvl(&self) -> f64 {
        self.a_lvl
    }

    /// Forward pass that skips masked connections.
    pub fn forward(&self, input: &SpikeTensor) -> Result<ForwardPass> {
        self.base.forward_masked(input, Some(&self.masks))
    }

    /// Fraction of connections removed, per layer.
    pub fn pruned_fraction(&self) -> Vec<f64> {
        self.masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b == 0).count() as f64 / m.len() as f64)
            .collect()
    }

    /// Materialize the mask: a plain network with pruned weights set to 0.
    pub fn pruned_network(&self) -> Network {
        let mut net = self.base.clone();
        for (layer, mask) in net.layers_mut().iter_mut().zip(&self.masks) {
            for (w, &m) in layer.weights_mut().data_mut().iter_mut().zip(mask) {
                if m == 0 {
                    *w = 0.0;
                }
            }
        }
        net
    }

    /// Serialize as the base checkpoint followed by a mask section.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        self.base.write_to(&mut w)?;
        w.write_all(MASK_MAGIC)?;
        w.write_u32::<LittleEndian>(MASK_VERSION)?;
        w.write_f64::<LittleEndian>(self.a_lvl)?;
        w.write_u32::<LittleEndian>(self.masks.len() as u32)?;
        for (mask, &ath) in self.masks.iter().zip(&self.layer_ath) {
            w.write_f64::<LittleEndian>(ath)?;
            let mut packed = vec![0u8; mask.len().div_ceil(8)];
            for (bit, &m) in mask.iter().enumerate() {
                if m != 0 {
                    packed[bit / 8] |= 1 << (bit % 8);
                }
            }
            w.write_all(&packed)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let mut r = BinReader::new(BufReader::new(file), &path.display().to_string());
        let base = Network::read_from(&mut r)?;
        r.magic(MASK_MAGIC, "mask section")?;
        let version = r.u32("mask version")?;
        if version != MASK_VERSION {
            return Err(r.error(format!("unsupported mask version {version}")));
        }
        let a_lvl = r.f64("approximation level")?;
        if !(a_lvl.is_finite() && a_lvl >= 0.0) {
            return Err(r.error(format!("invalid approximation level {a_lvl}")));
        }
        let n_layers = r.u32("mask layer count")? as usize;
        if n_layers != base.layers().len() {
            return Err(r.error(format!(
                "mask section has {n_layers} layers, network has {}",
                base.layers().len()
            )));
        }
        let mut masks = Vec::with_capacity(n_layers);
        let mut layer_ath = Vec::with_capacity(n_layers);
        for layer in base.layers() {
            layer_ath.push(r.f64("layer threshold")?);
            let n_weights = layer.fan_in() * layer.fan_out();
            let packed = r.bytes(n_weights.div_ceil(8), "mask bits")?;
            let mask: Vec<u8> = (0..n_weights)
                .map(|bit| (packed[bit / 8] >> (bit % 8)) & 1)
                .collect();
            masks.push(mask);
        }
        r.expect_eof()?;
        Ok(AxNetwork {
            base,
            masks,
            layer_ath,
            a_lvl,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::LifParams;

    fn fixture_stats() -> LayerApproxStats {
        LayerApproxStats {
            fan_in: 4,
            layer_spikes: 2.0,
            weight_sums: vec![0.8],
            mean_membrane: vec![0.5],
        }
    }

    #[test]
    fn threshold_fixture_value() {
        // (4 * 2 / 8) * min(1, 0.5 / 1.0) * 0.8 = 0.4.
        let th = compute_ath(&fixture_stats(), 8, 1.0).unwrap();
        assert!((th.per_neuron[0] - 0.4).abs() < 1e-12);
        assert!((th.layer - 0.4).abs() < 1e-12);
        assert_eq!(th.drive_rate, 1.0);
    }

    #[test]
    fn dead_layer_has_zero_threshold() {
        let mut stats = fixture_stats();
        stats.layer_spikes = 0.0;
        let th = compute_ath(&stats, 8, 1.0).unwrap();
        assert_eq!(th.per_neuron, vec![0.0]);
        assert_eq!(th.layer, 0.0);
    }

    #[test]
    fn saturated_membrane_caps_probability_at_one() {
        let mut stats = fixture_stats();
        stats.mean_membrane = vec![5.0];
        let th = compute_ath(&stats, 8, 1.0).unwrap();
        // Probability capped at 1: threshold is exactly drive_rate * sum.
        assert_eq!(th.per_neuron[0], th.drive_rate * 0.8);
    }

    #[test]
    fn threshold_scales_linearly_with_weights() {
        let th1 = compute_ath(&fixture_stats(), 8, 1.0).unwrap();
        let mut scaled = fixture_stats();
        scaled.weight_sums = vec![0.8 * 3.5];
        let th2 = compute_ath(&scaled, 8, 1.0).unwrap();
        assert!((th2.layer - 3.5 * th1.layer).abs() < 1e-12 * th2.layer.abs().max(1.0));
    }

    #[test]
    fn negative_membrane_clamps_to_zero_probability() {
        let stats = LayerApproxStats {
            fan_in: 2,
            layer_spikes: 4.0,
            weight_sums: vec![1.0],
            mean_membrane: vec![-3.0],
        };
        assert_eq!(stats.spike_probabilities(1.0), vec![0.0]);
        let th = compute_ath(&stats, 4, 1.0).unwrap();
        assert_eq!(th.per_neuron, vec![0.0]);
    }

    #[test]
    fn calibration_requires_samples() {
        let net = Network::random(&[3, 2], LifParams::default(), 4, 0).unwrap();
        assert!(matches!(
            calibrate(&net, &[]),
            Err(Error::MissingCalibration)
        ));
    }

    #[test]
    fn calibration_counts_spikes_of_a_driven_neuron() {
        // One input firing every step through weight 2 with no leak fires
        // every step: N_s = T per sample.
        let p = LifParams::new(1.0, 1.0).unwrap();
        let net = Network::new(
            vec![crate::snn::DenseLayer::new(
                Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
                p,
            )
            .unwrap()],
            5,
        )
        .unwrap();
        let mut s = SpikeTensor::zeros(5, 1);
        for t in 0..5 {
            s.set(t, 0, 1);
        }
        let stats = calibrate(&net, &[s.clone(), s]).unwrap();
        assert_eq!(stats[0].layer_spikes, 10.0);
        assert_eq!(stats[0].weight_sums, vec![2.0]);
        assert_eq!(stats[0].mean_membrane, vec![2.0]);
    }

    #[test]
    fn sort_weights_is_stable_ascending() {
        assert!(sort_weights(&Matrix::zeros(0, 0)).is_empty());
        let m = Matrix::from_vec(1, 3, vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(sort_weights(&m), vec![(1, 1.0), (2, 2.0), (0, 3.0)]);
        let dup = Matrix::from_vec(1, 3, vec![2.0, 1.0, 2.0]).unwrap();
        assert_eq!(sort_weights(&dup), vec![(1, 1.0), (0, 2.0), (2, 2.0)]);
    }

    fn uniform_thresholds(net: &Network, layer: f64, drive_rate: f64) -> Vec<LayerThreshold> {
        net.layers()
            .iter()
            .map(|l| LayerThreshold {
                per_neuron: vec![layer; l.fan_out()],
                layer,
                drive_rate,
            })
            .collect()
    }

    #[test]
    fn level_zero_is_the_identity_pipeline() {
        let net = Network::random(&[6, 4, 3], LifParams::default(), 5, 13).unwrap();
        let ax = approximate(&net, &uniform_thresholds(&net, 0.7, 2.0), 0.0).unwrap();
        let mut input = SpikeTensor::zeros(5, 6);
        for t in 0..5 {
            input.set(t, (t * 2) % 6, 1);
        }
        assert_eq!(
            ax.forward(&input).unwrap(),
            net.forward(&input).unwrap()
        );
        assert_eq!(ax.pruned_fraction(), vec![0.0, 0.0]);
    }

    #[test]
    fn negative_level_is_rejected() {
        let net = Network::random(&[3, 2], LifParams::default(), 4, 0).unwrap();
        assert!(approximate(&net, &uniform_thresholds(&net, 1.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn huge_threshold_prunes_everything() {
        let net = Network::random(&[4, 3], LifParams::default(), 6, 17).unwrap();
        let ax = approximate(&net, &uniform_thresholds(&net, 1e9, 1.0), 1.0).unwrap();
        assert_eq!(ax.pruned_fraction(), vec![1.0]);
        let mut input = SpikeTensor::zeros(6, 4);
        for t in 0..6 {
            for n in 0..4 {
                input.set(t, n, 1);
            }
        }
        assert_eq!(ax.forward(&input).unwrap().logits, vec![0.0; 3]);
    }

    #[test]
    fn higher_levels_prune_supersets() {
        let net = Network::random(&[8, 6], LifParams::default(), 4, 23).unwrap();
        let ths = uniform_thresholds(&net, 0.5, 1.0);
        let small = approximate(&net, &ths, 0.01).unwrap();
        let large = approximate(&net, &ths, 0.1).unwrap();
        for (ms, ml) in small.masks().iter().zip(large.masks()) {
            for (s, l) in ms.iter().zip(ml) {
                // Everything the small level prunes, the large level prunes.
                assert!(
                    !(*s == 0 && *l == 1),
                    "a lower level pruned a connection a higher level kept"
                );
            }
        }
    }

    #[test]
    fn masked_forward_equals_zeroed_weights_exactly() {
        let net = Network::random(&[7, 5, 2], LifParams::default(), 6, 31).unwrap();
        let ax = approximate(&net, &uniform_thresholds(&net, 0.4, 1.5), 0.5).unwrap();
        let zeroed = ax.pruned_network();
        let mut input = SpikeTensor::zeros(6, 7);
        for t in 0..6 {
            input.set(t, t % 7, 1);
            input.set(t, (t + 3) % 7, 1);
        }
        let a = ax.forward(&input).unwrap();
        let b = zeroed.forward(&input).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn silent_layer_prunes_nothing() {
        let net = Network::random(&[4, 4], LifParams::default(), 4, 3).unwrap();
        let ths = uniform_thresholds(&net, 0.0, 0.0);
        let ax = approximate(&net, &ths, 1.0).unwrap();
        assert_eq!(ax.pruned_fraction(), vec![0.0]);
    }

    #[test]
    fn approximate_checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.axsn");
        let net = Network::random(&[9, 4, 2], LifParams::default(), 7, 41).unwrap();
        let ax = approximate(&net, &uniform_thresholds(&net, 0.3, 2.0), 0.1).unwrap();
        ax.save(&path).unwrap();
        let back = AxNetwork::load(&path).unwrap();
        assert_eq!(ax, back);
    }

    #[test]
    fn approximate_checkpoint_rejects_trailing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.axsn");
        let net = Network::random(&[3, 2], LifParams::default(), 4, 5).unwrap();
        let ax = approximate(&net, &uniform_thresholds(&net, 0.3, 2.0), 0.0).unwrap();
        ax.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0xFF);
        std::fs::write(&path, bytes).unwrap();
        assert!(AxNetwork::load(&path).is_err());
    }
}
