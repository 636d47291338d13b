//! The production grid evaluator: trains and caches accurate networks,
//! quality-gates them, crafts adversarial sets against the accurate model,
//! builds the approximate networks, and pre-encodes every input so scoring
//! a grid cell is pure lookup plus forward passes.
//!
//! Seed discipline: every derived seed is keyed by content — the (v_th, T)
//! coordinates, the attack family's fixed ordinal, the budget bits, the
//! sample index — never by grid shape or scheduling order. A cell therefore
//! scores identically whether it is reached through a full sweep or through
//! a single-point evaluation.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::approx::{approximate, calibrate, layer_thresholds, AxNetwork, CALIBRATION_SAMPLES};
use crate::aqf::aqf_filter;
use crate::attacks::{bim, frame_attack, pgd, sparse_attack, AttackConfig, AttackKind};
use crate::codec::{rasterize, RasterSpec, SpikeTensor};
use crate::error::{Error, Result};
use crate::precision::quantize_network;
use crate::rng::{keyed_u64, Fingerprint};
use crate::snn::{LifParams, Network};
use crate::train::{
    check_quality, load_checkpoint, save_checkpoint, train_accurate, TrainConfig, TrainData,
};

use super::report::SkippedConfig;
use super::{ConfigEvaluator, DeskData, EvalOutcome, GridPoint, SweepConfig};

/// Seed for everything tied to one (v_th, T) pair.
fn pair_seed(sweep_seed: u64, v_th: f64, time_steps: usize) -> u64 {
    keyed_u64(sweep_seed, v_th.to_bits(), time_steps as u64)
}

/// Per-sample evaluation encoding seed; matches the derivation inside
/// `evaluate_accuracy`, so harness numbers line up with training reports.
fn eval_encode_seed(pair_seed: u64, idx: usize) -> u64 {
    keyed_u64(keyed_u64(pair_seed, 3, 0), 2, idx as u64)
}

/// Per-sample calibration encoding seed (kept distinct from evaluation).
fn calib_encode_seed(pair_seed: u64, idx: usize) -> u64 {
    keyed_u64(keyed_u64(pair_seed, 4, 0), 2, idx as u64)
}

/// Per-sample adversarial crafting seed, keyed by the attack's fixed
/// ordinal and the budget so it is independent of grid composition.
fn craft_seed(pair_seed: u64, attack: AttackKind, epsilon: f64, idx: usize) -> u64 {
    let ordinal = AttackKind::ALL
        .iter()
        .position(|k| *k == attack)
        .expect("all attack kinds are enumerated") as u64;
    keyed_u64(
        keyed_u64(pair_seed, ordinal, epsilon.to_bits()),
        0x6164,
        idx as u64,
    )
}

enum Split {
    Train,
    Test,
}

fn to_train_data(
    data: &DeskData,
    split: Split,
    time_steps: usize,
    window: Option<(f64, f64)>,
) -> Result<TrainData> {
    match data {
        DeskData::Images { train, test } => {
            let v = match split {
                Split::Train => train,
                Split::Test => test,
            };
            Ok(TrainData::Images(v.clone()))
        }
        DeskData::Streams { train, test } => {
            let spec = RasterSpec::new(
                time_steps,
                window.expect("stream data always has a raster window"),
            )?;
            let v = match split {
                Split::Train => train,
                Split::Test => test,
            };
            let encoded = v
                .iter()
                .map(|(s, label)| rasterize(s, &spec).map(|r| (r.stacked(), *label)))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainData::Spikes(encoded))
        }
    }
}

/// One approximation level of one precision scheme, ready to score.
struct PreparedLevel {
    axnet: AxNetwork,
    clean_accuracy: f64,
    pruned_fraction: Vec<f64>,
}

struct PreparedScheme {
    layer_ath: Vec<f64>,
    levels: Vec<PreparedLevel>,
}

/// Everything derived from one surviving (v_th, T) pair.
struct PreparedPair {
    v_th: f64,
    time_steps: usize,
    /// Accurate network's per-sample correctness on the clean test set;
    /// the adversarial count only charges samples this model got right.
    clean_correct: Vec<bool>,
    /// Aligned with the configuration's scheme list.
    schemes: Vec<PreparedScheme>,
    /// Pre-encoded attacked test inputs, indexed
    /// [attack_idx * |epsilons| + eps_idx][sample].
    adv_spikes: Vec<Vec<SpikeTensor>>,
}

enum PairOutcome {
    Ready(Box<PreparedPair>),
    Skipped(SkippedConfig),
}

/// The full-pipeline implementation of [`ConfigEvaluator`].
pub struct PreparedEvaluator {
    cfg: SweepConfig,
    test_labels: Vec<usize>,
    pairs: Vec<PreparedPair>,
    skipped: Vec<SkippedConfig>,
}

impl PreparedEvaluator {
    /// Run the shared stages for every (v_th, T) pair of the grid.
    ///
    /// Expects a normalized, validated configuration whose mode matches the
    /// data (as established by the public sweep entry points).
    pub fn prepare(cfg: &SweepConfig, data: &DeskData) -> Result<Self> {
        let classes = data.classes();
        if classes < 2 {
            return Err(Error::InvalidParam {
                name: "data",
                reason: "need at least two classes".into(),
            });
        }
        let mut arch = Vec::with_capacity(cfg.hidden.len() + 2);
        arch.push(data.input_width()?);
        arch.extend_from_slice(&cfg.hidden);
        arch.push(classes);
        let window = data.raster_window();
        let data_hash = data.fingerprint();

        let coords: Vec<(f64, usize)> = cfg
            .v_th_grid
            .iter()
            .flat_map(|&v| cfg.t_grid.iter().map(move |&t| (v, t)))
            .collect();
        let outcomes: Vec<PairOutcome> = coords
            .par_iter()
            .map(|&(v_th, t)| build_pair(cfg, data, &arch, window, data_hash, v_th, t))
            .collect::<Result<_>>()?;

        let mut pairs = Vec::new();
        let mut skipped = Vec::new();
        for outcome in outcomes {
            match outcome {
                PairOutcome::Ready(p) => pairs.push(*p),
                PairOutcome::Skipped(s) => skipped.push(s),
            }
        }
        let test_labels = match data {
            DeskData::Images { test, .. } => test.iter().map(|s| s.1).collect(),
            DeskData::Streams { test, .. } => test.iter().map(|s| s.1).collect(),
        };
        Ok(PreparedEvaluator {
            cfg: cfg.clone(),
            test_labels,
            pairs,
            skipped,
        })
    }
}

/// Cache file name for the accurate network at one grid pair: a fingerprint
/// over everything that determines the trained weights.
fn checkpoint_path(
    dir: &std::path::Path,
    cfg: &SweepConfig,
    arch: &[usize],
    data_hash: u64,
    v_th: f64,
    time_steps: usize,
) -> PathBuf {
    let mut fp = Fingerprint::new();
    fp.push_f64(v_th);
    fp.push_u64(time_steps as u64);
    fp.push_u64(data_hash);
    fp.push_u64(cfg.seed);
    fp.push_f64(cfg.beta);
    for &w in arch {
        fp.push_u64(w as u64);
    }
    fp.push_u64(cfg.train.epochs as u64);
    fp.push_u64(cfg.train.batch_size as u64);
    fp.push_f64(cfg.train.learning_rate);
    fp.push_f64(cfg.train.surrogate_slope);
    dir.join(format!("accsnn-{:016x}.axsn", fp.finish()))
}

/// Load a cached accurate network if it matches this configuration exactly.
fn try_cached(
    path: &std::path::Path,
    tcfg: &TrainConfig,
    arch: &[usize],
    v_th: f64,
    beta: f64,
    time_steps: usize,
) -> Option<(Network, f64)> {
    if !path.exists() {
        return None;
    }
    let (net, meta) = load_checkpoint(path).ok()?;
    let arch_matches = net.time_steps() == time_steps
        && net.layers().len() + 1 == arch.len()
        && net.input_size() == arch[0]
        && net.output_size() == *arch.last().unwrap()
        && net
            .layers()
            .iter()
            .all(|l| l.params().v_th == v_th && l.params().beta == beta);
    if arch_matches && meta.config == *tcfg {
        Some((net, meta.accuracy))
    } else {
        None
    }
}

fn build_pair(
    cfg: &SweepConfig,
    data: &DeskData,
    arch: &[usize],
    window: Option<(f64, f64)>,
    data_hash: u64,
    v_th: f64,
    time_steps: usize,
) -> Result<PairOutcome> {
    let seed = pair_seed(cfg.seed, v_th, time_steps);
    let params = LifParams::new(v_th, cfg.beta)?;
    let tcfg = TrainConfig {
        seed,
        quality: cfg.quality,
        ..cfg.train
    };
    let train_data = to_train_data(data, Split::Train, time_steps, window)?;
    let test_data = to_train_data(data, Split::Test, time_steps, window)?;

    // Stage 1: the accurate network, from cache or by training.
    let cache_path = cfg
        .cache_dir
        .as_deref()
        .map(|d| checkpoint_path(d, cfg, arch, data_hash, v_th, time_steps));
    let cached = cache_path
        .as_deref()
        .and_then(|p| try_cached(p, &tcfg, arch, v_th, cfg.beta, time_steps));
    let (accurate, accuracy) = match cached {
        Some(hit) => hit,
        None => {
            if !cfg.train_enabled {
                return Err(Error::CacheMiss);
            }
            let init = Network::random(
                arch,
                params,
                time_steps,
                keyed_u64(seed, 0x696e, 0x6974),
            )?;
            let (net, accuracy) = train_accurate(&init, &train_data, &test_data, &tcfg)?;
            if let Some(path) = cache_path.as_deref() {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                save_checkpoint(&net, &tcfg, accuracy, path)?;
            }
            (net, accuracy)
        }
    };

    // Stage 2: the quality gate.
    if !check_quality(accuracy, cfg.quality) {
        return Ok(PairOutcome::Skipped(SkippedConfig {
            v_th,
            time_steps,
            accuracy,
            reason: format!(
                "clean accuracy {accuracy:.2} below quality level {}",
                cfg.quality
            ),
        }));
    }

    // Stage 3: clean test encodings and the accurate model's predictions.
    let n_test = test_data.len();
    let mut clean_spikes = Vec::with_capacity(n_test);
    let mut clean_correct = Vec::with_capacity(n_test);
    for idx in 0..n_test {
        let spikes = test_data.encode(idx, time_steps, eval_encode_seed(seed, idx))?;
        let pred = accurate.forward(&spikes)?.predicted_class();
        clean_correct.push(pred == test_data.label(idx));
        clean_spikes.push(spikes);
    }

    // Stage 4: per precision scheme — quantize, calibrate, approximate.
    let n_calib = CALIBRATION_SAMPLES.min(train_data.len());
    let calib_spikes: Vec<SpikeTensor> = (0..n_calib)
        .map(|idx| train_data.encode(idx, time_steps, calib_encode_seed(seed, idx)))
        .collect::<Result<_>>()?;
    let mut schemes = Vec::with_capacity(cfg.schemes.len());
    for &kind in &cfg.schemes {
        let (quantized, _) = quantize_network(&accurate, kind)?;
        let stats = calibrate(&quantized, &calib_spikes)?;
        let thresholds = layer_thresholds(&quantized, &stats)?;
        let layer_ath: Vec<f64> = thresholds.iter().map(|t| t.layer).collect();
        let mut levels = Vec::with_capacity(cfg.approx_levels.len());
        for &a_lvl in &cfg.approx_levels {
            let axnet = approximate(&quantized, &thresholds, a_lvl)?;
            let mut correct = 0usize;
            for (idx, spikes) in clean_spikes.iter().enumerate() {
                if axnet.forward(spikes)?.predicted_class() == test_data.label(idx) {
                    correct += 1;
                }
            }
            levels.push(PreparedLevel {
                pruned_fraction: axnet.pruned_fraction(),
                clean_accuracy: correct as f64 / n_test as f64 * 100.0,
                axnet,
            });
        }
        schemes.push(PreparedScheme { layer_ath, levels });
    }

    // Stage 5: adversarial sets, crafted once against the accurate network
    // and pre-encoded for reuse across every scheme and level.
    let mut adv_spikes = Vec::with_capacity(cfg.attacks.len() * cfg.epsilons.len());
    for &attack in &cfg.attacks {
        for &epsilon in &cfg.epsilons {
            adv_spikes.push(craft_set(
                cfg, data, &accurate, window, seed, time_steps, attack, epsilon,
            )?);
        }
    }

    Ok(PairOutcome::Ready(Box::new(PreparedPair {
        v_th,
        time_steps,
        clean_correct,
        schemes,
        adv_spikes,
    })))
}

/// Craft one attacked test set and encode it into network inputs.
///
/// For stream data the deployed pipeline applies: attack, then the
/// correlation filter, then rasterization. A sparse attack that finds no
/// usable gradient leaves that sample unattacked rather than aborting the
/// sweep.
#[allow(clippy::too_many_arguments)]
fn craft_set(
    cfg: &SweepConfig,
    data: &DeskData,
    accurate: &Network,
    window: Option<(f64, f64)>,
    seed: u64,
    time_steps: usize,
    attack: AttackKind,
    epsilon: f64,
) -> Result<Vec<SpikeTensor>> {
    let base_cfg = |idx: usize| {
        let mut a = AttackConfig::new(attack, epsilon);
        a.n_iter = cfg.attack_iters;
        a.k = cfg.attack_k;
        a.seed = craft_seed(seed, attack, epsilon, idx);
        a
    };
    match data {
        DeskData::Images { test, .. } => test
            .iter()
            .enumerate()
            .map(|(idx, (img, label))| {
                let acfg = base_cfg(idx);
                let adv = match attack {
                    AttackKind::Pgd => pgd(accurate, img, *label, &acfg)?,
                    AttackKind::Bim => bim(accurate, img, *label, &acfg)?,
                    other => {
                        return Err(Error::Config(format!(
                            "attack {other} needs event-stream data"
                        )))
                    }
                };
                crate::codec::rate_encode(&adv, time_steps, eval_encode_seed(seed, idx))
            })
            .collect(),
        DeskData::Streams { test, .. } => {
            let spec = RasterSpec::new(
                time_steps,
                window.expect("stream data always has a raster window"),
            )?;
            test.iter()
                .enumerate()
                .map(|(idx, (stream, label))| {
                    let acfg = base_cfg(idx);
                    let attacked = match attack {
                        AttackKind::Frame => frame_attack(stream, &spec)?,
                        AttackKind::Sparse => {
                            match sparse_attack(accurate, stream, *label, &acfg, &spec) {
                                Ok(s) => s,
                                Err(Error::GradientUnavailable(_)) => stream.clone(),
                                Err(e) => return Err(e),
                            }
                        }
                        other => {
                            return Err(Error::Config(format!(
                                "attack {other} needs image data"
                            )))
                        }
                    };
                    let filtered = aqf_filter(&attacked, &cfg.aqf)?;
                    Ok(rasterize(&filtered, &spec)?.stacked())
                })
                .collect()
        }
    }
}

impl ConfigEvaluator for PreparedEvaluator {
    fn evaluate(&self, point: &GridPoint) -> Result<Option<EvalOutcome>> {
        let pair = match self
            .pairs
            .iter()
            .find(|p| p.v_th == point.v_th && p.time_steps == point.time_steps)
        {
            Some(p) => p,
            None => {
                if self
                    .skipped
                    .iter()
                    .any(|s| s.v_th == point.v_th && s.time_steps == point.time_steps)
                {
                    return Ok(None);
                }
                return Err(Error::Config(format!(
                    "grid point (v_th={}, T={}) was not prepared",
                    point.v_th, point.time_steps
                )));
            }
        };
        let position = |name: &'static str, pos: Option<usize>| {
            pos.ok_or_else(|| {
                Error::Config(format!("{name} value not in the prepared configuration"))
            })
        };
        let scheme_idx = position(
            "scheme",
            self.cfg.schemes.iter().position(|&s| s == point.scheme),
        )?;
        let lvl_idx = position(
            "approximation level",
            self.cfg
                .approx_levels
                .iter()
                .position(|&a| a == point.a_lvl),
        )?;
        let attack_idx = position(
            "attack",
            self.cfg.attacks.iter().position(|&a| a == point.attack),
        )?;
        let eps_idx = position(
            "epsilon",
            self.cfg.epsilons.iter().position(|&e| e == point.epsilon),
        )?;

        let scheme = &pair.schemes[scheme_idx];
        let level = &scheme.levels[lvl_idx];
        let adv_set = &pair.adv_spikes[attack_idx * self.cfg.epsilons.len() + eps_idx];

        let mut correct = 0usize;
        let mut adv_count = 0usize;
        for (idx, spikes) in adv_set.iter().enumerate() {
            let pred = level.axnet.forward(spikes)?.predicted_class();
            if pred == self.test_labels[idx] {
                correct += 1;
            } else if pair.clean_correct[idx] {
                adv_count += 1;
            }
        }
        let samples = adv_set.len();
        Ok(Some(EvalOutcome {
            clean_accuracy: level.clean_accuracy,
            attacked_accuracy: correct as f64 / samples as f64 * 100.0,
            adv_count,
            samples,
            layer_ath: scheme.layer_ath.clone(),
            pruned_fraction: level.pruned_fraction.clone(),
        }))
    }

    fn skipped(&self) -> Vec<SkippedConfig> {
        self.skipped.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{evaluate_config, grid_points, sweep, DeskData, SweepConfig};
    use super::*;
    use crate::precision::SchemeKind;

    /// A small configuration that trains in well under a second per pair.
    fn tiny_cfg() -> SweepConfig {
        let mut cfg = SweepConfig::desk();
        cfg.v_th_grid = vec![0.75];
        cfg.t_grid = vec![6];
        cfg.schemes = vec![SchemeKind::Fp32];
        cfg.approx_levels = vec![0.0];
        cfg.epsilons = vec![0.0];
        cfg.attacks = vec![AttackKind::Pgd];
        cfg.quality = 0.0;
        cfg.hidden = vec![8];
        cfg.train.epochs = 6;
        cfg.train.batch_size = 8;
        cfg.seed = 11;
        cfg
    }

    fn tiny_data() -> DeskData {
        DeskData::synthetic_images(16, 8, 4, 4, 2, 5).unwrap()
    }

    #[test]
    fn zero_budget_identity_pipeline() {
        let report = sweep(&tiny_cfg(), &tiny_data()).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.skipped.is_empty());
        let row = &report.rows[0];
        // ε = 0 with the identity scheme and no pruning: the attacked
        // pipeline is bit-for-bit the clean pipeline.
        assert_eq!(row.clean_accuracy, row.attacked_accuracy);
        assert_eq!(
            row.robustness,
            (1.0 - row.adv_count as f64 / row.samples as f64) * 100.0
        );
        assert_eq!(row.pruned_fraction, vec![0.0, 0.0]);
        assert!(report.runtime_seconds > 0.0);
    }

    #[test]
    fn single_point_evaluation_matches_the_sweep() {
        let mut cfg = tiny_cfg();
        cfg.schemes = vec![SchemeKind::Fp32, SchemeKind::Int8];
        cfg.epsilons = vec![0.0, 0.5];
        let cfg = cfg.normalized();
        let data = tiny_data();
        let report = sweep(&cfg, &data).unwrap();
        for point in grid_points(&cfg) {
            let row = evaluate_config(&cfg, &data, &point).unwrap().unwrap();
            let sweep_row = report
                .rows
                .iter()
                .find(|r| {
                    r.v_th == point.v_th
                        && r.time_steps == point.time_steps
                        && r.scheme == point.scheme
                        && r.a_lvl == point.a_lvl
                        && r.attack == point.attack
                        && r.epsilon == point.epsilon
                })
                .unwrap();
            assert_eq!(&row, sweep_row);
        }
    }

    #[test]
    fn quality_gate_skips_and_logs() {
        let mut cfg = tiny_cfg();
        cfg.quality = 100.0;
        cfg.train.epochs = 0; // an untrained network stays near chance
        let report = sweep(&cfg, &tiny_data()).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.skipped.len(), 1);
        assert!(report.skipped[0].accuracy < 100.0);
        assert!(report.skipped[0].reason.contains("quality"));
        assert!(!report.met_quality());
    }

    #[test]
    fn checkpoint_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg();
        cfg.cache_dir = Some(dir.path().to_path_buf());
        let data = tiny_data();

        let first = sweep(&cfg, &data).unwrap();
        let cached_files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert!(
            cached_files
                .iter()
                .any(|f| f.to_string_lossy().ends_with(".axsn")),
            "a checkpoint file is written"
        );

        // Second run must load the cache (training disabled proves it).
        cfg.train_enabled = false;
        let second = sweep(&cfg, &data).unwrap();
        assert_eq!(first.to_csv(), second.to_csv());
    }

    #[test]
    fn cache_miss_with_training_disabled_errors() {
        let mut cfg = tiny_cfg();
        cfg.train_enabled = false;
        let err = sweep(&cfg, &tiny_data()).unwrap_err();
        assert!(matches!(err, Error::CacheMiss));
    }

    #[test]
    fn mismatched_mode_is_rejected() {
        let cfg = tiny_cfg(); // image attacks, neuromorphic = false
        let streams = DeskData::synthetic_streams(4, 2, 2, 30, 9).unwrap();
        assert!(sweep(&cfg, &streams).is_err());
    }

    #[test]
    fn stream_sweep_runs_end_to_end() {
        let mut cfg = tiny_cfg();
        cfg.neuromorphic = true;
        cfg.attacks = vec![AttackKind::Frame];
        cfg.t_grid = vec![5];
        cfg.hidden = vec![4];
        cfg.train.epochs = 2;
        let data = DeskData::synthetic_streams(6, 4, 2, 40, 9).unwrap();
        let report = sweep(&cfg, &data).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.samples, 4);
        assert!(row.adv_count <= row.samples);
        assert!((0.0..=100.0).contains(&row.robustness));
    }
}
