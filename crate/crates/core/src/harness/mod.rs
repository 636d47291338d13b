//! Sweep orchestration: train accurate networks over a (v_th, T) grid, craft
//! adversarial examples against them, build precision-scaled approximate
//! networks, and measure robustness for every grid configuration.
//!
//! The sweep is staged so that expensive artifacts are shared: one training
//! per (v_th, T), one calibration per precision scheme, one adversarial set
//! per (v_th, T, attack, ε) — crafted against the accurate network and reused
//! across schemes and approximation levels, which is both the threat model
//! (the attacker targets the deployed accurate model) and a large saving.
//!
//! Runs are deterministic for a fixed seed: every derived seed is keyed by
//! content (grid coordinates, sample index), never by scheduling order, and
//! all parallel collections preserve index order. Reports are therefore
//! byte-identical across worker counts.

mod prepare;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::aqf::AqfParams;
use crate::attacks::AttackKind;
use crate::codec::{synth_gesture, synth_images, Event, EventStream, Image};
use crate::error::{Error, Result};
use crate::precision::SchemeKind;
use crate::rng::{keyed_u64, Fingerprint};
use crate::train::TrainConfig;

pub use prepare::PreparedEvaluator;
pub use report::{BestEntry, ReportRow, RobustnessReport, SkippedConfig};

/// Robustness metric in percent: the share of evaluated samples the attack
/// failed to flip, out of `n` evaluated.
///
/// Kept as an exact rational-valued f64; rounding to two decimals happens
/// only when a report is serialized.
pub fn robustness(adv_count: usize, n: usize) -> f64 {
    assert!(n > 0, "robustness needs at least one sample");
    assert!(adv_count <= n, "adversarial count cannot exceed sample count");
    (1.0 - adv_count as f64 / n as f64) * 100.0
}

/// Full grid-sweep configuration.
///
/// The first block mirrors the sweep inputs (grids, quality level Q,
/// neuromorphic flag, filter parameters, seed); the rest are execution knobs
/// (architecture, training hyperparameters, parallelism, caching).
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub v_th_grid: Vec<f64>,
    pub t_grid: Vec<usize>,
    pub schemes: Vec<SchemeKind>,
    pub approx_levels: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub attacks: Vec<AttackKind>,
    /// Quality level Q in percent. Gates both the trained accurate network
    /// (configs below Q are skipped) and the returned best configs (R ≥ Q).
    pub quality: f64,
    /// Event-stream mode: inputs are event streams, attacks are stream
    /// attacks, and the correlation filter runs on attacked streams before
    /// inference.
    pub neuromorphic: bool,
    pub aqf: AqfParams,
    pub seed: u64,

    /// Membrane leak factor shared by all grid points.
    pub beta: f64,
    /// Hidden layer widths; input and class counts come from the data.
    pub hidden: Vec<usize>,
    /// Training hyperparameters. The `seed` and `quality` fields are
    /// overridden per grid point from the sweep-level values.
    pub train: TrainConfig,
    pub attack_iters: usize,
    pub attack_k: usize,
    /// Worker threads for the parallel stages; 0 uses the library default.
    pub workers: usize,
    /// Directory for trained-network checkpoints, keyed by configuration
    /// and data fingerprints; None disables on-disk caching.
    pub cache_dir: Option<PathBuf>,
    /// When false, a missing cache entry is an error instead of a retrain.
    pub train_enabled: bool,
}

fn range_f64(start: f64, end: f64, step: f64) -> Vec<f64> {
    // Integer stepping avoids drift from repeated addition.
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

impl SweepConfig {
    /// Desk-scale defaults: the standard threshold grid with shortened time
    /// steps (8..24 by 4) and a small dense architecture.
    pub fn desk() -> Self {
        SweepConfig {
            v_th_grid: range_f64(0.25, 2.25, 0.25),
            t_grid: vec![8, 12, 16, 20, 24],
            schemes: SchemeKind::ALL.to_vec(),
            approx_levels: vec![0.0, 0.001, 0.01, 0.1, 1.0],
            epsilons: vec![0.0, 0.5, 1.0],
            attacks: vec![AttackKind::Pgd, AttackKind::Bim],
            quality: 90.0,
            neuromorphic: false,
            aqf: AqfParams::default(),
            seed: 1,
            beta: 0.95,
            hidden: vec![16],
            // Slope 0.4 keeps the boxcar support wide enough that v_pre = 0
            // still receives gradient at every threshold in the grid; the
            // unit-slope default would leave silent layers permanently stuck.
            train: TrainConfig {
                epochs: 16,
                batch_size: 16,
                learning_rate: 0.08,
                surrogate_slope: 0.4,
                ..TrainConfig::default()
            },
            attack_iters: 10,
            attack_k: 10,
            workers: 0,
            cache_dir: None,
            train_enabled: true,
        }
    }

    /// Full-scale grids: time steps 32..80 by 8, default training length.
    pub fn full_scale() -> Self {
        SweepConfig {
            t_grid: vec![32, 40, 48, 56, 64, 72, 80],
            train: TrainConfig {
                surrogate_slope: 0.4,
                ..TrainConfig::default()
            },
            ..SweepConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn nonempty<T>(name: &'static str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                Err(Error::InvalidParam {
                    name,
                    reason: "grid must be nonempty".into(),
                })
            } else {
                Ok(())
            }
        }
        nonempty("v_th_grid", &self.v_th_grid)?;
        nonempty("t_grid", &self.t_grid)?;
        nonempty("schemes", &self.schemes)?;
        nonempty("approx_levels", &self.approx_levels)?;
        nonempty("epsilons", &self.epsilons)?;
        nonempty("attacks", &self.attacks)?;
        nonempty("hidden", &self.hidden)?;
        for &v in &self.v_th_grid {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam {
                    name: "v_th_grid",
                    reason: format!("thresholds must be positive, got {v}"),
                });
            }
        }
        for &t in &self.t_grid {
            if t == 0 {
                return Err(Error::InvalidParam {
                    name: "t_grid",
                    reason: "time steps must be at least 1".into(),
                });
            }
        }
        for &a in &self.approx_levels {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParam {
                    name: "approx_levels",
                    reason: format!("levels must be non-negative, got {a}"),
                });
            }
        }
        for &e in &self.epsilons {
            if !(e.is_finite() && (0.0..=1.5).contains(&e)) {
                return Err(Error::InvalidParam {
                    name: "epsilons",
                    reason: format!("budgets must lie in [0, 1.5], got {e}"),
                });
            }
        }
        if !(0.0..=100.0).contains(&self.quality) {
            return Err(Error::InvalidParam {
                name: "quality",
                reason: format!("Q must lie in [0, 100], got {}", self.quality),
            });
        }
        if !(self.beta.is_finite() && self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParam {
                name: "beta",
                reason: format!("leak factor must lie in (0, 1], got {}", self.beta),
            });
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParam {
                name: "hidden",
                reason: "hidden layer widths must be positive".into(),
            });
        }
        for kind in &self.attacks {
            if kind.is_neuromorphic() != self.neuromorphic {
                return Err(Error::Config(format!(
                    "attack {kind} does not match the data mode \
                     (neuromorphic = {})",
                    self.neuromorphic
                )));
            }
        }
        self.aqf.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Canonical form: grids sorted ascending and deduplicated, schemes by
    /// bit width, attacks by label. Grid enumeration order — and therefore
    /// report row order — is defined on this form.
    pub fn normalized(&self) -> Self {
        let mut cfg = self.clone();
        cfg.v_th_grid.sort_by(f64::total_cmp);
        cfg.v_th_grid.dedup();
        cfg.t_grid.sort_unstable();
        cfg.t_grid.dedup();
        cfg.schemes.sort_by_key(|s| s.bit_width());
        cfg.schemes.dedup();
        cfg.approx_levels.sort_by(f64::total_cmp);
        cfg.approx_levels.dedup();
        cfg.epsilons.sort_by(f64::total_cmp);
        cfg.epsilons.dedup();
        cfg.attacks.sort_by_key(|a| a.label());
        cfg.attacks.dedup();
        cfg
    }

    /// Apply one `key = value` override. Lists are comma-separated.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "v_th_grid" => self.v_th_grid = parse_f64_list(key, value)?,
            "t_grid" => self.t_grid = parse_usize_list(key, value)?,
            "schemes" => {
                self.schemes = parse_list(value)
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?
            }
            "approx_levels" => self.approx_levels = parse_f64_list(key, value)?,
            "epsilons" => self.epsilons = parse_f64_list(key, value)?,
            "attacks" => {
                self.attacks = parse_list(value)
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?
            }
            "quality" => self.quality = parse_f64(key, value)?,
            "neuromorphic" => self.neuromorphic = parse_bool(key, value)?,
            "aqf_q_t" => self.aqf.q_t = parse_f64(key, value)?,
            "aqf_s" => self.aqf.s = parse_usize(key, value)?,
            "aqf_t1" => self.aqf.t1 = parse_usize(key, value)? as u32,
            "aqf_t2" => self.aqf.t2 = parse_f64(key, value)?,
            "seed" => self.seed = parse_u64(key, value)?,
            "beta" => self.beta = parse_f64(key, value)?,
            "hidden" => self.hidden = parse_usize_list(key, value)?,
            "epochs" => self.train.epochs = parse_usize(key, value)?,
            "batch_size" => self.train.batch_size = parse_usize(key, value)?,
            "learning_rate" => self.train.learning_rate = parse_f64(key, value)?,
            "surrogate_slope" => self.train.surrogate_slope = parse_f64(key, value)?,
            "attack_iters" => self.attack_iters = parse_usize(key, value)?,
            "attack_k" => self.attack_k = parse_usize(key, value)?,
            "workers" => self.workers = parse_usize(key, value)?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "train_enabled" => self.train_enabled = parse_bool(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` configuration text ('#' starts a comment)
    /// on top of this configuration.
    pub fn with_key_values(mut self, text: &str) -> Result<Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            self.apply_key_value(key.trim(), value.trim())?;
        }
        Ok(self)
    }
}

fn parse_list(value: &str) -> Vec<&str> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': '{value}' is not a number")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    parse_list(value).iter().map(|s| parse_f64(key, s)).collect()
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': '{value}' is not a count")))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    parse_list(value)
        .iter()
        .map(|s| parse_usize(key, s))
        .collect()
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': '{value}' is not an integer seed")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "key '{key}': '{value}' is not a boolean"
        ))),
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub v_th: f64,
    pub time_steps: usize,
    pub scheme: SchemeKind,
    pub a_lvl: f64,
    pub attack: AttackKind,
    pub epsilon: f64,
}

/// All grid cells of a normalized configuration, in canonical order.
pub fn grid_points(cfg: &SweepConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &v_th in &cfg.v_th_grid {
        for &time_steps in &cfg.t_grid {
            for &scheme in &cfg.schemes {
                for &a_lvl in &cfg.approx_levels {
                    for &attack in &cfg.attacks {
                        for &epsilon in &cfg.epsilons {
                            out.push(GridPoint {
                                v_th,
                                time_steps,
                                scheme,
                                a_lvl,
                                attack,
                                epsilon,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Measured outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub clean_accuracy: f64,
    pub attacked_accuracy: f64,
    pub adv_count: usize,
    pub samples: usize,
    pub layer_ath: Vec<f64>,
    pub pruned_fraction: Vec<f64>,
}

/// Anything that can score a grid cell. The production implementation is
/// [`PreparedEvaluator`]; tests inject accuracy tables to exercise the sweep
/// selection logic in isolation.
pub trait ConfigEvaluator: Sync {
    /// Score one cell; Ok(None) means the cell was quality-gated away.
    fn evaluate(&self, point: &GridPoint) -> Result<Option<EvalOutcome>>;

    /// Quality-gate skips to attach to the report.
    fn skipped(&self) -> Vec<SkippedConfig> {
        Vec::new()
    }
}

/// The labeled dataset a sweep runs over: static images or event streams.
#[derive(Debug, Clone)]
pub enum DeskData {
    Images {
        train: Vec<(Image, usize)>,
        test: Vec<(Image, usize)>,
    },
    Streams {
        train: Vec<(EventStream, usize)>,
        test: Vec<(EventStream, usize)>,
    },
}

impl DeskData {
    /// Synthetic class-separable image task, split into train and test.
    pub fn synthetic_images(
        n_train: usize,
        n_test: usize,
        height: usize,
        width: usize,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(DeskData::Images {
            train: synth_images(n_train, height, width, classes, keyed_u64(seed, 0x7472, 0))?,
            test: synth_images(n_test, height, width, classes, keyed_u64(seed, 0x7465, 1))?,
        })
    }

    /// Synthetic gesture streams (2 or 3 classes — one per motion pattern).
    pub fn synthetic_streams(
        n_train: usize,
        n_test: usize,
        classes: usize,
        n_events: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(2..=3).contains(&classes) {
            return Err(Error::InvalidParam {
                name: "classes",
                reason: "gesture streams support 2 or 3 distinguishable classes".into(),
            });
        }
        let make = |n: usize, tag: u64| -> Vec<(EventStream, usize)> {
            (0..n)
                .map(|i| {
                    let class = i % classes;
                    (
                        synth_gesture(class, n_events, keyed_u64(seed, tag, i as u64)),
                        class,
                    )
                })
                .collect()
        };
        Ok(DeskData::Streams {
            train: make(n_train, 0x7472),
            test: make(n_test, 0x7465),
        })
    }

    pub fn is_neuromorphic(&self) -> bool {
        matches!(self, DeskData::Streams { .. })
    }

    pub fn train_len(&self) -> usize {
        match self {
            DeskData::Images { train, .. } => train.len(),
            DeskData::Streams { train, .. } => train.len(),
        }
    }

    pub fn test_len(&self) -> usize {
        match self {
            DeskData::Images { test, .. } => test.len(),
            DeskData::Streams { test, .. } => test.len(),
        }
    }

    /// Number of classes, from the highest label present.
    pub fn classes(&self) -> usize {
        let max = match self {
            DeskData::Images { train, test } => train
                .iter()
                .map(|s| s.1)
                .chain(test.iter().map(|s| s.1))
                .max(),
            DeskData::Streams { train, test } => train
                .iter()
                .map(|s| s.1)
                .chain(test.iter().map(|s| s.1))
                .max(),
        };
        max.map_or(0, |m| m + 1)
    }

    /// Network input width: pixel count for images, twice the sensor area
    /// (one cell per polarity) for streams.
    pub fn input_width(&self) -> Result<usize> {
        match self {
            DeskData::Images { train, test } => train
                .first()
                .or_else(|| test.first())
                .map(|(img, _)| img.len())
                .ok_or(Error::MissingCalibration),
            DeskData::Streams { train, test } => train
                .first()
                .or_else(|| test.first())
                .map(|(s, _)| 2 * s.height() as usize * s.width() as usize)
                .ok_or(Error::MissingCalibration),
        }
    }

    /// Shared rasterization window for stream data: [0, max timestamp + 1).
    pub fn raster_window(&self) -> Option<(f64, f64)> {
        match self {
            DeskData::Images { .. } => None,
            DeskData::Streams { train, test } => {
                let max_t = train
                    .iter()
                    .chain(test.iter())
                    .filter_map(|(s, _)| s.last_timestamp())
                    .fold(0.0f64, f64::max);
                Some((0.0, max_t + 1.0))
            }
        }
    }

    /// Content hash used in checkpoint cache keys.
    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        match self {
            DeskData::Images { train, test } => {
                for (tag, split) in [(0u64, train), (1, test)] {
                    fp.push_u64(tag);
                    fp.push_u64(split.len() as u64);
                    for (img, label) in split {
                        fp.push_u64(img.height() as u64);
                        fp.push_u64(img.width() as u64);
                        for &p in img.pixels() {
                            fp.push_f64(p);
                        }
                        fp.push_u64(*label as u64);
                    }
                }
            }
            DeskData::Streams { train, test } => {
                for (tag, split) in [(2u64, train), (3, test)] {
                    fp.push_u64(tag);
                    fp.push_u64(split.len() as u64);
                    for (stream, label) in split {
                        fp.push_u64(stream.height() as u64);
                        fp.push_u64(stream.width() as u64);
                        for &Event { x, y, polarity, t } in stream.events() {
                            fp.push_u64((x as u64) << 32 | (y as u64) << 8 | polarity as u64);
                            fp.push_f64(t);
                        }
                        fp.push_u64(*label as u64);
                    }
                }
            }
        }
        fp.finish()
    }
}

fn with_pool<T: Send>(workers: usize, run: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("could not build worker pool: {e}")))?
            .install(run)
    }
}

fn sweep_grid(cfg: &SweepConfig, evaluator: &dyn ConfigEvaluator) -> Result<RobustnessReport> {
    let points = grid_points(cfg);
    let evaluated: Vec<Option<ReportRow>> = points
        .par_iter()
        .map(|p| {
            evaluator
                .evaluate(p)
                .map(|outcome| outcome.map(|o| ReportRow::new(p, o)))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ReportRow> = evaluated.into_iter().flatten().collect();
    report::sort_rows(&mut rows);
    let mut skipped = evaluator.skipped();
    skipped.sort_by(|a, b| {
        a.v_th
            .total_cmp(&b.v_th)
            .then(a.time_steps.cmp(&b.time_steps))
    });
    let best = report::select_best(&cfg.attacks, cfg.quality, &rows);
    Ok(RobustnessReport {
        quality: cfg.quality,
        seed: cfg.seed,
        rows,
        skipped,
        best,
        runtime_seconds: 0.0,
    })
}

/// Run the sweep selection logic over an injected evaluator.
///
/// This is the testing seam for the grid logic: the evaluator decides what
/// each cell scores, the sweep handles enumeration, skips, row ordering,
/// and best-config selection.
pub fn sweep_with(cfg: &SweepConfig, evaluator: &dyn ConfigEvaluator) -> Result<RobustnessReport> {
    let cfg = cfg.normalized();
    cfg.validate()?;
    let start = Instant::now();
    let mut rep = with_pool(cfg.workers, || sweep_grid(&cfg, evaluator))?;
    rep.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Run the full pipeline sweep over a dataset: train (or load) accurate
/// networks per (v_th, T), quality-gate them, craft adversarial sets, build
/// approximate networks, and score every grid cell.
pub fn sweep(cfg: &SweepConfig, data: &DeskData) -> Result<RobustnessReport> {
    let cfg = cfg.normalized();
    cfg.validate()?;
    if cfg.neuromorphic != data.is_neuromorphic() {
        return Err(Error::Config(format!(
            "configuration is {} but the data is {}",
            if cfg.neuromorphic {
                "neuromorphic"
            } else {
                "image-based"
            },
            if data.is_neuromorphic() {
                "event streams"
            } else {
                "images"
            },
        )));
    }
    let start = Instant::now();
    let mut rep = with_pool(cfg.workers, || {
        let prepared = PreparedEvaluator::prepare(&cfg, data)?;
        sweep_grid(&cfg, &prepared)
    })?;
    rep.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Score a single configuration through the full pipeline.
///
/// Equivalent to the matching row of [`sweep`] — all derived seeds are keyed
/// by grid coordinates, not enumeration order. Returns None when the
/// accurate network at (v_th, T) fails the quality gate.
pub fn evaluate_config(
    cfg: &SweepConfig,
    data: &DeskData,
    point: &GridPoint,
) -> Result<Option<ReportRow>> {
    let mut narrowed = cfg.clone();
    narrowed.v_th_grid = vec![point.v_th];
    narrowed.t_grid = vec![point.time_steps];
    narrowed.schemes = vec![point.scheme];
    narrowed.approx_levels = vec![point.a_lvl];
    narrowed.attacks = vec![point.attack];
    narrowed.epsilons = vec![point.epsilon];
    let narrowed = narrowed.normalized();
    narrowed.validate()?;
    with_pool(narrowed.workers, || {
        let prepared = PreparedEvaluator::prepare(&narrowed, data)?;
        match prepared.evaluate(point)? {
            Some(outcome) => Ok(Some(ReportRow::new(point, outcome))),
            None => Ok(None),
        }
    })
}
