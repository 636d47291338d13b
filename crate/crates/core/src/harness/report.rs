//! Report rows, best-config selection, and serialization.
//!
//! Accuracies and robustness are held exact internally; rounding to two
//! decimals happens only at serialization. The CSV deliberately excludes
//! the wall-clock runtime so that reports from repeat runs (any worker
//! count) are byte-identical; runtime lives in the JSON envelope only.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize, Serializer};

use crate::attacks::AttackKind;
use crate::error::Result;
use crate::precision::SchemeKind;

use super::{robustness, EvalOutcome, GridPoint};

fn round2<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 100.0).round() / 100.0)
}

/// One sweep result: a grid cell plus its measured accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub v_th: f64,
    pub time_steps: usize,
    pub scheme: SchemeKind,
    pub a_lvl: f64,
    /// Signed per-layer approximation thresholds (exact, unrounded).
    pub layer_ath: Vec<f64>,
    /// Fraction of weights pruned per layer.
    pub pruned_fraction: Vec<f64>,
    pub attack: AttackKind,
    pub epsilon: f64,
    /// Approximate network's accuracy on clean inputs, percent.
    #[serde(serialize_with = "round2")]
    pub clean_accuracy: f64,
    /// Approximate network's accuracy on attacked inputs, percent.
    #[serde(serialize_with = "round2")]
    pub attacked_accuracy: f64,
    /// Robustness R, percent.
    #[serde(serialize_with = "round2")]
    pub robustness: f64,
    /// Samples flipped by the attack that the clean accurate model got right.
    pub adv_count: usize,
    pub samples: usize,
}

impl ReportRow {
    pub(crate) fn new(point: &GridPoint, outcome: EvalOutcome) -> Self {
        ReportRow {
            v_th: point.v_th,
            time_steps: point.time_steps,
            scheme: point.scheme,
            a_lvl: point.a_lvl,
            layer_ath: outcome.layer_ath,
            pruned_fraction: outcome.pruned_fraction,
            attack: point.attack,
            epsilon: point.epsilon,
            clean_accuracy: outcome.clean_accuracy,
            attacked_accuracy: outcome.attacked_accuracy,
            robustness: robustness(outcome.adv_count, outcome.samples),
            adv_count: outcome.adv_count,
            samples: outcome.samples,
        }
    }
}

/// A (v_th, T) pair dropped because its accurate network missed the quality
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedConfig {
    pub v_th: f64,
    pub time_steps: usize,
    #[serde(serialize_with = "round2")]
    pub accuracy: f64,
    pub reason: String,
}

/// Best row for one attack, or None when nothing reached the quality level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub attack: AttackKind,
    /// None is the explicit "no config met Q" marker.
    pub row: Option<ReportRow>,
}

/// Complete sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub quality: f64,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub skipped: Vec<SkippedConfig>,
    pub best: Vec<BestEntry>,
    /// Wall-clock seconds; serialized in JSON only, never in CSV.
    pub runtime_seconds: f64,
}

/// Canonical row order: (v_th, T, scheme width, a_lvl, attack label, ε).
pub(crate) fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.v_th
            .total_cmp(&b.v_th)
            .then(a.time_steps.cmp(&b.time_steps))
            .then(a.scheme.bit_width().cmp(&b.scheme.bit_width()))
            .then(a.a_lvl.total_cmp(&b.a_lvl))
            .then(a.attack.label().cmp(b.attack.label()))
            .then(a.epsilon.total_cmp(&b.epsilon))
    });
}

/// Selection order for best configs: higher R first, then fewer time steps,
/// narrower precision, and finally lower v_th, a_lvl, ε for a total order.
fn selection_order(a: &ReportRow, b: &ReportRow) -> Ordering {
    b.robustness
        .total_cmp(&a.robustness)
        .then(a.time_steps.cmp(&b.time_steps))
        .then(a.scheme.bit_width().cmp(&b.scheme.bit_width()))
        .then(a.v_th.total_cmp(&b.v_th))
        .then(a.a_lvl.total_cmp(&b.a_lvl))
        .then(a.epsilon.total_cmp(&b.epsilon))
}

/// Per attack, the best row with R ≥ quality (None when no row qualifies).
pub(crate) fn select_best(
    attacks: &[AttackKind],
    quality: f64,
    rows: &[ReportRow],
) -> Vec<BestEntry> {
    attacks
        .iter()
        .map(|&attack| {
            let row = rows
                .iter()
                .filter(|r| r.attack == attack && r.robustness >= quality)
                .min_by(|a, b| selection_order(a, b))
                .cloned();
            BestEntry { attack, row }
        })
        .collect()
}

fn join_f64(values: &[f64], decimals: usize) -> String {
    values
        .iter()
        .map(|v| format!("{v:.decimals$}"))
        .collect::<Vec<_>>()
        .join(";")
}

impl RobustnessReport {
    /// The best row for one attack, if any met the quality level.
    pub fn best_for(&self, attack: AttackKind) -> Option<&ReportRow> {
        self.best
            .iter()
            .find(|e| e.attack == attack)
            .and_then(|e| e.row.as_ref())
    }

    /// Whether any attack has a best config meeting the quality level.
    pub fn met_quality(&self) -> bool {
        self.best.iter().any(|e| e.row.is_some())
    }

    /// One CSV line per row. Deterministic: canonical row order, fixed float
    /// formatting, no timing data.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "v_th,time_steps,scheme,a_lvl,attack,epsilon,clean_accuracy,\
             attacked_accuracy,robustness,adv_count,samples,layer_ath,pruned_fraction\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.2},{:.2},{:.2},{},{},{},{}\n",
                r.v_th,
                r.time_steps,
                r.scheme.label(),
                r.a_lvl,
                r.attack.label(),
                r.epsilon,
                r.clean_accuracy,
                r.attacked_accuracy,
                r.robustness,
                r.adv_count,
                r.samples,
                join_f64(&r.layer_ath, 6),
                join_f64(&r.pruned_fraction, 4),
            ));
        }
        out
    }

    /// (ε, attacked accuracy) series per configuration, for external
    /// plotting.
    pub fn plotdata_csv(&self) -> String {
        let mut out =
            String::from("attack,v_th,time_steps,scheme,a_lvl,epsilon,attacked_accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.2}\n",
                r.attack.label(),
                r.v_th,
                r.time_steps,
                r.scheme.label(),
                r.a_lvl,
                r.epsilon,
                r.attacked_accuracy,
            ));
        }
        out
    }

    /// Nested JSON with per-layer thresholds, skips, best configs, and
    /// runtime.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
