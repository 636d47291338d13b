//! Adversarial example generation: l-infinity PGD and BIM on static images,
//! and the Sparse and Frame attacks on event streams. Per the threat model,
//! gradients always come from the accurate network.
//!
//! The l-infinity projection is exact in f64: per-pixel box bounds are
//! nudged down/up with directed rounding until the *measured* deviation
//! `|x - pixel|` is within budget, so the soundness assertion holds bitwise
//! on every output, not just up to rounding.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{rasterize, Event, EventStream, Image, RasterSpec};
use crate::error::{Error, Result};
use crate::rng::keyed_u64;
use crate::snn::Network;
use crate::train::{input_gradient, input_spike_gradient};

/// The four attack families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    #[serde(rename = "PGD")]
    Pgd,
    #[serde(rename = "BIM")]
    Bim,
    #[serde(rename = "SPARSE")]
    Sparse,
    #[serde(rename = "FRAME")]
    Frame,
}

impl AttackKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackKind::Pgd => "PGD",
            AttackKind::Bim => "BIM",
            AttackKind::Sparse => "SPARSE",
            AttackKind::Frame => "FRAME",
        }
    }

    /// Whether this attack perturbs event streams rather than images.
    pub fn is_neuromorphic(&self) -> bool {
        matches!(self, AttackKind::Sparse | AttackKind::Frame)
    }

    pub const ALL: [AttackKind; 4] = [
        AttackKind::Pgd,
        AttackKind::Bim,
        AttackKind::Sparse,
        AttackKind::Frame,
    ];
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PGD" => Ok(AttackKind::Pgd),
            "BIM" => Ok(AttackKind::Bim),
            "SPARSE" => Ok(AttackKind::Sparse),
            "FRAME" => Ok(AttackKind::Frame),
            other => Err(Error::Config(format!(
                "unknown attack kind '{other}' (expected PGD, BIM, SPARSE or FRAME)"
            ))),
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Attack parameters. Defaults follow common practice: step size a quarter
/// of the budget and ten iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// l-infinity budget in pixel units, in [0, 1.5].
    pub epsilon: f64,
    /// Gradient-sign step size; > 0.
    pub alpha: f64,
    /// Iteration count. Gradient-sign attacks need at least one iteration;
    /// zero is allowed for Sparse and Frame, where it means "no attack".
    pub n_iter: usize,
    /// Cells toggled per Sparse iteration.
    pub k: usize,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(kind: AttackKind, epsilon: f64) -> Self {
        let alpha = if epsilon > 0.0 { epsilon / 4.0 } else { 0.01 };
        AttackConfig {
            kind,
            epsilon,
            alpha,
            n_iter: 10,
            k: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && (0.0..=1.5).contains(&self.epsilon)) {
            return Err(Error::InvalidParam {
                name: "epsilon",
                reason: format!("budget must lie in [0, 1.5], got {}", self.epsilon),
            });
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParam {
                name: "alpha",
                reason: format!("step size must be positive, got {}", self.alpha),
            });
        }
        match self.kind {
            AttackKind::Pgd | AttackKind::Bim => {
                if self.n_iter == 0 {
                    return Err(Error::InvalidParam {
                        name: "n_iter",
                        reason: "gradient-sign attacks need at least one iteration".into(),
                    });
                }
            }
            AttackKind::Sparse => {
                if self.k == 0 {
                    return Err(Error::InvalidParam {
                        name: "k",
                        reason: "sparse attack needs a per-iteration budget of at least 1".into(),
                    });
                }
            }
            AttackKind::Frame => {}
        }
        Ok(())
    }
}

#[inline]
fn grad_sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-pixel box [lo, hi] = ball(pixel, eps) intersected with [0, 1], with
/// bounds adjusted by directed rounding until membership is exact in f64.
#[inline]
fn linf_bounds(pixel: f64, eps: f64) -> (f64, f64) {
    let mut hi = pixel + eps;
    while hi - pixel > eps {
        hi = hi.next_down();
    }
    let mut lo = pixel - eps;
    while pixel - lo > eps {
        lo = lo.next_up();
    }
    (lo.max(0.0), hi.min(1.0))
}

fn iterated_gradient_sign(
    net: &Network,
    img: &Image,
    label: usize,
    cfg: &AttackConfig,
    random_start: bool,
) -> Result<Image> {
    cfg.validate()?;
    let bounds: Vec<(f64, f64)> = img
        .pixels()
        .iter()
        .map(|&p| linf_bounds(p, cfg.epsilon))
        .collect();
    let mut x: Vec<f64> = img.pixels().to_vec();

    if random_start && cfg.epsilon > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(keyed_u64(cfg.seed, 0xA0, 0));
        for (v, &(lo, hi)) in x.iter_mut().zip(&bounds) {
            *v = (*v + rng.gen_range(-cfg.epsilon..=cfg.epsilon)).clamp(lo, hi);
        }
    }

    for iter in 0..cfg.n_iter {
        let current = Image::new(img.height(), img.width(), x.clone())?;
        let grad = input_gradient(net, &current, label, keyed_u64(cfg.seed, 0xB0, iter as u64))?;
        for (i, v) in x.iter_mut().enumerate() {
            let (lo, hi) = bounds[i];
            *v = (*v + cfg.alpha * grad_sign(grad.data()[i])).clamp(lo, hi);
        }
    }
    Image::new(img.height(), img.width(), x)
}

/// Projected gradient descent: random start inside the budget ball, then
/// iterated gradient-sign steps, each projected back onto the ball and the
/// valid pixel range.
pub fn pgd(net: &Network, img: &Image, label: usize, cfg: &AttackConfig) -> Result<Image> {
    iterated_gradient_sign(net, img, label, cfg, true)
}

/// Basic iterative method: PGD without the random start.
pub fn bim(net: &Network, img: &Image, label: usize, cfg: &AttackConfig) -> Result<Image> {
    iterated_gradient_sign(net, img, label, cfg, false)
}

/// Boundary pixels of an (height, width) sensor in a fixed canonical order:
/// top row, bottom row, then the remaining left and right columns.
fn boundary_pixels(height: u16, width: u16) -> Vec<(u16, u16)> {
    let mut out = Vec::new();
    for x in 0..width {
        out.push((x, 0));
    }
    if height > 1 {
        for x in 0..width {
            out.push((x, height - 1));
        }
    }
    for y in 1..height.saturating_sub(1) {
        out.push((0, y));
        if width > 1 {
            out.push((width - 1, y));
        }
    }
    out
}

/// Frame attack: inject one event of each polarity at every boundary pixel
/// of the sensor, once per time bin (timestamped at the bin center). The
/// original events all survive unchanged.
pub fn frame_attack(stream: &EventStream, spec: &RasterSpec) -> Result<EventStream> {
    spec.validate()?;
    let boundary = boundary_pixels(stream.height(), stream.width());
    let mut events: Vec<Event> = stream.events().to_vec();
    events.reserve(spec.bins * boundary.len() * 2);
    for bin in 0..spec.bins {
        let t = spec.bin_center(bin);
        for &(x, y) in &boundary {
            for polarity in 0..2u8 {
                events.push(Event { x, y, polarity, t });
            }
        }
    }
    // Stable sort: originals keep their order among themselves and precede
    // same-timestamp injections, and injections keep enumeration order.
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    EventStream::new(stream.height(), stream.width(), events)
}

/// Sparse attack: iteratively rasterize, follow the loss gradient, and
/// toggle the most influential raster cells — injecting an event at an
/// empty cell whose gradient is positive, or deleting the events behind an
/// occupied cell whose gradient is negative. Stops early on misclassification
/// or when the gradient carries no usable signal.
pub fn sparse_attack(
    net: &Network,
    stream: &EventStream,
    label: usize,
    cfg: &AttackConfig,
    spec: &RasterSpec,
) -> Result<EventStream> {
    cfg.validate()?;
    spec.validate()?;
    let (h, w) = (stream.height(), stream.width());
    let mut events: Vec<Event> = stream.events().to_vec();

    for iter in 0..cfg.n_iter {
        let current = EventStream::new(h, w, events.clone())?;
        let raster = rasterize(&current, spec)?;
        let stacked = raster.stacked();
        if net.forward(&stacked)?.predicted_class() != label {
            break;
        }
        let grad = input_spike_gradient(net, &stacked, label)?;

        // Rank candidate cells by gradient magnitude, ties by cell position.
        let mut ranked: Vec<(usize, usize)> = Vec::new();
        for t in 0..grad.rows() {
            for n in 0..grad.cols() {
                if grad.get(t, n) != 0.0 {
                    ranked.push((t, n));
                }
            }
        }
        if ranked.is_empty() {
            if iter == 0 {
                return Err(Error::GradientUnavailable(
                    "loss gradient is zero everywhere; is the network trained?".into(),
                ));
            }
            break;
        }
        ranked.sort_by(|&(ta, na), &(tb, nb)| {
            grad.get(tb, nb)
                .abs()
                .total_cmp(&grad.get(ta, na).abs())
                .then((ta, na).cmp(&(tb, nb)))
        });

        let mut applied = 0usize;
        for &(t, n) in &ranked {
            if applied == cfg.k {
                break;
            }
            let g = grad.get(t, n);
            let occupied = stacked.get(t, n) == 1;
            let (polarity, y, x) = raster.unstack_cell(n);
            if !occupied && g > 0.0 {
                events.push(Event {
                    x,
                    y,
                    polarity,
                    t: spec.bin_center(t),
                });
                applied += 1;
            } else if occupied && g < 0.0 {
                events.retain(|e| {
                    !(e.polarity == polarity && e.y == y && e.x == x && spec.bin_of(e.t) == t)
                });
                applied += 1;
            }
        }
        if applied == 0 {
            break;
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    EventStream::new(h, w, events)
}
