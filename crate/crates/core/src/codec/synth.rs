//! Synthetic desk-scale datasets.
//!
//! `synth_images` emits linearly separable band images for the static
//! pipeline. `synth_gesture` emits moving-object event recordings for the
//! neuromorphic pipeline: a point target sweeping right, sweeping left, or
//! orbiting, one event per ~1-pixel step. Consecutive events are therefore
//! spatiotemporal neighbours (Chebyshev distance 1, fixed 40-unit gap), which
//! is the correlation structure a background-activity filter expects from
//! real motion, while the path keeps an 8-pixel margin from the sensor border
//! so frame-style boundary injections never collide with genuine events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Event, EventStream, Image};
use crate::error::{Error, Result};
use crate::rng::keyed_u64;

/// Sensor edge length used by the synthetic gesture generator.
pub const SYNTH_SENSOR_DIM: u16 = 128;

/// Time units between consecutive synthetic events.
pub const SYNTH_TIME_GAP: f64 = 40.0;

/// Border margin (pixels) the synthetic paths never enter.
const PATH_MARGIN: f64 = 8.0;

/// Maximum timestamp jitter added on top of the fixed gap; strictly smaller
/// than the gap so timestamps stay strictly increasing.
const TIME_JITTER: f64 = 8.0;

/// Deterministic moving-target event stream for one gesture class.
///
/// Classes cycle through three motion patterns: 0 sweeps rightward,
/// 1 sweeps leftward, 2 orbits a circle. The first two have opposite mean
/// x-velocity, which is the signal a classifier learns.
pub fn synth_gesture(class_id: usize, n_events: usize, seed: u64) -> EventStream {
    let dim = SYNTH_SENSOR_DIM;
    let mut rng = ChaCha8Rng::seed_from_u64(keyed_u64(seed, class_id as u64, 0x6765_7374));
    let lo = PATH_MARGIN;
    let hi = (dim - 1) as f64 - PATH_MARGIN;

    let motion = class_id % 3;
    let mut x: f64;
    let mut y: f64;
    let mut dx: f64 = 0.0;
    // Circle state.
    let mut theta: f64 = 0.0;
    let mut radius: f64 = 0.0;
    let center = (dim as f64 - 1.0) / 2.0;

    match motion {
        0 => {
            x = lo;
            y = rng.gen_range(32.0..96.0);
            dx = 1.0;
        }
        1 => {
            x = hi;
            y = rng.gen_range(32.0..96.0);
            dx = -1.0;
        }
        _ => {
            radius = rng.gen_range(32.0..44.0);
            theta = rng.gen_range(0.0..std::f64::consts::TAU);
            x = center + radius * theta.cos();
            y = center + radius * theta.sin();
        }
    }

    let mut events = Vec::with_capacity(n_events);
    for i in 0..n_events {
        let t = (i as f64 + 1.0) * SYNTH_TIME_GAP + rng.gen_range(0.0..TIME_JITTER);
        let polarity = u8::from(rng.gen_bool(0.5));
        events.push(Event {
            x: x.round().clamp(0.0, (dim - 1) as f64) as u16,
            y: y.round().clamp(0.0, (dim - 1) as f64) as u16,
            polarity,
            t,
        });

        match motion {
            0 | 1 => {
                x += dx;
                // Ping-pong inside the margins so long recordings stay on
                // the sensor without teleporting (a jump would look like
                // uncorrelated noise to the filter).
                if x > hi {
                    x = hi - (x - hi);
                    dx = -dx;
                } else if x < lo {
                    x = lo + (lo - x);
                    dx = -dx;
                }
            }
            _ => {
                // ~1 pixel of arc per event.
                theta += 1.0 / radius;
                x = center + radius * theta.cos();
                y = center + radius * theta.sin();
            }
        }
    }

    EventStream::new(dim, dim, events).expect("synthetic path stays on the sensor and in order")
}

/// Linearly separable band images: class k lights up the k-th vertical band.
///
/// Labels cycle 0..classes so every class is equally represented.
pub fn synth_images(
    n: usize,
    height: usize,
    width: usize,
    classes: usize,
    seed: u64,
) -> Result<Vec<(Image, usize)>> {
    if classes < 2 {
        return Err(Error::InvalidParam {
            name: "classes",
            reason: "need at least two classes".into(),
        });
    }
    if width < classes {
        return Err(Error::InvalidParam {
            name: "width",
            reason: format!("width {width} cannot hold {classes} vertical bands"),
        });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let mut rng = ChaCha8Rng::seed_from_u64(keyed_u64(seed, i as u64, class as u64));
        let band_lo = class * width / classes;
        let band_hi = (class + 1) * width / classes;
        let mut pixels = Vec::with_capacity(height * width);
        for _y in 0..height {
            for xcol in 0..width {
                let bright = xcol >= band_lo && xcol < band_hi;
                let v: f64 = if bright {
                    0.70 + rng.gen_range(0.0..0.25)
                } else {
                    rng.gen_range(0.0..0.15)
                };
                pixels.push(v.clamp(0.0, 1.0));
            }
        }
        out.push((Image::new(height, width, pixels)?, class));
    }
    Ok(out)
}
