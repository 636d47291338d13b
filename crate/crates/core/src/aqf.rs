//! Approximate Quantized Filter: timestamp quantization followed by a
//! spatiotemporal correlation filter. An event survives only if some earlier
//! event touched its pixel's neighborhood recently enough — uncorrelated
//! (likely injected) events are dropped, and pixels whose activity counter
//! runs hot are suppressed outright.
//!
//! The filter is polarity-blind and strictly order-sensitive: state updates
//! happen per event, in stream order, before that event's own keep/remove
//! decision. An event never supports itself (the window excludes its own
//! pixel), so an isolated event is always removed once its timestamp exceeds
//! the temporal threshold.

use serde::{Deserialize, Serialize};

use crate::codec::{Event, EventStream};
use crate::error::{Error, Result};

/// Sentinel stored in the timestamp grid to mark a hot (suppressed) pixel.
///
/// The value collides with a legitimate quantized timestamp of exactly 1;
/// that ambiguity is inherent to the scheme (timestamps are microsecond-scale
/// in practice, where t = 1 is vanishingly rare) and is resolved in favor of
/// suppression: the flag check runs before the temporal check.
pub const HOT_PIXEL_FLAG: f64 = 1.0;

/// Filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AqfParams {
    /// Timestamp quantization step; 0 disables quantization.
    pub q_t: f64,
    /// Spatial radius of the correlation window, in pixels (Chebyshev).
    pub s: usize,
    /// Activity count above which a pixel is flagged hot.
    pub t1: u32,
    /// Maximum age of neighborhood support, in timestamp units.
    pub t2: f64,
}

impl Default for AqfParams {
    fn default() -> Self {
        AqfParams {
            q_t: 0.0,
            s: 2,
            t1: 5,
            t2: 50.0,
        }
    }
}

impl AqfParams {
    /// Stricter legacy profile with a 30-unit temporal threshold.
    pub fn early_draft() -> Self {
        AqfParams {
            t2: 30.0,
            ..AqfParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidParam {
                name: "s",
                reason: "spatial radius must be at least 1".into(),
            });
        }
        if !(self.t2.is_finite() && self.t2 > 0.0) {
            return Err(Error::InvalidParam {
                name: "t2",
                reason: format!("temporal threshold must be positive, got {}", self.t2),
            });
        }
        if !(self.q_t.is_finite() && self.q_t >= 0.0) {
            return Err(Error::InvalidParam {
                name: "q_t",
                reason: format!("quantization step must be non-negative, got {}", self.q_t),
            });
        }
        Ok(())
    }

    /// Quantized timestamp: nearest multiple of `q_t`, identity when 0.
    #[inline]
    pub fn quantize(&self, t: f64) -> f64 {
        if self.q_t > 0.0 {
            (t / self.q_t).round() * self.q_t
        } else {
            t
        }
    }
}

/// Per-pixel filter state: the last timestamp seen in each pixel's
/// neighborhood (or the hot flag), and a lifetime activity counter.
#[derive(Debug, Clone)]
pub struct FilterState {
    m: Vec<f64>,
    activity: Vec<u32>,
    height: usize,
    width: usize,
}

impl FilterState {
    pub fn new(height: u16, width: u16) -> Self {
        let cells = height as usize * width as usize;
        FilterState {
            m: vec![0.0; cells],
            activity: vec![0; cells],
            height: height as usize,
            width: width as usize,
        }
    }

    /// Timestamp/flag grid, row-major.
    pub fn timestamps(&self) -> &[f64] {
        &self.m
    }

    /// Activity counters, row-major.
    pub fn activity(&self) -> &[u32] {
        &self.activity
    }

    #[inline]
    fn value_at(&self, x: u16, y: u16) -> f64 {
        self.m[y as usize * self.width + x as usize]
    }

    /// Stamp the quantized timestamp onto every cell of the (2s+1)² window
    /// around (x, y) — excluding the center, clipped to the sensor — and
    /// bump each cell's activity counter, re-flagging hot cells.
    fn touch_neighbors(&mut self, x: u16, y: u16, s: usize, t1: u32, t_q: f64) {
        let r = s as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                    continue;
                }
                let cell = ny as usize * self.width + nx as usize;
                self.m[cell] = t_q;
                self.activity[cell] = self.activity[cell].saturating_add(1);
                if self.activity[cell] > t1 {
                    self.m[cell] = HOT_PIXEL_FLAG;
                }
            }
        }
    }
}

/// Run the filter, also returning a per-input-event keep mask.
///
/// Per event, in order: quantize its timestamp, stamp that timestamp onto
/// the neighborhood (activity counters included), then drop the event if its
/// own pixel is flagged hot or its last neighborhood support is older than
/// `t2`. Kept events keep their original order and carry quantized
/// timestamps.
pub fn aqf_filter_detailed(
    stream: &EventStream,
    params: &AqfParams,
) -> Result<(EventStream, Vec<bool>)> {
    params.validate()?;
    let mut state = FilterState::new(stream.height(), stream.width());
    let mut kept = vec![false; stream.len()];
    let mut out = Vec::new();
    for (idx, e) in stream.events().iter().enumerate() {
        let t_q = params.quantize(e.t);
        state.touch_neighbors(e.x, e.y, params.s, params.t1, t_q);
        let own = state.value_at(e.x, e.y);
        let remove = own == HOT_PIXEL_FLAG || t_q - own > params.t2;
        if !remove {
            kept[idx] = true;
            out.push(Event { t: t_q, ..*e });
        }
    }
    Ok((EventStream::new(stream.height(), stream.width(), out)?, kept))
}

/// Run the filter, returning only the surviving events.
pub fn aqf_filter(stream: &EventStream, params: &AqfParams) -> Result<EventStream> {
    Ok(aqf_filter_detailed(stream, params)?.0)
}
