//! Shared helpers for the integration suites.
//!
//! `aqf_oracle` is a deliberately naive, straight-line transcription of the
//! correlation filter used as an equivalence oracle. It shares no code with
//! the library implementation: hash-map grids instead of flat vectors, plain
//! signed arithmetic for the window clipping, and no incremental state
//! reuse. Any divergence between the two is a bug in one of them.

use std::collections::HashMap;

use axsnn_core::{AqfParams, Event, EventStream};
use rand::Rng;

/// Reference semantics of the correlation filter.
///
/// Per event, in order: quantize the timestamp, stamp it into every in-bounds
/// neighbor cell of the (2s+1)^2 window around the event (center excluded)
/// while counting that cell's activity, flag any cell whose activity exceeds
/// T1, then keep the event unless its own cell is flagged or its quantized
/// timestamp is more than T2 newer than the cell's stamp.
pub fn aqf_oracle(stream: &EventStream, params: &AqfParams) -> EventStream {
    let mut stamps: HashMap<(i64, i64), f64> = HashMap::new();
    let mut activity: HashMap<(i64, i64), u64> = HashMap::new();
    let mut kept: Vec<Event> = Vec::new();

    for e in stream.events() {
        let t_q = if params.q_t > 0.0 {
            (e.t / params.q_t).round() * params.q_t
        } else {
            e.t
        };

        let radius = params.s as i64;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let ny = e.y as i64 + dy;
                let nx = e.x as i64 + dx;
                let in_bounds = ny >= 0
                    && nx >= 0
                    && ny < stream.height() as i64
                    && nx < stream.width() as i64;
                if !in_bounds {
                    continue;
                }
                stamps.insert((ny, nx), t_q);
                let count = activity.entry((ny, nx)).or_insert(0);
                *count += 1;
                if *count > params.t1 as u64 {
                    stamps.insert((ny, nx), 1.0);
                }
            }
        }

        let own = stamps
            .get(&(e.y as i64, e.x as i64))
            .copied()
            .unwrap_or(0.0);
        let remove = own == 1.0 || t_q - own > params.t2;
        if !remove {
            kept.push(Event { t: t_q, ..*e });
        }
    }

    EventStream::new(stream.height(), stream.width(), kept)
        .expect("quantization is monotone, so kept events stay sorted")
}

/// Random sorted stream with up to `max_events` events on an HxW sensor and
/// timestamps drawn uniformly from [0, max_t).
pub fn random_stream(
    rng: &mut impl Rng,
    height: u16,
    width: u16,
    max_events: usize,
    max_t: f64,
) -> EventStream {
    let n = rng.gen_range(0..=max_events);
    let mut ts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..max_t)).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    let events: Vec<Event> = ts
        .into_iter()
        .map(|t| Event {
            x: rng.gen_range(0..width),
            y: rng.gen_range(0..height),
            polarity: rng.gen_range(0..=1),
            t,
        })
        .collect();
    EventStream::new(height, width, events).expect("construction is in bounds and sorted")
}

/// Exact multiset key for an event; timestamps compare by bit pattern.
pub type EventKey = (u16, u16, u8, u64);

/// Multiset of a stream's events.
pub fn multiset(stream: &EventStream) -> HashMap<EventKey, usize> {
    let mut counts: HashMap<EventKey, usize> = HashMap::new();
    for e in stream.events() {
        *counts
            .entry((e.x, e.y, e.polarity, e.t.to_bits()))
            .or_insert(0) += 1;
    }
    counts
}

/// Multiset difference a - b, clamped at zero per key.
pub fn multiset_sub(
    a: &HashMap<EventKey, usize>,
    b: &HashMap<EventKey, usize>,
) -> HashMap<EventKey, usize> {
    let mut out = HashMap::new();
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        if ca > cb {
            out.insert(*k, ca - cb);
        }
    }
    out
}

/// Size of the multiset intersection: how many events of `a` survive in `b`.
pub fn overlap(a: &HashMap<EventKey, usize>, b: &HashMap<EventKey, usize>) -> usize {
    a.iter()
        .map(|(k, &ca)| ca.min(b.get(k).copied().unwrap_or(0)))
        .sum()
}

/// Total multiplicity of a multiset.
pub fn total(a: &HashMap<EventKey, usize>) -> usize {
    a.values().sum()
}
