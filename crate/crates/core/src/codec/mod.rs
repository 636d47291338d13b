//! Input encodings and dataset I/O: rate coding of static images, the
//! DVS-style event-stream model, binary loaders, and synthetic generators.

mod axev;
mod idx;
mod synth;

pub use axev::{load_events, save_events};
pub use idx::{load_idx, load_idx_images, load_idx_labels, save_idx_images, save_idx_labels};
pub use synth::{synth_gesture, synth_images, SYNTH_SENSOR_DIM, SYNTH_TIME_GAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_unit;

/// Grayscale image with pixel intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Dimension {
                context: "Image::new",
                expected: format!("{height}x{width} = {} pixels", height * width),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        for &p in &pixels {
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    context: "Image::new",
                    value: p,
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam {
                    name: "pixels",
                    reason: format!("intensity {p} outside [0, 1]"),
                });
            }
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Binary spike trains, shape (time steps, neurons); entries are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTensor {
    steps: usize,
    width: usize,
    data: Vec<u8>,
}

impl SpikeTensor {
    pub fn zeros(steps: usize, width: usize) -> Self {
        SpikeTensor {
            steps,
            width,
            data: vec![0; steps * width],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, t: usize, n: usize) -> u8 {
        debug_assert!(t < self.steps && n < self.width);
        self.data[t * self.width + n]
    }

    #[inline]
    pub fn set(&mut self, t: usize, n: usize, v: u8) {
        debug_assert!(v <= 1, "spike values are binary");
        self.data[t * self.width + n] = v;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[u8] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|&b| b as u64).sum()
    }

    /// Number of cells at which the two tensors differ (Hamming distance).
    pub fn hamming(&self, other: &SpikeTensor) -> usize {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// One DVS-style event: sensor coordinates, polarity, timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub polarity: u8,
    pub t: f64,
}

/// An ordered event recording on a fixed sensor grid.
///
/// Events are sorted by timestamp; ties keep their construction order, which
/// matters because the correlation filter is order-sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    height: u16,
    width: u16,
    events: Vec<Event>,
}

/// Default DVS sensor edge length.
pub const DEFAULT_SENSOR_DIM: u16 = 128;

impl EventStream {
    pub fn new(height: u16, width: u16, events: Vec<Event>) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(Error::EventOutOfBounds {
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.polarity > 1 {
                return Err(Error::InvalidParam {
                    name: "polarity",
                    reason: format!("event {index} has polarity {}", e.polarity),
                });
            }
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(Error::InvalidParam {
                    name: "timestamp",
                    reason: format!("event {index} has t={}", e.t),
                });
            }
            if e.t < prev {
                return Err(Error::EventsUnsorted {
                    index,
                    t: e.t,
                    prev,
                });
            }
            prev = e.t;
        }
        Ok(EventStream {
            height,
            width,
            events,
        })
    }

    pub fn empty(height: u16, width: u16) -> Self {
        EventStream {
            height,
            width,
            events: Vec::new(),
        }
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.events.last().map(|e| e.t)
    }
}

/// How an event stream is binned into spike tensors: `bins` time bins over
/// the half-open window [t0, t1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub bins: usize,
    pub window: (f64, f64),
}

impl RasterSpec {
    pub fn new(bins: usize, window: (f64, f64)) -> Result<Self> {
        let spec = RasterSpec { bins, window };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidParam {
                name: "bins",
                reason: "at least one time bin required".into(),
            });
        }
        let (t0, t1) = self.window;
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidParam {
                name: "window",
                reason: format!("empty or invalid window ({t0}, {t1})"),
            });
        }
        Ok(())
    }

    /// Bin index for a timestamp, clamped into [0, bins).
    #[inline]
    pub fn bin_of(&self, t: f64) -> usize {
        let (t0, t1) = self.window;
        let raw = ((t - t0) / (t1 - t0) * self.bins as f64).floor();
        if raw < 0.0 {
            0
        } else if raw >= self.bins as f64 {
            self.bins - 1
        } else {
            raw as usize
        }
    }

    /// Center timestamp of a bin.
    #[inline]
    pub fn bin_center(&self, bin: usize) -> f64 {
        let (t0, t1) = self.window;
        t0 + (bin as f64 + 0.5) * (t1 - t0) / self.bins as f64
    }
}

/// Rasterized stream: one binary tensor per polarity channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarityRaster {
    /// Indexed by polarity: [0] = off events, [1] = on events.
    pub channels: [SpikeTensor; 2],
    pub height: u16,
    pub width: u16,
}

impl PolarityRaster {
    /// Concatenate both channels into one network input of width 2*H*W
    /// (polarity 0 cells first, then polarity 1).
    pub fn stacked(&self) -> SpikeTensor {
        let steps = self.channels[0].steps();
        let w = self.channels[0].width();
        let mut out = SpikeTensor::zeros(steps, 2 * w);
        for t in 0..steps {
            for n in 0..w {
                out.set(t, n, self.channels[0].get(t, n));
                out.set(t, w + n, self.channels[1].get(t, n));
            }
        }
        out
    }

    /// Map a flat cell index of the stacked tensor back to (polarity, y, x).
    pub fn unstack_cell(&self, cell: usize) -> (u8, u16, u16) {
        let w = self.width as usize;
        let hw = self.height as usize * w;
        let (polarity, pix) = if cell < hw { (0, cell) } else { (1, cell - hw) };
        ((polarity as u8), (pix / w) as u16, (pix % w) as u16)
    }
}

/// Bernoulli rate coding: pixel intensity is the per-step spike probability.
///
/// The draw for (step t, neuron n) comes from a counter-based generator keyed
/// by (seed, t, n), so any single spike decision is reproducible in isolation.
pub fn rate_encode(img: &Image, steps: usize, seed: u64) -> Result<SpikeTensor> {
    if steps == 0 {
        return Err(Error::InvalidParam {
            name: "steps",
            reason: "rate encoding needs at least one time step".into(),
        });
    }
    let n = img.len();
    let mut out = SpikeTensor::zeros(steps, n);
    for t in 0..steps {
        for (i, &p) in img.pixels().iter().enumerate() {
            if keyed_unit(seed, t as u64, i as u64) < p {
                out.set(t, i, 1);
            }
        }
    }
    Ok(out)
}

/// Bin an event stream into per-polarity binary tensors.
///
/// A cell is 1 if at least one event of that polarity landed in the bin.
/// Timestamps outside the window clamp to the edge bins, so no event is
/// silently dropped.
pub fn rasterize(stream: &EventStream, spec: &RasterSpec) -> Result<PolarityRaster> {
    spec.validate()?;
    let h = stream.height() as usize;
    let w = stream.width() as usize;
    let mut channels = [
        SpikeTensor::zeros(spec.bins, h * w),
        SpikeTensor::zeros(spec.bins, h * w),
    ];
    for e in stream.events() {
        let bin = spec.bin_of(e.t);
        let cell = e.y as usize * w + e.x as usize;
        channels[e.polarity as usize].set(bin, cell, 1);
    }
    Ok(PolarityRaster {
        channels,
        height: stream.height(),
        width: stream.width(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_image(h: usize, w: usize, value: f64) -> Image {
        Image::new(h, w, vec![value; h * w]).unwrap()
    }

    #[test]
    fn image_rejects_out_of_range_pixels() {
        assert!(Image::new(1, 2, vec![0.0, 1.2]).is_err());
        assert!(Image::new(1, 2, vec![-0.1, 0.5]).is_err());
        assert!(Image::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn rate_encode_zero_pixel_never_spikes() {
        let img = uniform_image(2, 2, 0.0);
        let spikes = rate_encode(&img, 64, 3).unwrap();
        assert_eq!(spikes.count_ones(), 0);
    }

    #[test]
    fn rate_encode_full_pixel_always_spikes() {
        let img = uniform_image(2, 2, 1.0);
        let steps = 64;
        let spikes = rate_encode(&img, steps, 3).unwrap();
        assert_eq!(spikes.count_ones(), (steps * img.len()) as u64);
    }

    #[test]
    fn rate_encode_half_pixel_long_run_rate() {
        // Law of large numbers at a fixed seed: 10k draws of p=0.5.
        let img = uniform_image(1, 1, 0.5);
        let steps = 10_000;
        let spikes = rate_encode(&img, steps, 11).unwrap();
        let rate = spikes.count_ones() as f64 / steps as f64;
        assert!(
            (rate - 0.5).abs() < 0.02,
            "empirical rate {rate} drifted from 0.5"
        );
    }

    #[test]
    fn rate_encode_is_unbiased_across_seeds() {
        // Mean over many independent seeds must approach the pixel value
        // within 3 sigma of the binomial.
        let p = 0.3;
        let img = uniform_image(1, 1, p);
        let steps = 50;
        let seeds = 400u64;
        let total: u64 = (0..seeds)
            .map(|s| rate_encode(&img, steps, s).unwrap().count_ones())
            .sum();
        let n = (steps as u64 * seeds) as f64;
        let mean = total as f64 / n;
        let sigma = (p * (1.0 - p) / n).sqrt();
        assert!(
            (mean - p).abs() <= 3.0 * sigma,
            "mean {mean} outside 3 sigma ({sigma}) of {p}"
        );
    }

    #[test]
    fn rate_encode_same_seed_is_identical() {
        let img = uniform_image(3, 3, 0.4);
        let a = rate_encode(&img, 20, 9).unwrap();
        let b = rate_encode(&img, 20, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn event_stream_rejects_out_of_bounds() {
        let e = Event {
            x: 4,
            y: 0,
            polarity: 1,
            t: 0.0,
        };
        assert!(EventStream::new(4, 4, vec![e]).is_err());
    }

    #[test]
    fn event_stream_rejects_unsorted_timestamps() {
        let events = vec![
            Event {
                x: 0,
                y: 0,
                polarity: 0,
                t: 5.0,
            },
            Event {
                x: 1,
                y: 1,
                polarity: 1,
                t: 4.0,
            },
        ];
        assert!(EventStream::new(4, 4, events).is_err());
    }

    #[test]
    fn rasterize_empty_stream_is_all_zero() {
        let stream = EventStream::empty(4, 4);
        let spec = RasterSpec::new(3, (0.0, 10.0)).unwrap();
        let raster = rasterize(&stream, &spec).unwrap();
        assert_eq!(raster.channels[0].count_ones(), 0);
        assert_eq!(raster.channels[1].count_ones(), 0);
    }

    #[test]
    fn rasterize_window_edges_land_in_outer_bins() {
        let events = vec![
            Event {
                x: 0,
                y: 0,
                polarity: 1,
                t: 0.0,
            },
            Event {
                x: 1,
                y: 0,
                polarity: 1,
                t: 10.0 - 1e-9,
            },
        ];
        let stream = EventStream::new(4, 4, events).unwrap();
        let spec = RasterSpec::new(2, (0.0, 10.0)).unwrap();
        let raster = rasterize(&stream, &spec).unwrap();
        assert_eq!(raster.channels[1].get(0, 0), 1, "t=t0 must land in bin 0");
        assert_eq!(
            raster.channels[1].get(1, 1),
            1,
            "t just below t1 must land in the last bin"
        );
    }

    #[test]
    fn rasterize_rejects_empty_window() {
        assert!(RasterSpec::new(2, (5.0, 5.0)).is_err());
        assert!(RasterSpec::new(0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn rasterize_keeps_every_in_window_event() {
        let events = vec![
            Event {
                x: 2,
                y: 3,
                polarity: 0,
                t: 1.0,
            },
            Event {
                x: 2,
                y: 3,
                polarity: 1,
                t: 2.0,
            },
        ];
        let stream = EventStream::new(8, 8, events).unwrap();
        let spec = RasterSpec::new(4, (0.0, 4.0)).unwrap();
        let raster = rasterize(&stream, &spec).unwrap();
        assert!(raster.channels[0].count_ones() + raster.channels[1].count_ones() >= 1);
    }

    #[test]
    fn stacked_raster_keeps_polarity_channels_apart() {
        let events = vec![Event {
            x: 1,
            y: 0,
            polarity: 1,
            t: 0.5,
        }];
        let stream = EventStream::new(2, 2, events).unwrap();
        let spec = RasterSpec::new(1, (0.0, 1.0)).unwrap();
        let raster = rasterize(&stream, &spec).unwrap();
        let stacked = raster.stacked();
        assert_eq!(stacked.width(), 8);
        assert_eq!(stacked.get(0, 1), 0, "polarity-0 channel must stay empty");
        assert_eq!(stacked.get(0, 4 + 1), 1, "polarity-1 cell (0,1) must be set");
        assert_eq!(raster.unstack_cell(5), (1, 0, 1));
    }
}
