//! Discrete-time leaky integrate-and-fire dynamics and layered feedforward
//! evaluation over a fixed number of time steps.
//!
//! A network is a stack of dense layers. At every step each neuron leaks its
//! membrane potential, integrates the weighted sum of incoming spikes, and
//! fires (resetting hard to zero) once the potential reaches the threshold.
//! Class scores are spike counts of the output layer — rate decoding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bin_io::BinReader;
use crate::codec::SpikeTensor;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Magic bytes of the network checkpoint format.
const NETWORK_MAGIC: &[u8; 4] = b"AXSN";
const NETWORK_VERSION: u32 = 1;

/// Per-layer neuron parameters: firing threshold and per-step leak factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane threshold voltage (dimensionless potential units); > 0.
    pub v_th: f64,
    /// Leak factor applied to the carried potential each step; in (0, 1].
    pub beta: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            v_th: 1.0,
            beta: 0.95,
        }
    }
}

impl LifParams {
    pub fn new(v_th: f64, beta: f64) -> Result<Self> {
        let p = LifParams { v_th, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_th.is_finite() && self.v_th > 0.0) {
            return Err(Error::InvalidParam {
                name: "v_th",
                reason: format!("threshold must be finite and positive, got {}", self.v_th),
            });
        }
        if !(self.beta.is_finite() && self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParam {
                name: "beta",
                reason: format!("leak factor must lie in (0, 1], got {}", self.beta),
            });
        }
        Ok(())
    }
}

/// One membrane update: leak, integrate, fire-and-reset.
///
/// Returns the post-step potential and whether the neuron spiked. The
/// potential after a spike is exactly 0 (hard reset).
#[inline]
pub fn lif_step(v: f64, input_current: f64, params: &LifParams) -> Result<(f64, u8)> {
    let (v_pre, spike) = lif_step_raw(v, input_current, params)?;
    Ok(if spike == 1 { (0.0, 1) } else { (v_pre, 0) })
}

/// Like [`lif_step`] but returns the pre-reset potential, which the traces
/// record for later spike-probability estimates.
#[inline]
fn lif_step_raw(v: f64, input_current: f64, params: &LifParams) -> Result<(f64, u8)> {
    let v_pre = params.beta * v + input_current;
    if !v_pre.is_finite() {
        return Err(Error::NonFinite {
            context: "lif_step membrane update",
            value: v_pre,
        });
    }
    Ok((v_pre, u8::from(v_pre >= params.v_th)))
}

/// Dense synaptic layer: weight matrix of shape fan-in x fan-out plus the
/// LIF parameters of its output neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    params: LifParams,
}

impl DenseLayer {
    pub fn new(weights: Matrix, params: LifParams) -> Result<Self> {
        params.validate()?;
        if !weights.all_finite() {
            return Err(Error::NonFinite {
                context: "DenseLayer weights",
                value: f64::NAN,
            });
        }
        Ok(DenseLayer { weights, params })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn params(&self) -> &LifParams {
        &self.params
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Layered feedforward spiking network evaluated over `time_steps` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    time_steps: usize,
}

/// Recorded per-layer activity of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Pre-reset membrane potential, shape (T, neurons).
    membrane: Matrix,
    /// Binary spike outputs, shape (T, neurons).
    spikes: SpikeTensor,
    /// Spikes per neuron summed over the run.
    spike_count: Vec<f64>,
}

impl LayerTrace {
    pub fn membrane(&self) -> &Matrix {
        &self.membrane
    }

    pub fn spikes(&self) -> &SpikeTensor {
        &self.spikes
    }

    pub fn spike_count(&self) -> &[f64] {
        &self.spike_count
    }

    /// Total spikes emitted by the layer over the run.
    pub fn total_spikes(&self) -> f64 {
        self.spike_count.iter().sum()
    }

    /// Per-neuron mean pre-reset membrane potential over all steps.
    pub fn mean_membrane(&self) -> Vec<f64> {
        let t = self.membrane.rows();
        let n = self.membrane.cols();
        let mut out = vec![0.0; n];
        for step in 0..t {
            for (j, v) in self.membrane.row(step).iter().enumerate() {
                out[j] += v;
            }
        }
        for v in &mut out {
            *v /= t as f64;
        }
        out
    }
}

/// Result of one forward pass: rate logits plus the full per-layer traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Spike count of each output neuron over the run.
    pub logits: Vec<f64>,
    /// One trace per layer, input-nearest first.
    pub traces: Vec<LayerTrace>,
}

impl ForwardPass {
    /// Index of the highest logit; ties go to the lower class index.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.logits.iter().enumerate() {
            if v > self.logits[best] {
                best = k;
            }
        }
        best
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, time_steps: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParam {
                name: "layers",
                reason: "a network needs at least one layer".into(),
            });
        }
        if time_steps == 0 {
            return Err(Error::InvalidParam {
                name: "time_steps",
                reason: "at least one time step required".into(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Dimension {
                    context: "Network::new layer composition",
                    expected: format!("fan-in {}", pair[0].fan_out()),
                    actual: format!("fan-in {}", pair[1].fan_in()),
                });
            }
        }
        Ok(Network {
            layers,
            time_steps,
        })
    }

    /// Fresh network with uniform weights scaled by fan-in
    /// (U(-b, b) with b = sqrt(3 / fan_in)), deterministic per seed.
    pub fn random(sizes: &[usize], params: LifParams, time_steps: usize, seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidParam {
                name: "sizes",
                reason: "need at least input and output sizes".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::InvalidParam {
                    name: "sizes",
                    reason: "layer sizes must be positive".into(),
                });
            }
            let bound = (3.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(DenseLayer::new(
                Matrix::from_vec(fan_in, fan_out, data)?,
                params,
            )?);
        }
        Network::new(layers, time_steps)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("nonempty").fan_out()
    }

    /// Run the network over an input spike train.
    pub fn forward(&self, input: &SpikeTensor) -> Result<ForwardPass> {
        self.forward_masked(input, None)
    }

    /// Forward pass that skips connections whose mask entry is 0. `masks`
    /// holds one row-major byte per weight; `None` keeps every connection.
    ///
    /// Skipping a connection is bit-identical to running with that weight
    /// set to literal 0.0, which the pruning invariants rely on.
    pub(crate) fn forward_masked(
        &self,
        input: &SpikeTensor,
        masks: Option<&[Vec<u8>]>,
    ) -> Result<ForwardPass> {
        if input.steps() != self.time_steps {
            return Err(Error::Dimension {
                context: "forward input steps",
                expected: format!("{} time steps", self.time_steps),
                actual: format!("{} time steps", input.steps()),
            });
        }
        if input.width() != self.input_size() {
            return Err(Error::Dimension {
                context: "forward input width",
                expected: format!("{} neurons", self.input_size()),
                actual: format!("{} neurons", input.width()),
            });
        }
        if let Some(m) = masks {
            debug_assert_eq!(m.len(), self.layers.len());
        }

        let t_steps = self.time_steps;
        let mut spikes_in = input.clone();
        let mut traces = Vec::with_capacity(self.layers.len());

        for (l, layer) in self.layers.iter().enumerate() {
            let fan_out = layer.fan_out();
            let mask = masks.map(|m| m[l].as_slice());
            let mut v = vec![0.0f64; fan_out];
            let mut membrane = Matrix::zeros(t_steps, fan_out);
            let mut spikes_out = SpikeTensor::zeros(t_steps, fan_out);
            let mut counts = vec![0.0f64; fan_out];

            for t in 0..t_steps {
                let mut current = vec![0.0f64; fan_out];
                for (i, &s) in spikes_in.row(t).iter().enumerate() {
                    if s == 0 {
                        continue;
                    }
                    let wrow = layer.weights.row(i);
                    match mask {
                        None => {
                            for (j, &w) in wrow.iter().enumerate() {
                                current[j] += w;
                            }
                        }
                        Some(m) => {
                            let mrow = &m[i * fan_out..(i + 1) * fan_out];
                            for (j, &w) in wrow.iter().enumerate() {
                                if mrow[j] != 0 {
                                    current[j] += w;
                                }
                            }
                        }
                    }
                }
                for j in 0..fan_out {
                    let (v_pre, s) = lif_step_raw(v[j], current[j], &layer.params)?;
                    membrane.set(t, j, v_pre);
                    if s == 1 {
                        spikes_out.set(t, j, 1);
                        counts[j] += 1.0;
                        v[j] = 0.0;
                    } else {
                        v[j] = v_pre;
                    }
                }
            }

            let trace = LayerTrace {
                membrane,
                spikes: spikes_out.clone(),
                spike_count: counts,
            };
            traces.push(trace);
            spikes_in = spikes_out;
        }

        let logits = traces.last().expect("nonempty").spike_count.clone();
        Ok(ForwardPass { logits, traces })
    }

    /// Serialize into the versioned binary checkpoint format.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(NETWORK_MAGIC)?;
        w.write_u32::<LittleEndian>(NETWORK_VERSION)?;
        w.write_u32::<LittleEndian>(self.layers.len() as u32)?;
        for layer in &self.layers {
            w.write_u32::<LittleEndian>(layer.fan_in() as u32)?;
            w.write_u32::<LittleEndian>(layer.fan_out() as u32)?;
            w.write_f64::<LittleEndian>(layer.params.v_th)?;
            w.write_f64::<LittleEndian>(layer.params.beta)?;
            for &v in layer.weights.data() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.write_u32::<LittleEndian>(self.time_steps as u32)?;
        Ok(())
    }

    pub(crate) fn read_from<R: std::io::Read>(r: &mut BinReader<R>) -> Result<Self> {
        r.magic(NETWORK_MAGIC, "network checkpoint")?;
        let version = r.u32("format version")?;
        if version != NETWORK_VERSION {
            return Err(r.error(format!("unsupported format version {version}")));
        }
        let n_layers = r.u32("layer count")? as usize;
        if n_layers == 0 {
            return Err(r.error("layer count is zero"));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = r.u32("layer fan-in")? as usize;
            let cols = r.u32("layer fan-out")? as usize;
            let v_th = r.f64("layer v_th")?;
            let beta = r.f64("layer beta")?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(r.f64("weight")?);
            }
            let params = LifParams::new(v_th, beta)
                .map_err(|e| r.error(format!("invalid neuron parameters: {e}")))?;
            layers.push(
                DenseLayer::new(Matrix::from_vec(rows, cols, data)?, params)
                    .map_err(|e| r.error(format!("invalid layer: {e}")))?,
            );
        }
        let t = r.u32("time steps")? as usize;
        Network::new(layers, t).map_err(|e| r.error(format!("invalid network: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let mut r = BinReader::new(BufReader::new(file), &path.display().to_string());
        let net = Network::read_from(&mut r)?;
        r.expect_eof()?;
        Ok(net)
    }
}

/// Per-neuron probability that a neuron fires in a step, estimated as the
/// mean pre-reset membrane potential relative to the threshold and clamped
/// into [0, 1].
pub fn spike_probability(trace: &LayerTrace, params: &LifParams) -> Vec<f64> {
    trace
        .mean_membrane()
        .iter()
        .map(|&m| (m / params.v_th).clamp(0.0, 1.0))
        .collect()
}
