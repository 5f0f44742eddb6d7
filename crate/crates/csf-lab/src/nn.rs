//! Minimal multilayer-perceptron machinery: flat parameter vectors with a
//! shape layout, deterministic forward with a tape, exact reverse-mode
//! backward, and an Adam-style optimizer.
//!
//! Written in-repo on purpose: the experiments need bit-reproducible f64
//! training and gradient checks, not a framework.

use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Architecture of an encoder MLP. Hidden layers use a piecewise-linear
/// activation with the given negative-side slope; the output layer is
/// affine. With `skip` a learned input projection is added to the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    #[serde(default = "default_negative_slope")]
    pub negative_slope: f64,
    #[serde(default)]
    pub skip: bool,
}

fn default_negative_slope() -> f64 {
    0.2
}

impl MlpSpec {
    pub fn new(input_dim: usize, output_dim: usize, hidden: Vec<usize>, skip: bool) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden,
            negative_slope: default_negative_slope(),
            skip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidDimension);
        }
        Ok(())
    }

    /// Widths of the affine layers, input to output.
    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn layout(&self) -> Layout {
        let widths = self.widths();
        let mut entries = Vec::new();
        let mut offset = 0;
        for i in 0..widths.len() - 1 {
            let (cols, rows) = (widths[i], widths[i + 1]);
            entries.push(LayoutEntry {
                offset,
                rows,
                cols,
                bias_offset: offset + rows * cols,
            });
            offset += rows * cols + rows;
        }
        let skip_offset = self.skip.then_some(offset);
        if self.skip {
            offset += self.output_dim * self.input_dim;
        }
        Layout {
            entries,
            skip_offset,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// One affine layer inside the flat parameter vector: weights are row-major
/// `rows x cols` at `offset`, biases are `rows` values at `bias_offset`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub bias_offset: usize,
}

/// Offsets/shapes table for a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    /// Offset of the skip projection (output_dim x input_dim), if present.
    pub skip_offset: Option<usize>,
    pub total: usize,
}

/// Flat parameter vector matching an `MlpSpec` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Gradient with the same shape as the parameters.
#[derive(Debug, Clone)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Deterministic initialization: weights at scale 1/sqrt(fan_in), biases 0.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = substream(seed, "mlp-init", 0);
    let layout = spec.layout();
    let mut values = vec![0.0; layout.total];
    for entry in &layout.entries {
        let scale = 1.0 / (entry.cols as f64).sqrt();
        for v in &mut values[entry.offset..entry.offset + entry.rows * entry.cols] {
            *v = rng.sample::<f64, _>(StandardNormal) * scale;
        }
    }
    if let Some(off) = layout.skip_offset {
        let scale = 1.0 / (spec.input_dim as f64).sqrt();
        for v in &mut values[off..off + spec.output_dim * spec.input_dim] {
            *v = rng.sample::<f64, _>(StandardNormal) * scale;
        }
    }
    ParamVector(values)
}

/// Cached forward activations, sufficient for an exact backward pass.
/// `layer_inputs[i]` is the input to affine layer i; `layer_inputs[0]` is x.
#[derive(Debug, Clone)]
pub struct Tape {
    layer_inputs: Vec<Vec<f64>>,
}

fn affine(values: &[f64], entry: &LayoutEntry, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for r in 0..entry.rows {
        let row = &values[entry.offset + r * entry.cols..entry.offset + (r + 1) * entry.cols];
        let acc: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
        out.push(acc + values[entry.bias_offset + r]);
    }
}

/// Deterministic forward pass; the tape holds everything backward needs.
pub fn forward(spec: &MlpSpec, params: &ParamVector, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: x.len(),
        });
    }
    debug_assert_eq!(params.len(), spec.param_count());
    let layout = spec.layout();
    let slope = spec.negative_slope;
    let n_layers = layout.entries.len();

    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut cur = x.to_vec();
    let mut y = Vec::new();
    for (i, entry) in layout.entries.iter().enumerate() {
        affine(&params.0, entry, &cur, &mut y);
        if i + 1 < n_layers {
            for v in &mut y {
                if *v < 0.0 {
                    *v *= slope;
                }
            }
        }
        layer_inputs.push(std::mem::replace(&mut cur, Vec::new()));
        std::mem::swap(&mut cur, &mut y);
    }

    if let Some(off) = layout.skip_offset {
        let x0 = &layer_inputs[0];
        for (r, v) in cur.iter_mut().enumerate() {
            let row = &params.0[off + r * spec.input_dim..off + (r + 1) * spec.input_dim];
            *v += row.iter().zip(x0).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }

    Ok((cur, Tape { layer_inputs }))
}

/// Output of the network without keeping the tape.
pub fn evaluate(spec: &MlpSpec, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    forward(spec, params, x).map(|(y, _)| y)
}

/// Exact gradient of `<upstream, y>` with respect to parameters and input.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    tape: &Tape,
    upstream: &[f64],
) -> Result<(GradVector, Vec<f64>)> {
    let mut grad = GradVector::zeros(spec);
    let input_grad = backward_accumulate(spec, params, tape, upstream, &mut grad.0)?;
    Ok((grad, input_grad))
}

/// Backward pass that adds into an existing accumulator, so a batch shares
/// one gradient buffer.
pub fn backward_accumulate(
    spec: &MlpSpec,
    params: &ParamVector,
    tape: &Tape,
    upstream: &[f64],
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    if upstream.len() != spec.output_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.output_dim,
            got: upstream.len(),
        });
    }
    let layout = spec.layout();
    debug_assert_eq!(grad.len(), layout.total);
    debug_assert_eq!(tape.layer_inputs.len(), layout.entries.len());
    let slope = spec.negative_slope;

    let mut delta = upstream.to_vec();
    let mut below = Vec::new();
    for (i, entry) in layout.entries.iter().enumerate().rev() {
        let input = &tape.layer_inputs[i];
        debug_assert_eq!(input.len(), entry.cols);
        debug_assert_eq!(delta.len(), entry.rows);

        for (r, &dr) in delta.iter().enumerate() {
            let g_row = &mut grad[entry.offset + r * entry.cols..entry.offset + (r + 1) * entry.cols];
            for (g, &xi) in g_row.iter_mut().zip(input) {
                *g += dr * xi;
            }
            grad[entry.bias_offset + r] += dr;
        }

        below.clear();
        below.resize(entry.cols, 0.0);
        for (r, &dr) in delta.iter().enumerate() {
            let w_row = &params.0[entry.offset + r * entry.cols..entry.offset + (r + 1) * entry.cols];
            for (b, &w) in below.iter_mut().zip(w_row) {
                *b += w * dr;
            }
        }
        if i > 0 {
            // input was produced by the leaky activation of the layer below;
            // its sign tells which piece was active
            for (b, &post) in below.iter_mut().zip(input) {
                if post < 0.0 {
                    *b *= slope;
                }
            }
        }
        std::mem::swap(&mut delta, &mut below);
    }

    if let Some(off) = layout.skip_offset {
        let x0 = &tape.layer_inputs[0];
        for (r, &ur) in upstream.iter().enumerate() {
            let g_row = &mut grad[off + r * spec.input_dim..off + (r + 1) * spec.input_dim];
            for (g, &xi) in g_row.iter_mut().zip(x0) {
                *g += ur * xi;
            }
        }
        let skip_w = &params.0[off..off + spec.output_dim * spec.input_dim];
        for (c, d) in delta.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, &ur) in upstream.iter().enumerate() {
                acc += skip_w[r * spec.input_dim + c] * ur;
            }
            *d += acc;
        }
    }

    Ok(delta)
}

/// What `OptimState::step` did with the proposed update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient contained NaN/Inf; parameters were left untouched.
    RejectedNonFinite,
}

/// Adam-style optimizer state: bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct OptimState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of rejected (non-finite) steps so far.
    pub rejected: u64,
}

impl OptimState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rejected: 0,
        }
    }

    /// One bias-corrected adaptive update. Deterministic; non-finite
    /// gradients reject the step and leave the parameters unchanged.
    pub fn step(&mut self, params: &mut ParamVector, grads: &GradVector) -> StepOutcome {
        debug_assert_eq!(params.len(), grads.0.len());
        debug_assert_eq!(params.len(), self.m.len());
        if !grads.is_finite() {
            self.rejected += 1;
            return StepOutcome::RejectedNonFinite;
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let corr1 = 1.0 - self.beta1.powf(t);
        let corr2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.0.len() {
            let g = grads.0[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params.0[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        StepOutcome::Applied
    }
}

/// Header written next to the flat little-endian f64 checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: MlpSpec,
    pub layout: Layout,
    pub seed: u64,
    pub step: u64,
}

/// Write `<stem>.json` (header) and `<stem>.bin` (packed f64, little-endian).
pub fn save_checkpoint(
    stem: &Path,
    spec: &MlpSpec,
    params: &ParamVector,
    seed: u64,
    step: u64,
) -> Result<()> {
    let header = CheckpointHeader {
        spec: spec.clone(),
        layout: spec.layout(),
        seed,
        step,
    };
    let json_path = stem.with_extension("json");
    let bin_path = stem.with_extension("bin");
    std::fs::write(&json_path, serde_json::to_string_pretty(&header)?)?;
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for v in &params.0 {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(&bin_path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Read a checkpoint pair written by `save_checkpoint`.
pub fn load_checkpoint(stem: &Path) -> Result<(CheckpointHeader, ParamVector)> {
    let header: CheckpointHeader =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let mut bytes = Vec::new();
    std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != header.layout.total * 8 {
        return Err(Error::InvalidConfig(format!(
            "checkpoint holds {} bytes, layout wants {}",
            bytes.len(),
            header.layout.total * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, ParamVector(values)))
}
