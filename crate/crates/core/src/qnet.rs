//! The Q-function approximator: a plain fully connected ReLU network with
//! a single linear output, trained by Adam on mean-squared TD error.
//!
//! Everything is f64 and hand-rolled on top of `ndarray` gemm — the value
//! targets move every update (soft target tracking), so optimizer
//! mechanics must be exactly reproducible, and batched matrix products on
//! one core are fast enough for every training budget in the repo.

use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Network shape: input width and hidden widths. The output is always one
/// scalar value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpSpec {
    /// Small preset for tests and quick runs: 3 hidden layers of 128.
    pub fn compact(input_dim: usize) -> MlpSpec {
        MlpSpec {
            input_dim,
            hidden: vec![128; 3],
        }
    }

    /// Full-size preset: 7 hidden layers of 512.
    pub fn full(input_dim: usize) -> MlpSpec {
        MlpSpec {
            input_dim,
            hidden: vec![512; 7],
        }
    }

    /// (fan_in, fan_out) of every affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .into_iter()
            .map(|(i, o)| i * o + o)
            .sum()
    }

    pub fn validate(&self) -> Result<(), CheckpointError> {
        if self.input_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(CheckpointError::ShapeMismatch("zero-width layer"));
        }
        const MAX_WIDTH: usize = 1 << 20;
        if self.input_dim > MAX_WIDTH
            || self.hidden.len() > 1024
            || self.hidden.iter().any(|&h| h > MAX_WIDTH)
        {
            return Err(CheckpointError::ShapeMismatch("implausibly large layer"));
        }
        Ok(())
    }
}

/// One affine layer, stored as `weight` (out x in) and `bias` (out).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Network parameters. Hidden layers apply ReLU; the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// He-normal initialization: weights N(0, sqrt(2 / fan_in)), biases 0 —
    /// the standard choice for ReLU stacks.
    pub fn init(spec: &MlpSpec, rng: &mut impl Rng) -> MlpParams {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                Layer {
                    weight: Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        MlpParams { layers }
    }

    pub fn zeros(spec: &MlpSpec) -> MlpParams {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| Layer {
                weight: Array2::zeros((fan_out, fan_in)),
                bias: Array1::zeros(fan_out),
            })
            .collect();
        MlpParams { layers }
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input_dim: self.layers[0].weight.ncols(),
            hidden: self.layers[..self.layers.len() - 1]
                .iter()
                .map(|l| l.weight.nrows())
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    /// Value of a single input.
    pub fn forward(&self, input: &[f64]) -> f64 {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).unwrap();
        self.forward_batch(&x)[0]
    }

    /// Values of a batch of inputs, one per row.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Array1<f64> {
        assert_eq!(
            inputs.ncols(),
            self.input_dim(),
            "input width does not match the network"
        );
        let mut a = inputs.dot(&self.layers[0].weight.t()) + &self.layers[0].bias;
        for layer in &self.layers[1..] {
            a.mapv_inplace(|v| v.max(0.0));
            a = a.dot(&layer.weight.t()) + &layer.bias;
        }
        a.index_axis(Axis(1), 0).to_owned()
    }
}

/// Mean-squared-error loss over a batch and its parameter gradients, by
/// reverse accumulation. ReLU uses subgradient 0 at exactly zero.
pub fn mse_loss_and_gradients(
    params: &MlpParams,
    inputs: &Array2<f64>,
    targets: &Array1<f64>,
) -> (f64, MlpGradients) {
    let batch = inputs.nrows();
    assert_eq!(targets.len(), batch);
    assert!(batch > 0, "empty batch");
    let n_layers = params.layers.len();

    // Forward, keeping each layer's post-activation input.
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
    activations.push(inputs.to_owned());
    let mut z = inputs.dot(&params.layers[0].weight.t()) + &params.layers[0].bias;
    for layer in &params.layers[1..] {
        let a = z.mapv(|v| v.max(0.0));
        z = a.dot(&layer.weight.t()) + &layer.bias;
        activations.push(a);
    }
    let preds = z.index_axis(Axis(1), 0);
    let err = &preds - targets;
    let loss = err.iter().map(|e| e * e).sum::<f64>() / batch as f64;

    // Backward.
    let mut grads: Vec<Layer> = params
        .layers
        .iter()
        .map(|l| Layer {
            weight: Array2::zeros(l.weight.dim()),
            bias: Array1::zeros(l.bias.len()),
        })
        .collect();
    let mut delta: Array2<f64> = {
        let scaled = err.mapv(|e| 2.0 * e / batch as f64);
        scaled.insert_axis(Axis(1))
    };
    for l in (0..n_layers).rev() {
        grads[l].weight = delta.t().dot(&activations[l]);
        grads[l].bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&params.layers[l].weight);
            upstream.zip_mut_with(&activations[l], |u, &a| {
                if a <= 0.0 {
                    *u = 0.0;
                }
            });
            delta = upstream;
        }
    }
    (loss, MlpGradients { layers: grads })
}

/// Adam hyperparameters, the usual defaults with the learning rate the
/// training config cares about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, parameter-shaped.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> AdamState {
        let zero = |p: &MlpParams| {
            p.layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect::<Vec<_>>()
        };
        AdamState {
            m: zero(params),
            v: zero(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpGradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for l in 0..params.layers.len() {
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        };
        let (pw, gw) = (&mut params.layers[l].weight, &grads.layers[l].weight);
        let (mw, vw) = (&mut state.m[l].weight, &mut state.v[l].weight);
        ndarray::Zip::from(pw)
            .and(gw)
            .and(mw)
            .and(vw)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        let (pb, gb) = (&mut params.layers[l].bias, &grads.layers[l].bias);
        let (mb, vb) = (&mut state.m[l].bias, &mut state.v[l].bias);
        ndarray::Zip::from(pb)
            .and(gb)
            .and(mb)
            .and(vb)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
}

/// Polyak averaging: `target = tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, tau: f64) {
    assert_eq!(target.layers.len(), online.layers.len());
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        t.weight.zip_mut_with(&o.weight, |tv, &ov| {
            *tv = tau * ov + (1.0 - tau) * *tv;
        });
        t.bias.zip_mut_with(&o.bias, |tv, &ov| {
            *tv = tau * ov + (1.0 - tau) * *tv;
        });
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"DQSTEPQN";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint file is truncated")]
    Truncated,
    #[error("checkpoint file has trailing bytes")]
    TrailingData,
    #[error("checkpoint shape is invalid: {0}")]
    ShapeMismatch(&'static str),
}

/// Serializes parameters to the self-describing binary format: magic,
/// format version, layer shape, then weights (row-major) and biases per
/// layer, all little-endian f64.
pub fn checkpoint_to_bytes(params: &MlpParams) -> Vec<u8> {
    let spec = params.spec();
    let mut out = Vec::with_capacity(16 + 8 * spec.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(spec.hidden.len() as u32).to_le_bytes());
    for &h in &spec.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    for layer in &params.layers {
        for v in layer.weight.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in layer.bias.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(cursor: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if cursor.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (head, rest) = cursor.split_at(n);
    *cursor = rest;
    Ok(head)
}

fn take_u32(cursor: &mut &[u8]) -> Result<u32, CheckpointError> {
    Ok(u32::from_le_bytes(take(cursor, 4)?.try_into().unwrap()))
}

fn take_f64s(cursor: &mut &[u8], count: usize) -> Result<Vec<f64>, CheckpointError> {
    Ok(take(cursor, count * 8)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<MlpParams, CheckpointError> {
    let mut cursor = bytes;
    if take(&mut cursor, 8)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = take_u32(&mut cursor)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let input_dim = take_u32(&mut cursor)? as usize;
    let n_hidden = take_u32(&mut cursor)? as usize;
    if n_hidden > 1024 {
        return Err(CheckpointError::ShapeMismatch("implausibly large layer"));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(take_u32(&mut cursor)? as usize);
    }
    let spec = MlpSpec { input_dim, hidden };
    spec.validate()?;
    let mut layers = Vec::new();
    for (fan_in, fan_out) in spec.layer_dims() {
        let w = take_f64s(&mut cursor, fan_in * fan_out)?;
        let b = take_f64s(&mut cursor, fan_out)?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((fan_out, fan_in), w).unwrap(),
            bias: Array1::from_vec(b),
        });
    }
    if !cursor.is_empty() {
        return Err(CheckpointError::TrailingData);
    }
    Ok(MlpParams { layers })
}

pub fn save_checkpoint(params: &MlpParams, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    std::fs::write(path, checkpoint_to_bytes(params))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}
