//! Five-layer dense binary classifier.
//!
//! Hidden layers use ReLU followed by inverted dropout, the output layer a
//! clamped sigmoid. Weight matrices are stored `[out_dim, in_dim]` so a
//! forward step is a sequence of contiguous dot products.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::PROB_EPSILON;

/// Number of weight layers in every network.
pub const WEIGHT_LAYERS: usize = 5;

/// Hidden widths used when only the input dimension is known.
pub const DEFAULT_HIDDEN: [usize; 4] = [64, 32, 16, 8];

pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Topology {
    layer_dims: Vec<usize>,
    dropout_rate: f64,
}

impl Topology {
    pub fn new(layer_dims: Vec<usize>, dropout_rate: f64) -> Result<Self> {
        if layer_dims.len() != WEIGHT_LAYERS + 1 {
            return Err(Error::InvalidTopology(format!(
                "expected {} layer dimensions, got {}",
                WEIGHT_LAYERS + 1,
                layer_dims.len()
            )));
        }
        if let Some(pos) = layer_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidTopology(format!("dimension {pos} is zero")));
        }
        if layer_dims[WEIGHT_LAYERS] != 1 {
            return Err(Error::InvalidTopology(format!(
                "output dimension must be 1, got {}",
                layer_dims[WEIGHT_LAYERS]
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidTopology(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        Ok(Self {
            layer_dims,
            dropout_rate,
        })
    }

    /// `[features, hidden.., 1]`.
    pub fn from_hidden(features: usize, hidden: [usize; 4], dropout_rate: f64) -> Result<Self> {
        let mut dims = Vec::with_capacity(WEIGHT_LAYERS + 1);
        dims.push(features);
        dims.extend_from_slice(&hidden);
        dims.push(1);
        Self::new(dims, dropout_rate)
    }

    pub fn with_defaults(features: usize) -> Result<Self> {
        Self::from_hidden(features, DEFAULT_HIDDEN, DEFAULT_DROPOUT)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    /// `[out_dim, in_dim]`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Parameters of one network, layer by layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSet {
    layers: Vec<Layer>,
}

impl ParamSet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layers"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: bias length {} but {} outputs",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.in_dim(),
                    i - 1,
                    layers[i - 1].out_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(topology: &Topology) -> Self {
        let layers = topology
            .layer_dims
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn scalar_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Every scalar, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .as_slice()
                .iter()
                .chain(l.bias.iter())
                .copied()
        })
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.shape() == b.weights.shape() && a.bias.len() == b.bias.len())
    }

    pub fn matches(&self, topology: &Topology) -> bool {
        self.layers.len() + 1 == topology.layer_dims.len()
            && self.layers.iter().enumerate().all(|(i, l)| {
                l.in_dim() == topology.layer_dims[i] && l.out_dim() == topology.layer_dims[i + 1]
            })
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// First position where the two sets differ bit-wise, as
    /// `(layer, "weights" | "bias", flat index)`.
    pub fn first_difference(&self, other: &ParamSet) -> Option<(usize, &'static str, usize)> {
        if !self.same_shape(other) {
            return Some((0, "shape", 0));
        }
        for (li, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            let w = a.weights.as_slice().iter().zip(b.weights.as_slice());
            if let Some(i) = w.clone().position(|(x, y)| x.to_bits() != y.to_bits()) {
                return Some((li, "weights", i));
            }
            if let Some(i) = a
                .bias
                .iter()
                .zip(&b.bias)
                .position(|(x, y)| x.to_bits() != y.to_bits())
            {
                return Some((li, "bias", i));
            }
        }
        None
    }

    pub fn bit_eq(&self, other: &ParamSet) -> bool {
        self.first_difference(other).is_none()
    }
}

/// Gradient of the loss with respect to every entry of a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradSet(ParamSet);

impl GradSet {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self(ParamSet {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        })
    }

    pub fn into_inner(self) -> ParamSet {
        self.0
    }
}

impl Deref for GradSet {
    type Target = ParamSet;

    fn deref(&self) -> &ParamSet {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Dropout active; masks come from the caller's stream.
    Train { dropout_rate: f64 },
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for LocalTraining {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.01,
        }
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(topology: &Topology, rng: &mut RngStream) -> ParamSet {
    let mut params = ParamSet::zeros(topology);
    for layer in &mut params.layers {
        let limit = libm::sqrt(6.0 / (layer.in_dim() + layer.out_dim()) as f64);
        for w in layer.weights.as_mut_slice() {
            *w = rng.uniform(-limit, limit);
        }
    }
    params
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Four independent partial sums; a single accumulator serializes on add
/// latency.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4 * 4;
    for (x, y) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-sample activations kept for the backward pass.
struct Trace {
    /// Input to each layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Dropout multiplier of each hidden unit (0 or 1/(1-p)); empty when off.
    masks: Vec<Vec<f64>>,
    logit: f64,
}

impl Trace {
    fn new(params: &ParamSet) -> Self {
        let n = params.layers.len();
        Self {
            inputs: params.layers.iter().map(|l| vec![0.0; l.in_dim()]).collect(),
            pre: params.layers[..n - 1]
                .iter()
                .map(|l| vec![0.0; l.out_dim()])
                .collect(),
            masks: params.layers[..n - 1]
                .iter()
                .map(|l| vec![1.0; l.out_dim()])
                .collect(),
            logit: 0.0,
        }
    }

    /// Runs one sample through the network, returning the logit.
    fn run(&mut self, params: &ParamSet, x: &[f64], dropout: Option<(f64, &mut RngStream)>) -> f64 {
        let last = params.layers.len() - 1;
        self.inputs[0].copy_from_slice(x);
        let (rate, mut rng) = match dropout {
            Some((p, rng)) if p > 0.0 => (p, Some(rng)),
            _ => (0.0, None),
        };
        let keep_scale = 1.0 / (1.0 - rate);
        for (li, layer) in params.layers.iter().enumerate() {
            if li == last {
                self.logit = dot(layer.weights.row(0), &self.inputs[li]) + layer.bias[0];
                break;
            }
            let (head, tail) = self.inputs.split_at_mut(li + 1);
            let input = &head[li];
            let next = &mut tail[0];
            let pre = &mut self.pre[li];
            let mask = &mut self.masks[li];
            for j in 0..layer.out_dim() {
                let z = dot(layer.weights.row(j), input) + layer.bias[j];
                pre[j] = z;
                let m = match rng.as_deref_mut() {
                    Some(r) => {
                        if r.next_f64() < rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    }
                    None => 1.0,
                };
                mask[j] = m;
                next[j] = if z > 0.0 { z * m } else { 0.0 };
            }
        }
        self.logit
    }
}

fn check_input(params: &ParamSet, features: &Matrix) -> Result<()> {
    if features.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} columns, network expects {}",
            features.cols(),
            params.input_dim()
        )));
    }
    if params.output_dim() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "network has {} outputs, expected 1",
            params.output_dim()
        )));
    }
    Ok(())
}

/// One clamped probability per row. In eval mode `rng` is left untouched.
pub fn forward(
    params: &ParamSet,
    features: &Matrix,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_input(params, features)?;
    let mut trace = Trace::new(params);
    let mut out = Vec::with_capacity(features.rows());
    for r in 0..features.rows() {
        let dropout = match mode {
            Mode::Train { dropout_rate } => Some((dropout_rate, &mut *rng)),
            Mode::Eval => None,
        };
        let z = trace.run(params, features.row(r), dropout);
        out.push(clamp_prob(sigmoid(z)));
    }
    Ok(out)
}

/// Eval-mode forward pass.
pub fn predict(params: &ParamSet, features: &Matrix) -> Result<Vec<f64>> {
    check_input(params, features)?;
    let mut trace = Trace::new(params);
    Ok((0..features.rows())
        .map(|r| clamp_prob(sigmoid(trace.run(params, features.row(r), None))))
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped to `[ε, 1-ε]`.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: probs.len(),
            actual: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::Empty("probabilities"));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y == 1 {
                -libm::log(p)
            } else {
                -libm::log(1.0 - p)
            }
        })
        .sum();
    let loss = total / probs.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("loss"))
    }
}

/// Mean BCE of `rows` and its gradient, accumulated into `grads` (which is
/// overwritten).
#[allow(clippy::too_many_arguments)]
fn backward_rows(
    params: &ParamSet,
    features: &Matrix,
    labels: &[u8],
    rows: &[usize],
    dropout_rate: f64,
    rng: &mut RngStream,
    trace: &mut Trace,
    deltas: &mut [Vec<f64>],
    grads: &mut ParamSet,
) -> f64 {
    for v in grads.values_mut() {
        *v = 0.0;
    }
    let scale = 1.0 / rows.len() as f64;
    let last = params.layers.len() - 1;
    let mut total = 0.0;
    for &r in rows {
        let z = trace.run(params, features.row(r), Some((dropout_rate, &mut *rng)));
        let p = sigmoid(z);
        let y = f64::from(labels[r]);
        let pc = clamp_prob(p);
        total += if labels[r] == 1 {
            -libm::log(pc)
        } else {
            -libm::log(1.0 - pc)
        };

        // dL/dz at the output for sigmoid + BCE.
        deltas[last][0] = (p - y) * scale;
        for li in (0..=last).rev() {
            let layer = &params.layers[li];
            let input = &trace.inputs[li];
            let (lower, upper) = deltas.split_at_mut(li);
            let delta = &upper[0];
            let g = &mut grads.layers[li];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[j] += d;
                for (gw, &a) in g.weights.row_mut(j).iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if li == 0 {
                break;
            }
            let prev = &mut lower[li - 1];
            for v in prev.iter_mut() {
                *v = 0.0;
            }
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (pv, &w) in prev.iter_mut().zip(layer.weights.row(j)) {
                    *pv += d * w;
                }
            }
            let pre = &trace.pre[li - 1];
            let mask = &trace.masks[li - 1];
            for ((pv, &z), &m) in prev.iter_mut().zip(pre).zip(mask) {
                *pv = if z > 0.0 { *pv * m } else { 0.0 };
            }
        }
    }
    total * scale
}

fn delta_buffers(params: &ParamSet) -> Vec<Vec<f64>> {
    params.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect()
}

/// Mean BCE over the batch and its analytic gradient. Dropout masks are drawn
/// from `rng` in row order, unit order.
pub fn backward(
    params: &ParamSet,
    features: &Matrix,
    labels: &[u8],
    dropout_rate: f64,
    rng: &mut RngStream,
) -> Result<(f64, GradSet)> {
    check_input(params, features)?;
    if labels.len() != features.rows() {
        return Err(Error::LengthMismatch {
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let rows: Vec<usize> = (0..labels.len()).collect();
    let mut grads = GradSet::zeros_like(params);
    let mut trace = Trace::new(params);
    let mut deltas = delta_buffers(params);
    let loss = backward_rows(
        params,
        features,
        labels,
        &rows,
        dropout_rate,
        rng,
        &mut trace,
        &mut deltas,
        &mut grads.0,
    );
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((loss, grads))
}

/// Mini-batch SGD for `hyper.epochs` passes, reshuffling every epoch.
pub fn train_local(
    params: &ParamSet,
    data: &Dataset,
    hyper: &LocalTraining,
    dropout_rate: f64,
    rng: &mut RngStream,
) -> Result<ParamSet> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if hyper.batch_size == 0 {
        return Err(Error::InvalidParameter {
            name: "batch_size",
            reason: "must be positive".into(),
        });
    }
    if !hyper.learning_rate.is_finite() || hyper.learning_rate < 0.0 {
        return Err(Error::InvalidParameter {
            name: "learning_rate",
            reason: format!("{} is not a finite non-negative number", hyper.learning_rate),
        });
    }
    check_input(params, &data.features)?;

    let mut current = params.clone();
    let mut grads = GradSet::zeros_like(params).into_inner();
    let mut trace = Trace::new(params);
    let mut deltas = delta_buffers(params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = hyper.learning_rate;

    for epoch in 0..hyper.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let loss = backward_rows(
                &current,
                &data.features,
                &data.labels,
                batch,
                dropout_rate,
                rng,
                &mut trace,
                &mut deltas,
                &mut grads,
            );
            epoch_loss += loss;
            for (p, g) in current.values_mut().zip(grads.values()) {
                *p -= lr * g;
            }
        }
        if !epoch_loss.is_finite() || !current.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1 });
        }
    }
    Ok(current)
}
