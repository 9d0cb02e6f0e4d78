//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Every network in the controller (actor, critic parts, forward model,
//! inverse model) is an [`Mlp`]: a stack of affine layers, each followed by
//! an element-wise activation, with a constant multiplier on the final
//! activation. Batches are row-major `(batch, features)` matrices.
//!
//! Optimizer state (Adam moments and step counter) lives inside the network
//! so that a learner only needs to carry its [`AdamConfig`].

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic prefix of the checkpoint format. The trailing digit is the version.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"APACNN1\0";

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Sigmoid),
            3 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`, given the activated value `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    /// Canonical moment decay rates with the given step size and L2 decay.
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(NnError::InvalidInput("learning rate must be > 0".into()));
        }
        if !(0.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
            return Err(NnError::InvalidInput(
                "Adam betas must satisfy 0 < beta1 < beta2 < 1".into(),
            ));
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(NnError::InvalidInput(
                "epsilon must be > 0 and weight decay >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Divisors applied to raw environment quantities before they enter a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    /// Centimetres per unit of network input.
    pub position: f64,
    /// Degrees per unit of network input.
    pub angle: f64,
    /// Subtracted from positions before dividing.
    #[serde(default)]
    pub position_offset: f64,
}

impl InputScaling {
    pub const IDENTITY: InputScaling = InputScaling {
        position: 1.0,
        angle: 1.0,
        position_offset: 0.0,
    };

    pub fn position(&self, v: f64) -> f64 {
        (v - self.position_offset) / self.position
    }
}

impl Default for InputScaling {
    fn default() -> Self {
        Self {
            position: 30.0,
            angle: 180.0,
            position_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// Shape `(out, in)`.
    weights: Array2<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

impl Moments {
    fn zeros_like(layer: &Dense) -> Self {
        Self {
            m_w: Array2::zeros(layer.weights.raw_dim()),
            v_w: Array2::zeros(layer.weights.raw_dim()),
            m_b: Array1::zeros(layer.biases.raw_dim()),
            v_b: Array1::zeros(layer.biases.raw_dim()),
        }
    }
}

/// Parameter gradients, one entry per layer, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// Flattened view in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output_scale: f64,
    moments: Vec<Moments>,
    adam_steps: u64,
}

impl Mlp {
    /// Builds a network with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(
        layer_dims: &[usize],
        activations: &[Activation],
        output_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, activations, output_scale)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.weights.ncols() as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer
                .biases
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    /// Builds a network with every parameter set to zero.
    pub fn zeros(
        layer_dims: &[usize],
        activations: &[Activation],
        output_scale: f64,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(NnError::InvalidInput(
                "a network needs an input and at least one layer".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(NnError::InvalidInput(
                "layer dimensions must be positive".into(),
            ));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(NnError::InvalidInput(format!(
                "{} activations given for {} layers",
                activations.len(),
                layer_dims.len() - 1
            )));
        }
        if !(output_scale > 0.0) || !output_scale.is_finite() {
            return Err(NnError::InvalidInput(
                "output scale must be positive".into(),
            ));
        }
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(dims, &activation)| Dense {
                weights: Array2::zeros((dims[1], dims[0])),
                biases: Array1::zeros(dims[1]),
                activation,
            })
            .collect::<Vec<_>>();
        let moments = layers.iter().map(Moments::zeros_like).collect();
        Ok(Self {
            layers,
            output_scale,
            moments,
            adam_steps: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weights.nrows()))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        self.layers[layer].weights.view()
    }

    pub fn biases(&self, layer: usize) -> ArrayView1<'_, f64> {
        self.layers[layer].biases.view()
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.layers[layer].weights
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.layers[layer].biases
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All parameters flattened layer by layer (weights row-major, then biases).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.biases.iter().copied());
        }
        out
    }

    /// Overwrites all parameters from a flat vector in [`Mlp::parameters`] order.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(NnError::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.layer_dims() == other.layer_dims()
            && self.activations() == other.activations()
            && self.output_scale == other.output_scale
    }

    /// Evaluates the network on a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(NnError::InvalidInput(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector shape");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch(inputs)?;
        let mut x = inputs.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.biases;
            let act = layer.activation;
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        if self.output_scale != 1.0 {
            x *= self.output_scale;
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate needed by [`Mlp::backward`].
    pub fn forward_trace(&self, inputs: ArrayView2<'_, f64>) -> Result<Trace> {
        self.check_batch(inputs)?;
        let n = self.layers.len();
        let mut layer_inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n);
        let mut x = inputs.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.biases;
            let act = layer.activation;
            let y = z.mapv(|v| act.apply(v));
            layer_inputs.push(x);
            pre.push(z);
            x = y.clone();
            post.push(y);
        }
        let output = &x * self.output_scale;
        Ok(Trace {
            inputs: layer_inputs,
            pre,
            post,
            output,
        })
    }

    /// Backpropagates `d_output` (gradient of some scalar objective with
    /// respect to the network outputs, one row per sample) and returns the
    /// parameter gradients together with the gradient with respect to the
    /// network inputs.
    pub fn backward(
        &self,
        trace: &Trace,
        d_output: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (grads, d_input) = self.backprop(trace, d_output, true)?;
        Ok((grads.expect("parameter gradients requested"), d_input))
    }

    /// Like [`Mlp::backward`] but only returns the input gradient.
    pub fn backward_input(
        &self,
        trace: &Trace,
        d_output: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        Ok(self.backprop(trace, d_output, false)?.1)
    }

    fn backprop(
        &self,
        trace: &Trace,
        d_output: ArrayView2<'_, f64>,
        with_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        if d_output.dim() != trace.output.dim() {
            return Err(NnError::InvalidInput(format!(
                "output gradient shape {:?} does not match output shape {:?}",
                d_output.dim(),
                trace.output.dim()
            )));
        }
        let n = self.layers.len();
        let mut grad_w = Vec::with_capacity(n);
        let mut grad_b = Vec::with_capacity(n);
        let mut delta = &d_output * self.output_scale;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            Zip::from(&mut delta)
                .and(&trace.pre[idx])
                .and(&trace.post[idx])
                .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            if with_params {
                grad_w.push(delta.t().dot(&trace.inputs[idx]));
                grad_b.push(delta.sum_axis(Axis(0)));
            }
            delta = delta.dot(&layer.weights);
        }
        if !with_params {
            return Ok((None, delta));
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            Some(Gradients {
                weights: grad_w,
                biases: grad_b,
            }),
            delta,
        ))
    }

    /// Mean squared error `(1/N) Σ‖target − output‖²` and its gradients,
    /// without modifying the network.
    pub fn mse_gradients(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
    ) -> Result<(f64, Gradients, Array2<f64>)> {
        if inputs.nrows() == 0 {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        if targets.nrows() != inputs.nrows() || targets.ncols() != self.output_dim() {
            return Err(NnError::InvalidInput(format!(
                "targets shape {:?} does not match batch of {} with {} outputs",
                targets.dim(),
                inputs.nrows(),
                self.output_dim()
            )));
        }
        let trace = self.forward_trace(inputs)?;
        let n = inputs.nrows() as f64;
        let residual = trace.output() - &targets;
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / n;
        let d_output = residual * (2.0 / n);
        let (grads, d_input) = self.backward(&trace, d_output.view())?;
        Ok((loss, grads, d_input))
    }

    /// One Adam step on the mean squared error. Returns the pre-update loss.
    pub fn train_step(
        &mut self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        cfg: &AdamConfig,
    ) -> Result<f64> {
        let (loss, grads, _) = self.mse_gradients(inputs, targets)?;
        self.apply_gradients(&grads, cfg)?;
        Ok(loss)
    }

    /// Gradient of output `output_index` with respect to the full input vector.
    pub fn input_gradient(&self, input: &[f64], output_index: usize) -> Result<Vec<f64>> {
        if output_index >= self.output_dim() {
            return Err(NnError::InvalidInput(format!(
                "output index {output_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if input.len() != self.input_dim() {
            return Err(NnError::InvalidInput(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector shape");
        let trace = self.forward_trace(x)?;
        let mut d_output = Array2::zeros((1, self.output_dim()));
        d_output[[0, output_index]] = 1.0;
        let (_, d_input) = self.backward(&trace, d_output.view())?;
        Ok(d_input.into_raw_vec_and_offset().0)
    }

    /// Applies one Adam update; `cfg.weight_decay · θ` is added to each gradient.
    pub fn apply_gradients(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        if grads.weights.len() != self.layers.len()
            || grads
                .weights
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.dim() != l.weights.dim())
            || grads
                .biases
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.dim() != l.biases.dim())
        {
            return Err(NnError::InvalidInput(
                "gradient shapes do not match network".into(),
            ));
        }
        self.adam_steps += 1;
        let t = self.adam_steps as i32;
        let step = AdamStep {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            decay: cfg.weight_decay,
            bias1: 1.0 - cfg.beta1.powi(t),
            bias2: 1.0 - cfg.beta2.powi(t),
        };
        for ((layer, mom), (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(&mut self.moments)
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            Zip::from(&mut layer.weights)
                .and(&mut mom.m_w)
                .and(&mut mom.v_w)
                .and(gw)
                .for_each(|p, m, v, &g| step.update(p, m, v, g));
            Zip::from(&mut layer.biases)
                .and(&mut mom.m_b)
                .and(&mut mom.v_b)
                .and(gb)
                .for_each(|p, m, v, &g| step.update(p, m, v, g));
        }
        Ok(())
    }

    /// `self ← self·(1−τ) + main·τ` for every parameter. Optimizer state is untouched.
    pub fn soft_update_from(&mut self, main: &Mlp, tau: f64) -> Result<()> {
        if !self.same_architecture(main) {
            return Err(NnError::InvalidInput(
                "soft update between different architectures".into(),
            ));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(NnError::InvalidInput(format!("tau {tau} outside [0, 1]")));
        }
        for (t, m) in self.layers.iter_mut().zip(&main.layers) {
            Zip::from(&mut t.weights)
                .and(&m.weights)
                .for_each(|a, &b| *a = *a * (1.0 - tau) + b * tau);
            Zip::from(&mut t.biases)
                .and(&m.biases)
                .for_each(|a, &b| *a = *a * (1.0 - tau) + b * tau);
        }
        Ok(())
    }

    /// Copy of the parameters with fresh optimizer state.
    pub fn clone_parameters(&self) -> Mlp {
        let mut copy = self.clone();
        copy.reset_optimizer();
        copy
    }

    pub fn reset_optimizer(&mut self) {
        self.moments = self.layers.iter().map(Moments::zeros_like).collect();
        self.adam_steps = 0;
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            let (rows, cols) = layer.weights.dim();
            out.write_all(&(rows as u32).to_le_bytes())?;
            out.write_all(&(cols as u32).to_le_bytes())?;
            out.write_all(&[layer.activation.tag()])?;
            // `iter` walks logical row-major order regardless of memory layout.
            for w in layer.weights.iter() {
                out.write_all(&w.to_le_bytes())?;
            }
            for b in layer.biases.iter() {
                out.write_all(&b.to_le_bytes())?;
            }
        }
        out.write_all(&self.output_scale.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Mlp> {
        let mut magic = [0u8; 8];
        read_exact(input, &mut magic)?;
        if &magic[..6] != b"APACNN" || magic[7] != 0 {
            return Err(NnError::Format("bad magic".into()));
        }
        if magic != *CHECKPOINT_MAGIC {
            return Err(NnError::Format(format!(
                "unsupported checkpoint version {:?}",
                magic[6] as char
            )));
        }
        let n_layers = read_u32(input)? as usize;
        if n_layers == 0 {
            return Err(NnError::Format("zero layers".into()));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for idx in 0..n_layers {
            let rows = read_u32(input)? as usize;
            let cols = read_u32(input)? as usize;
            if rows == 0 || cols == 0 {
                return Err(NnError::Format(format!("layer {idx} has a zero dimension")));
            }
            if let Some(prev) = layers.last().map(|l: &Dense| l.weights.nrows()) {
                if prev != cols {
                    return Err(NnError::Format(format!(
                        "layer {idx} expects {cols} inputs but previous layer has {prev} outputs"
                    )));
                }
            }
            let mut tag = [0u8; 1];
            read_exact(input, &mut tag)?;
            let activation = Activation::from_tag(tag[0])
                .ok_or_else(|| NnError::Format(format!("unknown activation tag {}", tag[0])))?;
            let weights = (0..rows * cols)
                .map(|_| read_f64(input))
                .collect::<Result<Vec<_>>>()?;
            let biases = (0..rows)
                .map(|_| read_f64(input))
                .collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((rows, cols), weights)
                    .expect("length matches rows*cols"),
                biases: Array1::from_vec(biases),
                activation,
            });
        }
        let output_scale = read_f64(input)?;
        if !(output_scale > 0.0) || !output_scale.is_finite() {
            return Err(NnError::Format(format!(
                "invalid output scale {output_scale}"
            )));
        }
        let moments = layers.iter().map(Moments::zeros_like).collect();
        Ok(Mlp {
            layers,
            output_scale,
            moments,
            adam_steps: 0,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses exactly one network; trailing bytes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Mlp> {
        let mut cursor = bytes;
        let net = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(NnError::Format(format!("{} trailing bytes", cursor.len())));
        }
        Ok(net)
    }

    fn check_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(NnError::InvalidInput(format!(
                "batch has {} features, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// `target ← target·(1−τ) + main·τ`.
pub fn soft_update(target: &mut Mlp, main: &Mlp, tau: f64) -> Result<()> {
    target.soft_update_from(main, tau)
}

struct AdamStep {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    decay: f64,
    bias1: f64,
    bias2: f64,
}

impl AdamStep {
    #[inline]
    fn update(&self, p: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        let g = g + self.decay * *p;
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / self.bias1;
        let v_hat = *v / self.bias2;
        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NnError::Format("truncated checkpoint".into()),
        _ => NnError::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(input, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
