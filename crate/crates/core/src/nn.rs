//! Dense feedforward network: forward pass, MSE loss, and exact analytic
//! backpropagation.
//!
//! The architecture is deliberately small: ordered dense layers, each an
//! affine map followed by an elementwise activation (Leaky ReLU on hidden
//! layers, identity on the output layer). Forward caches every layer's
//! pre- and post-activation vectors in a [`ForwardTrace`] so backward can
//! run the chain rule without recomputation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Negative-branch slope of the Leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Leaky ReLU: `max(0.01 * x, x)`.
pub fn leaky_relu(x: f64) -> f64 {
    (LEAKY_SLOPE * x).max(x)
}

/// Subgradient of the Leaky ReLU. At exactly zero the negative-branch slope
/// is used, so the derivative is deterministic everywhere.
pub fn leaky_relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Elementwise activation attached to a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Identity,
}

impl Activation {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => leaky_relu(x),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => leaky_relu_derivative(x),
            Activation::Identity => 1.0,
        }
    }
}

/// Shape and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// One dense layer: weights are row-major `(out_dim, in_dim)`, one bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Matrix,
    pub bias: Vector,
}

/// Ordered dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Per-layer pre-activation (`z`) and post-activation (`a`) vectors cached by
/// [`Network::forward`], plus the input that produced them.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vector,
    pub pre: Vec<Vector>,
    pub post: Vec<Vector>,
}

/// Per-layer parameter gradients, shape-congruent with the owning [`Network`].
/// Also reused as the storage layout for optimizer moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<GradientLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientLayer {
    pub weights: Matrix,
    pub bias: Vector,
}

impl Gradients {
    /// All-zero gradients with the same shape as `net`.
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| GradientLayer {
                weights: Matrix::zeros(l.spec.out_dim, l.spec.in_dim),
                bias: Vector::zeros(l.spec.out_dim),
            })
            .collect();
        Self { layers }
    }

    pub fn shape_matches(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.same_shape(&l.weights) && g.bias.len() == l.bias.len())
    }
}

impl Network {
    /// Builds a network from explicit layers, checking that adjacent layers chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    /// Seeded Glorot-uniform initialization: weights drawn uniformly from
    /// `[-sqrt(6/(in+out)), +sqrt(6/(in+out))]` per layer, biases zero.
    /// The same seed always produces a bitwise-identical network.
    pub fn init_weights(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config(
                "cannot initialize a network from an empty layer list".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            if spec.in_dim == 0 || spec.out_dim == 0 {
                return Err(Error::Config(format!(
                    "layer dimensions must be at least 1, got {}->{}",
                    spec.in_dim, spec.out_dim
                )));
            }
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let data = (0..spec.in_dim * spec.out_dim)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            layers.push(Layer {
                spec: *spec,
                weights: Matrix::from_rows(spec.out_dim, spec.in_dim, data)?,
                bias: Vector::zeros(spec.out_dim),
            });
        }
        Self::from_layers(layers)
    }

    fn validate(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            let spec = layer.spec;
            if layer.weights.rows() != spec.out_dim || layer.weights.cols() != spec.in_dim {
                return Err(Error::Shape(format!(
                    "layer {i}: weights are {}x{} but its spec says {}x{}",
                    layer.weights.rows(),
                    layer.weights.cols(),
                    spec.out_dim,
                    spec.in_dim
                )));
            }
            if layer.bias.len() != spec.out_dim {
                return Err(Error::Shape(format!(
                    "layer {i}: bias has length {} but its spec says {}",
                    layer.bias.len(),
                    spec.out_dim
                )));
            }
            if i > 0 && self.layers[i - 1].spec.out_dim != spec.in_dim {
                return Err(Error::Shape(format!(
                    "layer {} out_dim {} does not chain into layer {i} in_dim {}",
                    i - 1,
                    self.layers[i - 1].spec.out_dim,
                    spec.in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Number of trainable parameters: per layer `in_dim * out_dim + out_dim`.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spec.in_dim * l.spec.out_dim + l.spec.out_dim)
            .sum()
    }

    /// Forward pass. Returns the final activation and the full trace needed
    /// by [`Network::backward`].
    pub fn forward(&self, input: &Vector) -> Result<(Vector, ForwardTrace)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "forward: input has length {} but the first layer expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let z = crate::linalg::affine(&layer.weights, &current, &layer.bias)?;
            let a = Vector::new(
                z.as_slice()
                    .iter()
                    .map(|&x| layer.spec.activation.value(x))
                    .collect(),
            );
            pre.push(z);
            current = a.clone();
            post.push(a);
        }
        let trace = ForwardTrace {
            input: input.clone(),
            pre,
            post,
        };
        Ok((current, trace))
    }

    /// Exact analytic gradients of a scalar loss with respect to every weight
    /// and bias, given the upstream gradient of the loss at the output.
    pub fn backward(&self, trace: &ForwardTrace, grad_wrt_output: &Vector) -> Result<Gradients> {
        self.check_trace(trace)?;
        if grad_wrt_output.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "backward: output gradient has length {} but the network emits {}",
                grad_wrt_output.len(),
                self.output_dim()
            )));
        }

        let n_layers = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_wrt_output.clone();

        for t in (0..n_layers).rev() {
            let layer = &self.layers[t];
            let z = &trace.pre[t];
            // dL/dz = dL/da * act'(z)
            for i in 0..delta.len() {
                delta[i] *= layer.spec.activation.derivative(z[i]);
            }

            let prev_activation = if t == 0 {
                &trace.input
            } else {
                &trace.post[t - 1]
            };
            let grad_layer = &mut grads.layers[t];
            for r in 0..layer.spec.out_dim {
                grad_layer.bias[r] = delta[r];
                for c in 0..layer.spec.in_dim {
                    grad_layer.weights.set(r, c, delta[r] * prev_activation[c]);
                }
            }

            if t > 0 {
                // dL/da_prev = W^T delta
                let mut next_delta = Vector::zeros(layer.spec.in_dim);
                for r in 0..layer.spec.out_dim {
                    let row = layer.weights.row(r);
                    for c in 0..layer.spec.in_dim {
                        next_delta[c] += row[c] * delta[r];
                    }
                }
                delta = next_delta;
            }
        }
        Ok(grads)
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        if trace.pre.len() != self.layers.len() || trace.post.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "trace caches {} layers but the network has {}",
                trace.pre.len(),
                self.layers.len()
            )));
        }
        if trace.input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "trace input has length {} but the network expects {}",
                trace.input.len(),
                self.input_dim()
            )));
        }
        for (t, layer) in self.layers.iter().enumerate() {
            if trace.pre[t].len() != layer.spec.out_dim || trace.post[t].len() != layer.spec.out_dim
            {
                return Err(Error::Shape(format!(
                    "trace layer {t} has length {} but the layer emits {}",
                    trace.pre[t].len(),
                    layer.spec.out_dim
                )));
            }
        }
        Ok(())
    }

    /// Serializes to a JSON document carrying layer specs and row-major
    /// weight/bias arrays at full double precision, so a round-trip through
    /// [`Network::from_json`] is bitwise exact.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network JSON: {e}")))?;
        if net.layers.is_empty() {
            return Err(Error::Parse("network JSON lists no layers".into()));
        }
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Mean squared error and its gradient with respect to the prediction:
/// `loss = mean((pred - target)^2)`, `grad = 2/n * (pred - target)`.
pub fn mse_loss(pred: &Vector, target: &Vector) -> Result<(f64, Vector)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "mse_loss: prediction has length {} but target has length {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vector::zeros(pred.len());
    for i in 0..pred.len() {
        let d = pred[i] - target[i];
        loss += d * d;
        grad[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}
