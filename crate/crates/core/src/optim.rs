//! Optimizers and the finite-difference gradient oracle.
//!
//! The main optimizer keeps per-parameter first/second moment estimates with
//! bias correction and a Nesterov-style lookahead on the momentum term:
//!
//! ```text
//! m   <- b1*m + (1-b1)*g          v    <- b2*v + (1-b2)*g^2
//! m^  =  m / (1 - b1^t)           v^   =  v / (1 - b2^t)
//! w   <- w - eta/(sqrt(v^) + eps) * (b1*m^ + (1-b1)*g / (1 - b1^t))
//! ```
//!
//! A plain SGD step is kept around for debugging, and
//! [`finite_difference_grad`] provides the independent oracle the analytic
//! backward pass is checked against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::nn::{mse_loss, Gradients, LayerSpec, Network};

/// Optimizer hyperparameters. Defaults: `eta=0.002`, `beta1=0.9`,
/// `beta2=0.999`, `epsilon=1e-8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamHyper {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamHyper {
    fn default() -> Self {
        Self {
            eta: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl NadamHyper {
    pub fn validate(&self) -> Result<()> {
        if self.eta.is_nan() || self.eta <= 0.0 || self.eta.is_infinite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.eta
            )));
        }
        for (name, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if value.is_nan() || value <= 0.0 || value >= 1.0 {
                return Err(Error::Config(format!(
                    "{name} must lie in (0, 1), got {value}"
                )));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-parameter moment accumulators plus the step counter. `m` and `v`
/// mirror the shape of the network's [`Gradients`]; both start at zero and
/// `t` increments by exactly one per step.
#[derive(Debug, Clone)]
pub struct NadamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl NadamState {
    pub fn for_network(net: &Network) -> Self {
        Self {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
        }
    }
}

/// One optimizer step over every parameter of `net`.
///
/// The step counter is 1-based inside the update (the first call uses `t=1`),
/// so the bias-correction denominators never vanish.
pub fn nadam_step(
    net: &mut Network,
    grads: &Gradients,
    state: &mut NadamState,
    hyper: &NadamHyper,
) -> Result<()> {
    if !grads.shape_matches(net) || !state.m.shape_matches(net) || !state.v.shape_matches(net) {
        return Err(Error::Shape(
            "nadam_step: gradient or state shape does not mirror the network".into(),
        ));
    }
    for (i, g) in grads.layers.iter().enumerate() {
        let finite = g.weights.as_slice().iter().all(|x| x.is_finite())
            && g.bias.as_slice().iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Numeric(format!(
                "nadam_step: non-finite gradient in layer {i}"
            )));
        }
    }

    let t = state.t + 1;
    let bias1 = 1.0 - hyper.beta1.powi(t as i32);
    let bias2 = 1.0 - hyper.beta2.powi(t as i32);

    for (layer_idx, layer) in net.layers_mut().iter_mut().enumerate() {
        let gl = &grads.layers[layer_idx];
        let ml = &mut state.m.layers[layer_idx];
        let vl = &mut state.v.layers[layer_idx];

        let weights = layer.weights.as_mut_slice();
        for (((w, &g), m), v) in weights
            .iter_mut()
            .zip(gl.weights.as_slice())
            .zip(ml.weights.as_mut_slice())
            .zip(vl.weights.as_mut_slice())
        {
            *w -= nadam_update(g, m, v, hyper, bias1, bias2);
        }
        let biases = layer.bias.as_mut_slice();
        for (((b, &g), m), v) in biases
            .iter_mut()
            .zip(gl.bias.as_slice())
            .zip(ml.bias.as_mut_slice())
            .zip(vl.bias.as_mut_slice())
        {
            *b -= nadam_update(g, m, v, hyper, bias1, bias2);
        }
    }
    state.t = t;
    Ok(())
}

#[inline]
fn nadam_update(
    g: f64,
    m: &mut f64,
    v: &mut f64,
    hyper: &NadamHyper,
    bias1: f64,
    bias2: f64,
) -> f64 {
    *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
    *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
    let m_hat = *m / bias1;
    let v_hat = *v / bias2;
    hyper.eta / (v_hat.sqrt() + hyper.epsilon)
        * (hyper.beta1 * m_hat + (1.0 - hyper.beta1) * g / bias1)
}

/// Plain gradient descent: `w <- w - eta * g` per parameter.
pub fn sgd_step(net: &mut Network, grads: &Gradients, eta: f64) -> Result<()> {
    if !grads.shape_matches(net) {
        return Err(Error::Shape(
            "sgd_step: gradient shape does not mirror the network".into(),
        ));
    }
    for (layer, gl) in net.layers_mut().iter_mut().zip(&grads.layers) {
        for (w, &g) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(gl.weights.as_slice())
        {
            *w -= eta * g;
        }
        for (b, &g) in layer.bias.as_mut_slice().iter_mut().zip(gl.bias.as_slice()) {
            *b -= eta * g;
        }
    }
    Ok(())
}

/// Central finite differences of the MSE loss with respect to every
/// parameter: `(loss(p + h) - loss(p - h)) / (2h)`.
///
/// This is the independent oracle for [`Network::backward`]; it only uses the
/// forward pass and the loss.
pub fn finite_difference_grad(
    net: &Network,
    input: &Vector,
    target: &Vector,
    h: f64,
) -> Result<Gradients> {
    if h <= 0.0 {
        return Err(Error::Config(format!(
            "step size must be positive, got {h}"
        )));
    }
    let mut work = net.clone();
    let mut grads = Gradients::zeros_like(net);
    let n_layers = net.layers().len();

    let loss_at = |net: &Network| -> Result<f64> {
        let (out, _) = net.forward(input)?;
        let (loss, _) = mse_loss(&out, target)?;
        Ok(loss)
    };

    for t in 0..n_layers {
        let n_weights = net.layers()[t].weights.as_slice().len();
        for p in 0..n_weights {
            let orig = work.layers()[t].weights.as_slice()[p];
            work.layers_mut()[t].weights.as_mut_slice()[p] = orig + h;
            let plus = loss_at(&work)?;
            work.layers_mut()[t].weights.as_mut_slice()[p] = orig - h;
            let minus = loss_at(&work)?;
            work.layers_mut()[t].weights.as_mut_slice()[p] = orig;
            grads.layers[t].weights.as_mut_slice()[p] = (plus - minus) / (2.0 * h);
        }
        let n_bias = net.layers()[t].bias.len();
        for p in 0..n_bias {
            let orig = work.layers()[t].bias[p];
            work.layers_mut()[t].bias[p] = orig + h;
            let plus = loss_at(&work)?;
            work.layers_mut()[t].bias[p] = orig - h;
            let minus = loss_at(&work)?;
            work.layers_mut()[t].bias[p] = orig;
            grads.layers[t].bias[p] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub trials: usize,
    pub params_checked: usize,
}

/// Compares analytic backpropagation against central finite differences on
/// seeded random networks.
///
/// Inputs are redrawn until every pre-activation magnitude clears
/// `z_floor`, keeping the finite-difference probe away from the activation
/// kink. The error per parameter is `|a - f| / max(|a|, |f|, 1e-4)`: relative
/// for healthy gradients, absolute (scaled by 1e4) for gradients so small
/// that central differences are dominated by cancellation noise.
pub fn gradient_check(
    specs: &[LayerSpec],
    seed: u64,
    trials: usize,
    h: f64,
    z_floor: f64,
) -> Result<GradCheckReport> {
    let mut max_rel_err: f64 = 0.0;
    let mut params_checked = 0;

    for trial in 0..trials {
        let net = Network::init_weights(specs, seed.wrapping_add(trial as u64))?;
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(trial as u64 + 1)),
        );

        // Keep pre-activations away from the kink so the central difference
        // stays on one linear branch.
        let mut input = None;
        for _ in 0..200 {
            let candidate = Vector::new(
                (0..net.input_dim())
                    .map(|_| {
                        let magnitude = rng.random_range(0.5..1.5);
                        if rng.random_bool(0.5) {
                            magnitude
                        } else {
                            -magnitude
                        }
                    })
                    .collect(),
            );
            let (_, trace) = net.forward(&candidate)?;
            let clear = trace
                .pre
                .iter()
                .all(|z| z.as_slice().iter().all(|&x| x.abs() >= z_floor));
            if clear {
                input = Some(candidate);
                break;
            }
        }
        let input = input.ok_or_else(|| {
            Error::Numeric(format!(
                "gradient check trial {trial}: no input kept pre-activations away from zero"
            ))
        })?;
        let target = Vector::new(
            (0..net.output_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );

        let (out, trace) = net.forward(&input)?;
        let (_, loss_grad) = mse_loss(&out, &target)?;
        let analytic = net.backward(&trace, &loss_grad)?;
        let numeric = finite_difference_grad(&net, &input, &target, h)?;

        for (al, nl) in analytic.layers.iter().zip(&numeric.layers) {
            let pairs = al
                .weights
                .as_slice()
                .iter()
                .zip(nl.weights.as_slice())
                .chain(al.bias.as_slice().iter().zip(nl.bias.as_slice()));
            for (&a, &f) in pairs {
                params_checked += 1;
                let scale = a.abs().max(f.abs()).max(1e-4);
                max_rel_err = max_rel_err.max((a - f).abs() / scale);
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_err,
        trials,
        params_checked,
    })
}
