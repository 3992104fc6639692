//! Feedforward approximator with value, input-gradient and input
//! second-derivative outputs.
//!
//! Layers follow `z₀ = x`, `zₗ = g(zₗ₋₁) Wₗ + bₗ` with `g` the identity on the
//! input and softplus on hidden layers; the output `z_L` is a scalar.

pub mod loss;
pub mod normalize;
pub mod optim;
pub mod snapshot;
pub mod train;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::rng::RngStream;

pub use loss::{loss, parameter_gradient, Batch, LossWeights};
pub use normalize::Normalizer;
pub use optim::{adam_step, cosine_lr, AdamState};
pub use train::{train, DeltaWeighting, TrainConfig, TrainedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl NetworkConfig {
    pub fn new(input_dim: usize) -> Self {
        Self { input_dim, hidden_layers: 4, hidden_units: 20 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_units == 0 {
            return Err(DmlError::Config(format!(
                "network needs input_dim, hidden_layers and hidden_units >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Widths `input_dim, hidden_units × hidden_layers, 1`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(std::iter::repeat_n(self.hidden_units, self.hidden_layers));
        w.push(1);
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `fan_in × fan_out`, applied to row vectors.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    /// Uniform `±√(3/fan_in)` weights (unit-variance preserving) and zero biases.
    pub fn init(config: &NetworkConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (3.0 / fan_in as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_in, fan_out), |_| rng.uniform_in(-limit, limit));
                Layer { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer { weights: Array2::zeros(l.weights.raw_dim()), bias: Array1::zeros(l.bias.len()) })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every parameter, layer by layer, weights (row-major) before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(DmlError::InvalidInput(format!(
                "network takes {} inputs, got {len}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic function, the derivative of softplus.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pre-activations `z₀ … z_L` of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Activations {
    pub z: Vec<Array1<f64>>,
}

fn activate(layer_index: usize, z: &Array1<f64>) -> Array1<f64> {
    if layer_index == 0 {
        z.clone()
    } else {
        z.mapv(softplus)
    }
}

fn activation_slope(layer_index: usize, z: &Array1<f64>) -> Array1<f64> {
    if layer_index == 0 {
        Array1::ones(z.len())
    } else {
        z.mapv(logistic)
    }
}

pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<(f64, Activations)> {
    params.check_input(x.len())?;
    let mut z = vec![Array1::from(x.to_vec())];
    for (l, layer) in params.layers.iter().enumerate() {
        let a = activate(l, &z[l]);
        z.push(a.dot(&layer.weights) + &layer.bias);
    }
    let value = z.last().expect("at least one layer")[0];
    Ok((value, Activations { z }))
}

/// `∇ₓ f̂` by the adjoint recursion `z̄_L = 1`,
/// `z̄ₗ₋₁ = (z̄ₗ Wₗᵀ) ∘ g′(zₗ₋₁)`.
pub fn input_gradient(params: &NetworkParams, acts: &Activations) -> Vec<f64> {
    let mut adjoint = Array1::ones(1);
    for l in (0..params.depth()).rev() {
        let u = params.layers[l].weights.dot(&adjoint);
        adjoint = u * activation_slope(l, &acts.z[l]);
    }
    adjoint.to_vec()
}

/// `d²f̂/dx²` for a one-dimensional input, by differentiating the adjoint
/// recursion of [`input_gradient`] along the input direction.
pub fn input_second_derivative(params: &NetworkParams, x: f64) -> Result<f64> {
    if params.input_dim() != 1 {
        return Err(DmlError::InvalidInput(format!(
            "second derivative is only supported for one input, network has {}",
            params.input_dim()
        )));
    }
    let (_, acts) = forward(params, &[x])?;
    let depth = params.depth();
    // Tangents dzₗ/dx for l = 0 … L−1.
    let mut tangent = vec![Array1::ones(1)];
    for l in 0..depth - 1 {
        let t = (&tangent[l] * &activation_slope(l, &acts.z[l])).dot(&params.layers[l].weights);
        tangent.push(t);
    }
    let mut adjoint: Array1<f64> = Array1::ones(1);
    let mut adjoint_dot: Array1<f64> = Array1::zeros(1);
    for l in (0..depth).rev() {
        let w = &params.layers[l].weights;
        let u = w.dot(&adjoint);
        let u_dot = w.dot(&adjoint_dot);
        if l == 0 {
            adjoint_dot = u_dot;
            adjoint = u;
        } else {
            let z = &acts.z[l];
            let slope = z.mapv(logistic);
            let curve = z.mapv(|v| {
                let s = logistic(v);
                s * (1.0 - s)
            });
            adjoint_dot = &u_dot * &slope + &u * &curve * &tangent[l];
            adjoint = u * slope;
        }
    }
    Ok(adjoint_dot[0])
}

/// Value, input gradient and (for scalar inputs) second derivative at `x`.
pub fn predict(params: &NetworkParams, x: ArrayView1<f64>) -> Result<(f64, Vec<f64>, Option<f64>)> {
    let x = x.to_vec();
    let (value, acts) = forward(params, &x)?;
    let grad = input_gradient(params, &acts);
    let second = if x.len() == 1 { Some(input_second_derivative(params, x[0])?) } else { None };
    Ok((value, grad, second))
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::rng::{Purpose, StreamFactory};

    fn random_net(input_dim: usize, hidden_layers: usize, units: usize, seed: u64) -> NetworkParams {
        let cfg = NetworkConfig { input_dim, hidden_layers, hidden_units: units };
        let mut rng = StreamFactory::new(seed, 0).stream(Purpose::Init, 0);
        let mut p = NetworkParams::init(&cfg, &mut rng).unwrap();
        for b in p.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
            *b = rng.uniform_in(-0.5, 0.5);
        }
        p
    }

    fn unit_net() -> NetworkParams {
        NetworkParams {
            layers: vec![
                Layer { weights: array![[1.0]], bias: array![0.0] },
                Layer { weights: array![[1.0]], bias: array![0.0] },
            ],
        }
    }

    #[test]
    fn widths_chain() {
        assert_eq!(NetworkConfig::new(3).widths(), vec![3, 20, 20, 20, 20, 1]);
        let p = random_net(3, 2, 5, 1);
        assert_eq!(p.depth(), 3);
        assert_eq!(p.n_params(), 3 * 5 + 5 + 5 * 5 + 5 + 5 + 1);
        assert!(NetworkConfig { input_dim: 1, hidden_layers: 0, hidden_units: 3 }.validate().is_err());
    }

    #[test]
    fn softplus_helpers_are_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert_eq!(logistic(0.0), 0.5);
        assert_eq!(logistic(800.0), 1.0);
        assert!(logistic(-800.0) >= 0.0);
    }

    #[test]
    fn dead_network_outputs_last_bias() {
        let mut p = random_net(2, 2, 4, 3);
        for l in &mut p.layers {
            l.weights.fill(0.0);
        }
        let (v, acts) = forward(&p, &[0.3, -2.0]).unwrap();
        assert_eq!(v, p.layers[2].bias[0]);
        assert_eq!(input_gradient(&p, &acts), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer() {
        let p = NetworkParams { layers: vec![Layer { weights: array![[2.0], [-3.0]], bias: array![0.5] }] };
        let (v, acts) = forward(&p, &[1.0, 2.0]).unwrap();
        assert_eq!(v, 2.0 - 6.0 + 0.5);
        assert_eq!(input_gradient(&p, &acts), vec![2.0, -3.0]);
        let p1 = NetworkParams { layers: vec![Layer { weights: array![[2.0]], bias: array![0.5] }] };
        assert_eq!(input_second_derivative(&p1, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn unit_softplus_network_by_hand() {
        let p = unit_net();
        let (v, acts) = forward(&p, &[0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert_eq!(input_gradient(&p, &acts), vec![0.5]);
        assert!((input_second_derivative(&p, 0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = random_net(2, 1, 3, 5);
        assert!(matches!(forward(&p, &[1.0]), Err(DmlError::InvalidInput(_))));
        assert!(input_second_derivative(&p, 1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let p = random_net(3, 3, 6, seed);
            let x = [0.4, -1.1, 0.9];
            let (_, acts) = forward(&p, &x).unwrap();
            let g = input_gradient(&p, &acts);
            for j in 0..3 {
                let h = 1e-4;
                let mut up = x;
                up[j] += h;
                let mut dn = x;
                dn[j] -= h;
                let fd = (forward(&p, &up).unwrap().0 - forward(&p, &dn).unwrap().0) / (2.0 * h);
                assert!((fd - g[j]).abs() / g[j].abs().max(1e-6) < 1e-5, "seed {seed} dim {j}");
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        for seed in 0..20 {
            let p = random_net(1, 3, 7, seed);
            let x = 0.3;
            let h = 1e-3;
            let f = |v: f64| forward(&p, &[v]).unwrap().0;
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let got = input_second_derivative(&p, x).unwrap();
            assert!((fd - got).abs() / got.abs().max(1e-6) < 1e-4, "seed {seed}: {fd} vs {got}");
        }
    }
}
