//! Mini-batch training of the twin network.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::loss::{parameter_gradient, Batch, LossWeights};
use super::normalize::Normalizer;
use super::optim::{adam_step, cosine_lr, AdamState};
use super::{forward, input_gradient, input_second_derivative, NetworkConfig, NetworkParams};
use crate::error::{DmlError, Result};
use crate::labels::LabeledSample;
use crate::rng::{Purpose, StreamFactory};

/// How delta-label components are weighted against each other in the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaWeighting {
    #[default]
    Uniform,
    /// Component `j` weighted by `1 / mean(δ̃ⱼ²)` over the training set.
    InverseMeanSquare,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_weights: LossWeights,
    #[serde(default)]
    pub delta_weighting: DeltaWeighting,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_weights: LossWeights::VALUE_ONLY,
            delta_weighting: DeltaWeighting::Uniform,
            epochs: 100, batch_size: 256, lr_max: 1e-3, lr_min: 1e-6, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_weights.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DmlError::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr_max > 0.0 && self.lr_min > 0.0 && self.lr_min <= self.lr_max) {
            return Err(DmlError::Config(format!(
                "need 0 < lr_min <= lr_max, got {} and {}",
                self.lr_min, self.lr_max
            )));
        }
        Ok(())
    }
}

/// A trained network with the normalisation it was fitted under.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: NetworkConfig,
    pub params: NetworkParams,
    pub normalizer: Normalizer,
    /// Mean mini-batch loss per epoch, in normalised units.
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub delta: Vec<f64>,
    pub gamma: Option<f64>,
}

impl TrainedModel {
    /// Value, gradient and (scalar inputs only) second derivative in original units.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let xt = self.normalizer.input(x);
        let (v, acts) = forward(&self.params, &xt)?;
        let g = input_gradient(&self.params, &acts);
        let gamma = if xt.len() == 1 {
            Some(self.normalizer.unapply_gamma(input_second_derivative(&self.params, xt[0])?))
        } else {
            None
        };
        Ok(Prediction { value: self.normalizer.unapply_value(v), delta: self.normalizer.unapply_delta(&g), gamma })
    }
}

fn delta_weights(samples: &[LabeledSample], scheme: DeltaWeighting) -> Option<Array1<f64>> {
    match scheme {
        DeltaWeighting::Uniform => None,
        DeltaWeighting::InverseMeanSquare => {
            let d = samples[0].input.len();
            let n = samples.len() as f64;
            Some(Array1::from_shape_fn(d, |j| {
                let ms = samples.iter().filter_map(|s| s.delta.as_ref()).map(|v| v[j] * v[j]).sum::<f64>() / n;
                if ms > 1e-12 {
                    1.0 / ms
                } else {
                    1.0
                }
            }))
        }
    }
}

fn gather(samples: &[LabeledSample], idx: &[usize], weights: &LossWeights, delta_weights: &Option<Array1<f64>>) -> Batch {
    let d = samples[0].input.len();
    let b = idx.len();
    let inputs = Array2::from_shape_fn((b, d), |(i, j)| samples[idx[i]].input[j]);
    let values = Array1::from_shape_fn(b, |i| samples[idx[i]].value);
    let deltas = (weights.delta > 0.0).then(|| {
        Array2::from_shape_fn((b, d), |(i, j)| samples[idx[i]].delta.as_ref().expect("checked")[j])
    });
    let gammas =
        (weights.gamma > 0.0).then(|| Array1::from_shape_fn(b, |i| samples[idx[i]].gamma.expect("checked")));
    Batch { inputs, values, deltas, gammas, delta_weights: delta_weights.clone() }
}

/// Fits a fresh network to `dataset`. Runs `epochs · ⌈m/batch_size⌉` Adam
/// steps over reshuffled mini-batches; the result depends only on the inputs
/// and `train_config.seed`.
pub fn train(dataset: &[LabeledSample], net_config: &NetworkConfig, train_config: &TrainConfig) -> Result<TrainedModel> {
    net_config.validate()?;
    train_config.validate()?;
    if dataset.is_empty() {
        return Err(DmlError::InvalidInput("cannot train on an empty dataset".into()));
    }
    let dim = net_config.input_dim;
    let w = &train_config.loss_weights;
    for s in dataset {
        if s.input.len() != dim {
            return Err(DmlError::InvalidInput(format!("sample has {} inputs, network takes {dim}", s.input.len())));
        }
        if w.delta > 0.0 && s.delta.as_ref().is_none_or(|d| d.len() != dim) {
            return Err(DmlError::InvalidInput("delta weight set but a sample lacks a delta label".into()));
        }
        if w.gamma > 0.0 && s.gamma.is_none() {
            return Err(DmlError::InvalidInput("gamma weight set but a sample lacks a gamma label".into()));
        }
        if !s.value.is_finite() || s.input.iter().any(|v| !v.is_finite()) {
            return Err(DmlError::InvalidInput("non-finite sample".into()));
        }
    }

    let normalizer = Normalizer::fit(dataset)?;
    let normalized: Vec<LabeledSample> = dataset.iter().map(|s| normalizer.apply(s)).collect();
    let component_weights =
        if w.delta > 0.0 { delta_weights(&normalized, train_config.delta_weighting) } else { None };
    let streams = StreamFactory::new(train_config.seed, 0);
    let mut params = NetworkParams::init(net_config, &mut streams.stream(Purpose::Init, 0))?;
    let mut shuffle = streams.stream(Purpose::Shuffle, 0);
    let mut adam = AdamState::new(&params);

    let m = normalized.len();
    let batch = train_config.batch_size.min(m);
    let per_epoch = m.div_ceil(batch);
    let total = train_config.epochs * per_epoch;
    let mut order: Vec<usize> = (0..m).collect();
    let mut loss_history = Vec::with_capacity(train_config.epochs);
    let mut step = 0;
    for _ in 0..train_config.epochs {
        shuffle.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let b = gather(&normalized, chunk, w, &component_weights);
            let (l, grad) = parameter_gradient(&params, &b, w)?;
            adam_step(&mut params, &mut adam, &grad, cosine_lr(step, total, train_config.lr_max, train_config.lr_min));
            epoch_loss += l;
            step += 1;
        }
        loss_history.push(epoch_loss / per_epoch as f64);
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(DmlError::InvalidInput("training diverged to non-finite parameters".into()));
    }
    Ok(TrainedModel { config: *net_config, params, normalizer, loss_history })
}
