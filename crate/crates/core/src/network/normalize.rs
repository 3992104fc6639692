//! Affine normalisation of inputs and labels.
//!
//! Inputs and values are standardised; derivative labels follow by the chain
//! rule, `δ̃ⱼ = δⱼ·sₓⱼ/s_y` and `γ̃ = γ·sₓ²/s_y`.

use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::labels::LabeledSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub value_mean: f64,
    pub value_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Constant columns keep unit scale.
    (mean, if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 })
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self { input_mean: vec![0.0; dim], input_std: vec![1.0; dim], value_mean: 0.0, value_std: 1.0 }
    }

    pub fn fit(samples: &[LabeledSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| DmlError::InvalidInput("cannot normalise an empty dataset".into()))?;
        let dim = first.input.len();
        if samples.iter().any(|s| s.input.len() != dim) {
            return Err(DmlError::InvalidInput("samples have inconsistent input dimensions".into()));
        }
        let (input_mean, input_std) = (0..dim).map(|j| mean_std(samples.iter().map(move |s| s.input[j]))).unzip();
        let (value_mean, value_std) = mean_std(samples.iter().map(|s| s.value));
        Ok(Self { input_mean, input_std, value_mean, value_std })
    }

    pub fn dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.input_mean.iter().zip(&self.input_std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn value(&self, y: f64) -> f64 {
        (y - self.value_mean) / self.value_std
    }

    pub fn delta(&self, d: &[f64]) -> Vec<f64> {
        d.iter().zip(&self.input_std).map(|(v, s)| v * s / self.value_std).collect()
    }

    pub fn gamma(&self, g: f64) -> f64 {
        g * self.input_std[0] * self.input_std[0] / self.value_std
    }

    pub fn apply(&self, sample: &LabeledSample) -> LabeledSample {
        LabeledSample {
            input: self.input(&sample.input),
            value: self.value(sample.value),
            delta: sample.delta.as_deref().map(|d| self.delta(d)),
            gamma: sample.gamma.map(|g| self.gamma(g)),
        }
    }

    pub fn unapply_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.input_mean.iter().zip(&self.input_std)).map(|(v, (m, s))| v * s + m).collect()
    }

    pub fn unapply_value(&self, y: f64) -> f64 {
        y * self.value_std + self.value_mean
    }

    pub fn unapply_delta(&self, d: &[f64]) -> Vec<f64> {
        d.iter().zip(&self.input_std).map(|(v, s)| v * self.value_std / s).collect()
    }

    pub fn unapply_gamma(&self, g: f64) -> f64 {
        g * self.value_std / (self.input_std[0] * self.input_std[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: f64, y: f64) -> LabeledSample {
        LabeledSample { input: vec![x, 2.0], value: y, delta: Some(vec![1.5, -0.5]), gamma: Some(0.25) }
    }

    #[test]
    fn fit_standardises() {
        let data = [sample(1.0, 10.0), sample(3.0, 20.0), sample(5.0, 30.0)];
        let n = Normalizer::fit(&data).unwrap();
        assert_eq!(n.input_mean, vec![3.0, 2.0]);
        assert!((n.input_std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(n.input_std[1], 1.0);
        let z = n.apply(&data[0]);
        assert!((z.input[0] + (1.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(z.input[1], 0.0);
    }

    #[test]
    fn round_trips() {
        let data = [sample(1.0, 10.0), sample(4.0, 17.0)];
        let n = Normalizer::fit(&data).unwrap();
        let z = n.apply(&data[1]);
        assert!((n.unapply_value(z.value) - 17.0).abs() < 1e-13);
        let back = n.unapply_input(&z.input);
        assert!((back[0] - 4.0).abs() < 1e-14 && (back[1] - 2.0).abs() < 1e-14);
        let d = n.unapply_delta(z.delta.as_ref().unwrap());
        assert!((d[0] - 1.5).abs() < 1e-14 && (d[1] + 0.5).abs() < 1e-14);
        assert!((n.unapply_gamma(z.gamma.unwrap()) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn chain_rule_scaling() {
        // y = 3x² has δ = 6x, γ = 6; normalised f̃(x̃) = (3(sₓx̃+μ)² − μ_y)/s_y.
        let n = Normalizer { input_mean: vec![2.0], input_std: vec![0.5], value_mean: 1.0, value_std: 4.0 };
        let x = 2.6;
        let xt = n.input(&[x])[0];
        let f = |t: f64| n.value(3.0 * (n.unapply_input(&[t])[0]).powi(2));
        let h = 1e-4;
        let fd1 = (f(xt + h) - f(xt - h)) / (2.0 * h);
        let fd2 = (f(xt + h) - 2.0 * f(xt) + f(xt - h)) / (h * h);
        assert!((fd1 - n.delta(&[6.0 * x])[0]).abs() < 1e-8);
        assert!((fd2 - n.gamma(6.0)).abs() < 1e-5);
    }

    #[test]
    fn standardized_data_is_identity() {
        let data: Vec<_> = [-1.0, 1.0].iter().map(|&x| LabeledSample { input: vec![x], value: -x, delta: None, gamma: None }).collect();
        let n = Normalizer::fit(&data).unwrap();
        let id = Normalizer::identity(1);
        assert!((n.input_mean[0] - id.input_mean[0]).abs() < 1e-12 && (n.input_std[0] - 1.0).abs() < 1e-12);
        assert!(n.value_mean.abs() < 1e-12 && (n.value_std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_is_error() {
        assert!(Normalizer::fit(&[]).is_err());
    }
}
