//! Grid evaluation against oracles and RMSE summaries.

use crate::error::{DmlError, Result};
use crate::network::train::Prediction;
use crate::network::TrainedModel;

use super::config::{ExperimentKind, MethodName};
use super::problem::GridOracle;

/// Anything that yields price and sensitivities at an input.
pub trait Approximator {
    fn predict(&self, x: &[f64]) -> Result<Prediction>;
}

impl Approximator for TrainedModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        TrainedModel::predict(self, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub spot: f64,
    pub pred_price: f64,
    /// Mean of the predicted gradient components.
    pub pred_delta: f64,
    pub pred_gamma: Option<f64>,
    pub oracle_price: f64,
    pub oracle_delta: f64,
    pub oracle_gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub price_rmse: f64,
    pub delta_rmse: f64,
    /// Present when both prediction and oracle carry gamma at every point.
    pub gamma_rmse: Option<f64>,
    /// `100 · price_rmse / mean |oracle price|`.
    pub rmse_pct_of_price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub experiment: ExperimentKind,
    pub method: MethodName,
    pub eps_multiplier: Option<f64>,
    pub m: usize,
    /// `None` for the replication-averaged report.
    pub replication: Option<usize>,
    pub rows: Vec<GridRow>,
    pub summary: Summary,
}

fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b) * (a - b), n + 1));
    (sum / n as f64).sqrt()
}

pub fn summarize(rows: &[GridRow]) -> Summary {
    let price_rmse = rmse(rows.iter().map(|r| (r.pred_price, r.oracle_price)));
    let delta_rmse = rmse(rows.iter().map(|r| (r.pred_delta, r.oracle_delta)));
    let gammas: Option<Vec<(f64, f64)>> = rows.iter().map(|r| Some((r.pred_gamma?, r.oracle_gamma?))).collect();
    let gamma_rmse = gammas.filter(|g| !g.is_empty()).map(|g| rmse(g.into_iter()));
    let scale = rows.iter().map(|r| r.oracle_price.abs()).sum::<f64>() / rows.len() as f64;
    Summary { price_rmse, delta_rmse, gamma_rmse, rmse_pct_of_price: 100.0 * price_rmse / scale }
}

/// Predictions at every grid point compared with the oracle. Delta is the
/// network's input gradient whatever labels it was trained on.
pub fn evaluate_on_grid(model: &dyn Approximator, oracle: &GridOracle) -> Result<(Vec<GridRow>, Summary)> {
    if oracle.points.is_empty() {
        return Err(DmlError::InvalidInput("empty evaluation grid".into()));
    }
    let rows = oracle
        .points
        .iter()
        .map(|p| {
            let pred = model.predict(&oracle.input(p.spot))?;
            let pred_delta = pred.delta.iter().sum::<f64>() / pred.delta.len() as f64;
            Ok(GridRow {
                spot: p.spot,
                pred_price: pred.value,
                pred_delta,
                pred_gamma: pred.gamma,
                oracle_price: p.price,
                oracle_delta: p.delta,
                oracle_gamma: p.gamma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows);
    Ok((rows, summary))
}

/// Pointwise mean prediction across replications on a shared grid.
pub fn average_rows(replicas: &[&[GridRow]]) -> Vec<GridRow> {
    let n = replicas.len() as f64;
    let first = replicas[0];
    (0..first.len())
        .map(|i| {
            let mean = |f: &dyn Fn(&GridRow) -> f64| replicas.iter().map(|r| f(&r[i])).sum::<f64>() / n;
            let gamma: Option<Vec<f64>> = replicas.iter().map(|r| r[i].pred_gamma).collect();
            GridRow {
                pred_price: mean(&|r| r.pred_price),
                pred_delta: mean(&|r| r.pred_delta),
                pred_gamma: gamma.map(|g| g.iter().sum::<f64>() / n),
                ..first[i]
            }
        })
        .collect()
}
