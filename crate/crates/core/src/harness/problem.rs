//! Market model, payoff and oracle for each experiment, and dataset
//! generation.

use crate::error::{DmlError, Result};
use crate::labels::{make_labeled_sample, LabeledSample};
use crate::market::{BachelierBasketParams, GbmParams, MarketModel, TwoStepGbmParams};
use crate::oracles::{self, BarrierLevel, OracleResult};
use crate::payoffs::{Contract, PayoffSpec};
use crate::rng::{Purpose, StreamFactory};

use super::config::{BarrierMode, ExperimentConfig, ExperimentKind, MethodName};

/// Market model at the reference spot.
pub fn reference_model(cfg: &ExperimentConfig) -> Result<MarketModel> {
    let m = &cfg.market;
    Ok(match cfg.experiment {
        ExperimentKind::Digital | ExperimentKind::SmoothingSweep | ExperimentKind::GammaPortfolio => {
            MarketModel::Gbm(GbmParams::new(m.spot, m.rate, m.vol, m.maturity)?)
        }
        ExperimentKind::Barrier => MarketModel::TwoStepGbm(TwoStepGbmParams::new(
            m.spot,
            m.rate,
            m.vol,
            m.monitor_time.unwrap_or(f64::NAN),
            m.maturity,
        )?),
        ExperimentKind::BasketDigital => {
            let d = m.dim.unwrap_or(0);
            MarketModel::BachelierBasket(BachelierBasketParams::new(
                vec![m.spot; d],
                vec![m.vol; d],
                basket_weights(d),
                m.maturity,
            )?)
        }
    })
}

fn basket_weights(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

/// Absolute ramp width `multiplier · σ√T · spot`.
pub fn smoothing_width(cfg: &ExperimentConfig, multiplier: f64) -> f64 {
    multiplier * cfg.market.vol * cfg.market.maturity.sqrt() * cfg.market.spot
}

fn barrier_level(cfg: &ExperimentConfig) -> BarrierLevel {
    let b = cfg.payoff.barrier.unwrap_or(f64::NAN);
    match cfg.payoff.barrier_mode.unwrap_or(BarrierMode::Reference) {
        BarrierMode::Reference => BarrierLevel::Fixed(b),
        BarrierMode::PerPoint => BarrierLevel::Proportional(b / cfg.market.spot),
    }
}

/// Contract used for training labels at spot(s) `x`.
pub fn payoff_spec(cfg: &ExperimentConfig, method: MethodName, eps: Option<f64>, x: &[f64]) -> Result<PayoffSpec> {
    let (r, t) = (cfg.market.rate, cfg.market.maturity);
    let strike = cfg.strike();
    let contract = match cfg.experiment {
        ExperimentKind::Digital | ExperimentKind::SmoothingSweep => match (method, eps) {
            (MethodName::PathwiseSmoothed, Some(e)) => Contract::SmoothedDigital { strike, width: smoothing_width(cfg, e) },
            (MethodName::PathwiseSmoothed, None) => {
                return Err(DmlError::Config("pathwise_smoothed needs an eps multiplier".into()))
            }
            _ => Contract::Digital { strike },
        },
        ExperimentKind::BasketDigital => {
            Contract::BasketDigital { strike, weights: basket_weights(cfg.market.dim.unwrap_or(0)) }
        }
        ExperimentKind::Barrier => Contract::BarrierCall { strike, barrier: barrier_level(cfg).at(x[0]) },
        ExperimentKind::GammaPortfolio => Contract::CallPortfolio { legs: cfg.payoff.legs.clone().unwrap_or_default() },
    };
    PayoffSpec::new(contract, r, t)
}

/// Generates `m` labelled samples. Sample `i` draws its spot and inner paths
/// from its own substream, so datasets for different methods and sizes share
/// random numbers.
pub fn generate_dataset(
    cfg: &ExperimentConfig,
    method: MethodName,
    eps: Option<f64>,
    m: usize,
    streams: &StreamFactory,
) -> Result<Vec<LabeledSample>> {
    let model = reference_model(cfg)?;
    let label = method.label_method(eps);
    let dim = cfg.input_dim();
    let (lo, hi) = (cfg.data.train_lo, cfg.data.train_hi);
    (0..m)
        .map(|i| {
            let mut rng = streams.stream(Purpose::Dataset, i as u64);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(lo, hi)).collect();
            let spec = payoff_spec(cfg, method, eps, &x)?;
            make_labeled_sample(&x, cfg.data.k, &label, &model, &spec, &mut rng)
        })
        .collect()
}

/// Oracle price, mean delta across inputs, and (where defined) gamma at one
/// grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OraclePoint {
    pub spot: f64,
    pub price: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
}

/// Oracle values on the evaluation grid. Basket grids run along the
/// diagonal, every asset at the grid spot.
#[derive(Clone, Debug, PartialEq)]
pub struct GridOracle {
    pub input_dim: usize,
    pub points: Vec<OraclePoint>,
}

pub fn oracle_at(cfg: &ExperimentConfig, spot: f64) -> Result<OracleResult> {
    let m = &cfg.market;
    let k = cfg.strike();
    match (cfg.experiment, reference_model(cfg)?) {
        (ExperimentKind::Digital | ExperimentKind::SmoothingSweep, _) => {
            oracles::bs_digital(spot, k, m.rate, m.vol, m.maturity)
        }
        (ExperimentKind::GammaPortfolio, _) => {
            oracles::portfolio_gamma(spot, cfg.payoff.legs.as_deref().unwrap_or(&[]), m.rate, m.vol, m.maturity)
        }
        (ExperimentKind::Barrier, MarketModel::TwoStepGbm(p)) => {
            oracles::barrier_oracle(&p.with_spot(spot), barrier_level(cfg), k)
        }
        (ExperimentKind::BasketDigital, MarketModel::BachelierBasket(p)) => {
            oracles::bachelier_basket_digital(&p.with_spots(&vec![spot; p.dim()]), k, m.rate)
        }
        _ => unreachable!("reference_model matches the experiment"),
    }
}

impl GridOracle {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let points = cfg
            .eval
            .points()
            .into_iter()
            .map(|spot| {
                let o = oracle_at(cfg, spot)?;
                Ok(OraclePoint { spot, price: o.price, delta: o.mean_delta(), gamma: o.gamma })
            })
            .collect::<Result<_>>()?;
        Ok(Self { input_dim: cfg.input_dim(), points })
    }

    pub fn input(&self, spot: f64) -> Vec<f64> {
        vec![spot; self.input_dim]
    }
}
