//! Underlying-asset simulators.
//!
//! Each simulator is a pure function of its parameters and the standard
//! normals it is handed. The normals are kept in the returned [`PathDraw`]
//! because the likelihood-ratio scores are functions of exactly those draws.

use std::fmt;
use std::sync::Arc;

use crate::error::{DmlError, Result};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(DmlError::InvalidInput(msg()))
    }
}

/// Black-Scholes dynamics to a single date.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbmParams {
    pub spot: f64,
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl GbmParams {
    pub fn new(spot: f64, rate: f64, vol: f64, maturity: f64) -> Result<Self> {
        let p = Self { spot, rate, vol, maturity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.spot > 0.0 && self.spot.is_finite(), || format!("spot must be positive, got {}", self.spot))?;
        check(self.rate.is_finite(), || "rate must be finite".into())?;
        check(self.vol > 0.0 && self.vol.is_finite(), || format!("vol must be positive, got {}", self.vol))?;
        check(self.maturity > 0.0 && self.maturity.is_finite(), || {
            format!("maturity must be positive, got {}", self.maturity)
        })
    }

    pub fn with_spot(&self, spot: f64) -> Self {
        Self { spot, ..*self }
    }

    /// σ√T
    pub fn total_vol(&self) -> f64 {
        self.vol * self.maturity.sqrt()
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }
}

/// Black-Scholes dynamics observed at a monitoring date `t1` and expiry `t2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStepGbmParams {
    pub spot: f64,
    pub rate: f64,
    pub vol: f64,
    pub t1: f64,
    pub t2: f64,
}

impl TwoStepGbmParams {
    pub fn new(spot: f64, rate: f64, vol: f64, t1: f64, t2: f64) -> Result<Self> {
        let p = Self { spot, rate, vol, t1, t2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        GbmParams::new(self.spot, self.rate, self.vol, self.t2)?;
        check(self.t1 > 0.0 && self.t1 < self.t2, || {
            format!("monitoring dates must satisfy 0 < t1 < t2, got t1={} t2={}", self.t1, self.t2)
        })
    }

    pub fn with_spot(&self, spot: f64) -> Self {
        Self { spot, ..*self }
    }

    /// The first leg, spot to `t1`.
    pub fn first_leg(&self) -> GbmParams {
        GbmParams { spot: self.spot, rate: self.rate, vol: self.vol, maturity: self.t1 }
    }
}

/// Uncorrelated arithmetic Brownian motions.
#[derive(Clone, Debug, PartialEq)]
pub struct BachelierBasketParams {
    pub spots: Vec<f64>,
    pub vols: Vec<f64>,
    pub weights: Vec<f64>,
    pub maturity: f64,
}

impl BachelierBasketParams {
    pub fn new(spots: Vec<f64>, vols: Vec<f64>, weights: Vec<f64>, maturity: f64) -> Result<Self> {
        let p = Self { spots, vols, weights, maturity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.spots.len();
        check(d >= 1, || "basket needs at least one asset".into())?;
        check(self.vols.len() == d && self.weights.len() == d, || {
            format!(
                "basket dimension mismatch: {} spots, {} vols, {} weights",
                d,
                self.vols.len(),
                self.weights.len()
            )
        })?;
        check(self.vols.iter().all(|v| *v > 0.0 && v.is_finite()), || "basket vols must be positive".into())?;
        check(self.weights.iter().all(|w| w.is_finite()), || "basket weights must be finite".into())?;
        check(self.maturity > 0.0 && self.maturity.is_finite(), || "maturity must be positive".into())
    }

    pub fn dim(&self) -> usize {
        self.spots.len()
    }

    pub fn with_spots(&self, spots: &[f64]) -> Self {
        Self { spots: spots.to_vec(), ..self.clone() }
    }

    /// Mean of the weighted basket at maturity.
    pub fn basket_mean(&self) -> f64 {
        self.weights.iter().zip(&self.spots).map(|(w, x)| w * x).sum()
    }

    /// Standard deviation of the weighted basket at maturity.
    pub fn basket_std(&self) -> f64 {
        let var: f64 = self.weights.iter().zip(&self.vols).map(|(w, s)| (w * s).powi(2)).sum();
        (self.maturity * var).sqrt()
    }
}

/// Scalar diffusion coefficients with their state derivatives.
pub trait ScalarSde: Send + Sync {
    fn drift(&self, x: f64) -> f64;
    fn diffusion(&self, x: f64) -> f64;
    fn drift_deriv(&self, x: f64) -> f64;
    fn diffusion_deriv(&self, x: f64) -> f64;
}

/// `dX = r X dt + σ X dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbmSde {
    pub rate: f64,
    pub vol: f64,
}

impl ScalarSde for GbmSde {
    fn drift(&self, x: f64) -> f64 {
        self.rate * x
    }
    fn diffusion(&self, x: f64) -> f64 {
        self.vol * x
    }
    fn drift_deriv(&self, _x: f64) -> f64 {
        self.rate
    }
    fn diffusion_deriv(&self, _x: f64) -> f64 {
        self.vol
    }
}

/// `dX = μ dt + σ dW` with constant coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSde {
    pub drift: f64,
    pub diffusion: f64,
}

impl ScalarSde for ConstantSde {
    fn drift(&self, _x: f64) -> f64 {
        self.drift
    }
    fn diffusion(&self, _x: f64) -> f64 {
        self.diffusion
    }
    fn drift_deriv(&self, _x: f64) -> f64 {
        0.0
    }
    fn diffusion_deriv(&self, _x: f64) -> f64 {
        0.0
    }
}

/// Euler-Maruyama discretisation of a scalar SDE.
#[derive(Clone)]
pub struct EulerParams {
    pub spot: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub sde: Arc<dyn ScalarSde>,
}

impl fmt::Debug for EulerParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EulerParams")
            .field("spot", &self.spot)
            .field("n_steps", &self.n_steps)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

impl EulerParams {
    pub fn new(spot: f64, n_steps: usize, dt: f64, sde: Arc<dyn ScalarSde>) -> Result<Self> {
        check(n_steps >= 1, || "Euler scheme needs at least one step".into())?;
        check(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
        check(spot.is_finite(), || "spot must be finite".into())?;
        Ok(Self { spot, n_steps, dt, sde })
    }

    pub fn with_spot(&self, spot: f64) -> Self {
        Self { spot, ..self.clone() }
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Simulated state values and the normals that produced them.
///
/// `terminals` holds one value per monitoring date (GBM: one; two-step: the
/// barrier date then expiry; Euler: every grid point after the spot) or one
/// per asset for the basket.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDraw {
    pub terminals: Vec<f64>,
    pub normals: Vec<f64>,
}

impl PathDraw {
    /// The last simulated value.
    pub fn terminal(&self) -> f64 {
        *self.terminals.last().expect("path draw without terminals")
    }
}

#[inline]
fn gbm_step(spot: f64, rate: f64, vol: f64, dt: f64, xi: f64) -> f64 {
    spot * ((rate - 0.5 * vol * vol) * dt + vol * dt.sqrt() * xi).exp()
}

pub fn simulate_gbm_terminal(p: &GbmParams, xi: f64) -> PathDraw {
    PathDraw {
        terminals: vec![gbm_step(p.spot, p.rate, p.vol, p.maturity, xi)],
        normals: vec![xi],
    }
}

pub fn simulate_gbm_two_step(p: &TwoStepGbmParams, xi1: f64, xi2: f64) -> PathDraw {
    let s1 = gbm_step(p.spot, p.rate, p.vol, p.t1, xi1);
    let s2 = gbm_step(s1, p.rate, p.vol, p.t2 - p.t1, xi2);
    PathDraw { terminals: vec![s1, s2], normals: vec![xi1, xi2] }
}

pub fn simulate_bachelier_basket(p: &BachelierBasketParams, xi: &[f64]) -> Result<PathDraw> {
    if xi.len() != p.dim() {
        return Err(DmlError::InvalidInput(format!(
            "basket of {} assets given {} normals",
            p.dim(),
            xi.len()
        )));
    }
    let sqrt_t = p.maturity.sqrt();
    let terminals = p
        .spots
        .iter()
        .zip(&p.vols)
        .zip(xi)
        .map(|((x, s), z)| x + s * sqrt_t * z)
        .collect();
    Ok(PathDraw { terminals, normals: xi.to_vec() })
}

pub fn simulate_euler_path(p: &EulerParams, xi: &[f64]) -> Result<PathDraw> {
    if xi.len() != p.n_steps {
        return Err(DmlError::InvalidInput(format!(
            "Euler path of {} steps given {} normals",
            p.n_steps,
            xi.len()
        )));
    }
    let sqrt_dt = p.dt.sqrt();
    let mut state = p.spot;
    let terminals = xi
        .iter()
        .map(|z| {
            state = state + p.sde.drift(state) * p.dt + p.sde.diffusion(state) * sqrt_dt * z;
            state
        })
        .collect();
    Ok(PathDraw { terminals, normals: xi.to_vec() })
}

/// Any of the supported simulation models, used where label generation
/// needs to be generic over the model.
#[derive(Clone, Debug)]
pub enum MarketModel {
    Gbm(GbmParams),
    TwoStepGbm(TwoStepGbmParams),
    BachelierBasket(BachelierBasketParams),
    Euler(EulerParams),
}

impl MarketModel {
    pub fn spot_dim(&self) -> usize {
        match self {
            MarketModel::BachelierBasket(p) => p.dim(),
            _ => 1,
        }
    }

    /// Number of standard normals consumed by one path.
    pub fn normals_per_path(&self) -> usize {
        match self {
            MarketModel::Gbm(_) => 1,
            MarketModel::TwoStepGbm(_) => 2,
            MarketModel::BachelierBasket(p) => p.dim(),
            MarketModel::Euler(p) => p.n_steps,
        }
    }

    pub fn spots(&self) -> Vec<f64> {
        match self {
            MarketModel::Gbm(p) => vec![p.spot],
            MarketModel::TwoStepGbm(p) => vec![p.spot],
            MarketModel::BachelierBasket(p) => p.spots.clone(),
            MarketModel::Euler(p) => vec![p.spot],
        }
    }

    pub fn with_spots(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.spot_dim() {
            return Err(DmlError::InvalidInput(format!(
                "model expects {} spots, got {}",
                self.spot_dim(),
                x.len()
            )));
        }
        Ok(match self {
            MarketModel::Gbm(p) => MarketModel::Gbm(p.with_spot(x[0])),
            MarketModel::TwoStepGbm(p) => MarketModel::TwoStepGbm(p.with_spot(x[0])),
            MarketModel::BachelierBasket(p) => MarketModel::BachelierBasket(p.with_spots(x)),
            MarketModel::Euler(p) => MarketModel::Euler(p.with_spot(x[0])),
        })
    }

    pub fn simulate(&self, normals: &[f64]) -> Result<PathDraw> {
        if normals.len() != self.normals_per_path() {
            return Err(DmlError::InvalidInput(format!(
                "model consumes {} normals per path, got {}",
                self.normals_per_path(),
                normals.len()
            )));
        }
        match self {
            MarketModel::Gbm(p) => Ok(simulate_gbm_terminal(p, normals[0])),
            MarketModel::TwoStepGbm(p) => Ok(simulate_gbm_two_step(p, normals[0], normals[1])),
            MarketModel::BachelierBasket(p) => simulate_bachelier_basket(p, normals),
            MarketModel::Euler(p) => simulate_euler_path(p, normals),
        }
    }
}
