//! Closed-form and quadrature prices, deltas and gammas used as ground truth.

pub mod normal;
pub mod quadrature;

use crate::error::{DmlError, Result};
use crate::market::{BachelierBasketParams, TwoStepGbmParams};
use crate::payoffs::CallLeg;
use normal::{norm_cdf, norm_pdf};

/// Absolute tolerance of the barrier quadrature.
pub const BARRIER_QUAD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub price: f64,
    /// One entry per spot coordinate.
    pub delta: Vec<f64>,
    pub gamma: Option<f64>,
}

impl OracleResult {
    fn scalar(price: f64, delta: f64, gamma: f64) -> Self {
        Self { price, delta: vec![delta], gamma: Some(gamma) }
    }

    /// Average of the delta components.
    pub fn mean_delta(&self) -> f64 {
        self.delta.iter().sum::<f64>() / self.delta.len() as f64
    }
}

fn positive_inputs(x: f64, k: f64, vol: f64, t: f64) -> Result<()> {
    if x > 0.0 && k > 0.0 && vol > 0.0 && t > 0.0 {
        Ok(())
    } else {
        Err(DmlError::InvalidInput(format!(
            "Black-Scholes inputs must be positive: x={x} K={k} vol={vol} T={t}"
        )))
    }
}

/// Black-Scholes European call.
pub fn bs_call(x: f64, k: f64, r: f64, vol: f64, t: f64) -> Result<OracleResult> {
    positive_inputs(x, k, vol, t)?;
    let sd = vol * t.sqrt();
    let d1 = ((x / k).ln() + (r + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    let df = (-r * t).exp();
    let price = x * norm_cdf(d1) - k * df * norm_cdf(d2);
    Ok(OracleResult::scalar(price, norm_cdf(d1), norm_pdf(d1) / (x * sd)))
}

/// Black-Scholes European put price.
pub fn bs_put_price(x: f64, k: f64, r: f64, vol: f64, t: f64) -> Result<f64> {
    positive_inputs(x, k, vol, t)?;
    let sd = vol * t.sqrt();
    let d1 = ((x / k).ln() + (r + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    Ok(k * (-r * t).exp() * norm_cdf(-d2) - x * norm_cdf(-d1))
}

/// Cash-or-nothing digital paying one unit if the terminal spot exceeds `k`.
pub fn bs_digital(x: f64, k: f64, r: f64, vol: f64, t: f64) -> Result<OracleResult> {
    positive_inputs(x, k, vol, t)?;
    let sd = vol * t.sqrt();
    let d = ((x / k).ln() + r * t) / sd - 0.5 * sd;
    let df = (-r * t).exp();
    let density = norm_pdf(d);
    let delta = df * density / (x * sd);
    let gamma = -df * density / (x * x * sd) * (1.0 + d / sd);
    Ok(OracleResult::scalar(df * norm_cdf(d), delta, gamma))
}

/// Digital on a Bachelier basket: pays `exp(-rT)` when `Σ wᵢ S_T,ᵢ > k`.
///
/// `gamma` is reported along the diagonal direction (all spots moved
/// together), which is what a one-dimensional grid over the basket sees.
pub fn bachelier_basket_digital(params: &BachelierBasketParams, k: f64, r: f64) -> Result<OracleResult> {
    params.validate()?;
    let mean = params.basket_mean();
    let sd = params.basket_std();
    let z = (mean - k) / sd;
    let df = (-r * params.maturity).exp();
    let density = norm_pdf(z);
    let delta = params.weights.iter().map(|w| df * density * w / sd).collect();
    let w_sum: f64 = params.weights.iter().sum();
    let gamma = -df * z * density * (w_sum / sd).powi(2);
    Ok(OracleResult { price: df * norm_cdf(z), delta, gamma: Some(gamma) })
}

/// Price of the down-and-out call monitored once at `t1`, paying at `t2`.
///
/// Conditions on the log-return to `t1`: the value at `t1` of the surviving
/// call is Black-Scholes to `t2 - t1`, integrated against the normal density
/// above the barrier.
pub fn barrier_price_only(params: &TwoStepGbmParams, barrier: f64, strike: f64) -> Result<f64> {
    params.validate()?;
    let TwoStepGbmParams { spot, rate, vol, t1, t2 } = *params;
    let sd1 = vol * t1.sqrt();
    let drift1 = (rate - 0.5 * vol * vol) * t1;
    let upper = 12.0 + sd1;
    let lower = if barrier > 0.0 {
        ((barrier / spot).ln() - drift1) / sd1
    } else {
        f64::NEG_INFINITY
    };
    let lower = lower.max(-12.0);
    if lower >= upper {
        return Ok(0.0);
    }
    let remaining = t2 - t1;
    let integrand = |z: f64| {
        let s1 = spot * (drift1 + sd1 * z).exp();
        match bs_call(s1, strike, rate, vol, remaining) {
            Ok(c) => c.price * norm_pdf(z),
            Err(_) => 0.0,
        }
    };
    let integral = quadrature::integrate(integrand, lower, upper, BARRIER_QUAD_TOL)?;
    Ok((-rate * t1).exp() * integral)
}

/// Where the barrier sits relative to the spot being priced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BarrierLevel {
    Fixed(f64),
    /// A fraction of whatever spot is priced, so the barrier moves with `x`.
    Proportional(f64),
}

impl BarrierLevel {
    pub fn at(self, spot: f64) -> f64 {
        match self {
            BarrierLevel::Fixed(b) => b,
            BarrierLevel::Proportional(f) => f * spot,
        }
    }
}

/// Barrier price with delta and gamma from Richardson-extrapolated central
/// differences (steps `1e-3·x` and `5e-4·x` for delta, `1e-2·x` and
/// `5e-3·x` for gamma).
pub fn barrier_oracle(params: &TwoStepGbmParams, level: BarrierLevel, strike: f64) -> Result<OracleResult> {
    let x = params.spot;
    let price_at = |s: f64| barrier_price_only(&params.with_spot(s), level.at(s), strike);
    let centre = price_at(x)?;
    let first = |h: f64| -> Result<f64> { Ok((price_at(x + h)? - price_at(x - h)?) / (2.0 * h)) };
    let second = |h: f64| -> Result<f64> { Ok((price_at(x + h)? - 2.0 * centre + price_at(x - h)?) / (h * h)) };
    let (h1, h2) = (1e-3 * x, 5e-4 * x);
    let delta = (4.0 * first(h2)? - first(h1)?) / 3.0;
    let (g1, g2) = (1e-2 * x, 5e-3 * x);
    let gamma = (4.0 * second(g2)? - second(g1)?) / 3.0;
    Ok(OracleResult::scalar(centre, delta, gamma))
}

/// Barrier oracle with a fixed barrier level.
pub fn barrier_price(params: &TwoStepGbmParams, barrier: f64, strike: f64) -> Result<OracleResult> {
    barrier_oracle(params, BarrierLevel::Fixed(barrier), strike)
}

/// Richardson-extrapolated central first difference from steps `h` and `h/2`.
pub fn richardson_first<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

/// Richardson-extrapolated central second difference from steps `h` and `h/2`.
pub fn richardson_second<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let fx = f(x);
    let central = |h: f64| (f(x + h) - 2.0 * fx + f(x - h)) / (h * h);
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

/// Weighted sum of Black-Scholes calls.
pub fn portfolio_gamma(x: f64, legs: &[CallLeg], r: f64, vol: f64, t: f64) -> Result<OracleResult> {
    let mut total = OracleResult::scalar(0.0, 0.0, 0.0);
    for leg in legs {
        let c = bs_call(x, leg.strike, r, vol, t)?;
        total.price += leg.weight * c.price;
        total.delta[0] += leg.weight * c.delta[0];
        total.gamma = Some(total.gamma.unwrap_or(0.0) + leg.weight * c.gamma.unwrap_or(0.0));
    }
    Ok(total)
}
