//! Discounted payoffs evaluated on simulated paths.

use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::market::PathDraw;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallLeg {
    pub weight: f64,
    pub strike: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Contract {
    VanillaCall { strike: f64 },
    Digital { strike: f64 },
    /// Digital whose step is replaced by a linear ramp of total `width`
    /// centred on the strike.
    SmoothedDigital { strike: f64, width: f64 },
    BasketDigital { strike: f64, weights: Vec<f64> },
    /// Down-and-out call: knocked out if the first monitored value is at or
    /// below the barrier.
    BarrierCall { strike: f64, barrier: f64 },
    CallPortfolio { legs: Vec<CallLeg> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    VanillaCall,
    Digital,
    SmoothedDigital,
    BasketDigital,
    BarrierCall,
    CallPortfolio,
}

impl PayoffKind {
    /// Payoffs that are Lipschitz in the terminal values.
    pub fn is_continuous(self) -> bool {
        matches!(self, PayoffKind::VanillaCall | PayoffKind::SmoothedDigital | PayoffKind::CallPortfolio)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffSpec {
    pub contract: Contract,
    pub rate: f64,
    /// Payment date, used for discounting.
    pub maturity: f64,
}

impl PayoffSpec {
    pub fn new(contract: Contract, rate: f64, maturity: f64) -> Result<Self> {
        let spec = Self { contract, rate, maturity };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DmlError::InvalidInput(m));
        if !(self.maturity > 0.0) || !self.rate.is_finite() {
            return bad(format!("payoff needs maturity > 0 and finite rate, got T={} r={}", self.maturity, self.rate));
        }
        match &self.contract {
            Contract::VanillaCall { strike } | Contract::Digital { strike } if *strike <= 0.0 => {
                bad(format!("strike must be positive, got {strike}"))
            }
            Contract::SmoothedDigital { strike, width } => {
                if *strike <= 0.0 {
                    bad(format!("strike must be positive, got {strike}"))
                } else if !(*width > 0.0) {
                    bad(format!("smoothing width must be positive, got {width}"))
                } else {
                    Ok(())
                }
            }
            Contract::BasketDigital { strike, weights } => {
                if *strike <= 0.0 {
                    bad(format!("strike must be positive, got {strike}"))
                } else if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
                    bad("basket weights must be non-empty and finite".into())
                } else {
                    Ok(())
                }
            }
            Contract::BarrierCall { strike, barrier } => {
                if *strike <= 0.0 || *barrier < 0.0 {
                    bad(format!("barrier call needs strike > 0 and barrier >= 0, got K={strike} B={barrier}"))
                } else {
                    Ok(())
                }
            }
            Contract::CallPortfolio { legs } => {
                if legs.is_empty() || legs.iter().any(|l| l.strike <= 0.0 || !l.weight.is_finite()) {
                    bad("portfolio legs need positive strikes and finite weights".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> PayoffKind {
        match self.contract {
            Contract::VanillaCall { .. } => PayoffKind::VanillaCall,
            Contract::Digital { .. } => PayoffKind::Digital,
            Contract::SmoothedDigital { .. } => PayoffKind::SmoothedDigital,
            Contract::BasketDigital { .. } => PayoffKind::BasketDigital,
            Contract::BarrierCall { .. } => PayoffKind::BarrierCall,
            Contract::CallPortfolio { .. } => PayoffKind::CallPortfolio,
        }
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    /// Discounted payout on one simulated path.
    pub fn discounted_payoff(&self, draw: &PathDraw) -> Result<f64> {
        let df = self.discount();
        let value = match &self.contract {
            Contract::VanillaCall { strike } => call(single(draw)?, *strike),
            Contract::Digital { strike } => digital(single(draw)?, *strike),
            Contract::SmoothedDigital { strike, width } => ramp(single(draw)?, *strike, *width),
            Contract::BasketDigital { strike, weights } => {
                if draw.terminals.len() != weights.len() {
                    return Err(DmlError::InvalidInput(format!(
                        "basket payoff over {} assets given {} terminals",
                        weights.len(),
                        draw.terminals.len()
                    )));
                }
                digital(basket_value(weights, &draw.terminals), *strike)
            }
            Contract::BarrierCall { strike, barrier } => {
                let (s1, s2) = two_dates(draw)?;
                if s1 > *barrier {
                    call(s2, *strike)
                } else {
                    0.0
                }
            }
            Contract::CallPortfolio { legs } => {
                let s = single(draw)?;
                legs.iter().map(|l| l.weight * call(s, l.strike)).sum()
            }
        };
        Ok(df * value)
    }
}

pub(crate) fn basket_value(weights: &[f64], terminals: &[f64]) -> f64 {
    weights.iter().zip(terminals).map(|(w, s)| w * s).sum()
}

/// Terminal value of a single-date payoff. Multi-step Euler paths pay on
/// their last point.
pub(crate) fn single(draw: &PathDraw) -> Result<f64> {
    draw.terminals
        .last()
        .copied()
        .ok_or_else(|| DmlError::InvalidInput("path draw has no terminal value".into()))
}

pub(crate) fn two_dates(draw: &PathDraw) -> Result<(f64, f64)> {
    match draw.terminals.as_slice() {
        [s1, s2] => Ok((*s1, *s2)),
        other => Err(DmlError::InvalidInput(format!(
            "barrier payoff needs two monitoring dates, got {}",
            other.len()
        ))),
    }
}

#[inline]
fn call(s: f64, k: f64) -> f64 {
    (s - k).max(0.0)
}

#[inline]
fn digital(s: f64, k: f64) -> f64 {
    if s > k {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn ramp(s: f64, k: f64, width: f64) -> f64 {
    ((s - (k - 0.5 * width)) / width).clamp(0.0, 1.0)
}
