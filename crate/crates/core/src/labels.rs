//! Differential training labels: pathwise, smoothed-pathwise and
//! likelihood-ratio deltas, plus pathwise-LRM and LRM gammas.
//!
//! Every estimator here is a per-path quantity whose expectation is the
//! corresponding sensitivity of the price, except pathwise deltas on
//! discontinuous payoffs, which are kept because their bias is what the
//! experiments measure.

use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::market::{EulerParams, GbmParams, MarketModel, PathDraw};
use crate::payoffs::{basket_value, single, two_dates, Contract, PayoffKind, PayoffSpec};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    None,
    Pathwise,
    PathwiseSmoothed,
    Lrm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKind {
    None,
    PwLr,
    Lrm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMethod {
    pub delta: DeltaKind,
    pub gamma: GammaKind,
    /// Ramp width in units of `σ√T · reference spot`; only meaningful for
    /// smoothed-pathwise labels. The payoff spec carries the absolute width.
    pub smoothing_eps_multiplier: Option<f64>,
}

impl LabelMethod {
    pub const STANDARD: LabelMethod = LabelMethod::new(DeltaKind::None, GammaKind::None);

    pub const fn new(delta: DeltaKind, gamma: GammaKind) -> Self {
        Self { delta, gamma, smoothing_eps_multiplier: None }
    }

    /// Checks that every requested estimator is defined for this payoff and
    /// model pairing.
    pub fn validate(&self, spec: &PayoffSpec, model: &MarketModel) -> Result<()> {
        let kind = spec.kind();
        let unsupported = |what: &str| {
            Err(DmlError::Config(format!("{what} labels are not available for {kind:?} under {}", model_name(model))))
        };
        match self.delta {
            DeltaKind::None => {}
            DeltaKind::Pathwise => {
                let ok = matches!(
                    (model, kind),
                    (MarketModel::Gbm(_), PayoffKind::VanillaCall | PayoffKind::Digital | PayoffKind::CallPortfolio)
                        | (MarketModel::BachelierBasket(_), PayoffKind::BasketDigital)
                        | (MarketModel::TwoStepGbm(_), PayoffKind::BarrierCall)
                );
                if !ok {
                    return unsupported("pathwise delta");
                }
            }
            DeltaKind::PathwiseSmoothed => {
                if !matches!((model, kind), (MarketModel::Gbm(_), PayoffKind::SmoothedDigital)) {
                    return unsupported("smoothed pathwise delta");
                }
            }
            DeltaKind::Lrm => {
                if !lrm_supported(model, kind) {
                    return unsupported("likelihood-ratio delta");
                }
            }
        }
        match self.gamma {
            GammaKind::None => {}
            GammaKind::PwLr => {
                if !matches!(
                    (model, kind),
                    (MarketModel::Gbm(_), PayoffKind::VanillaCall | PayoffKind::CallPortfolio)
                ) {
                    return unsupported("pathwise-LRM gamma");
                }
            }
            GammaKind::Lrm => {
                if !matches!(model, MarketModel::Gbm(_)) || kind == PayoffKind::BasketDigital || kind == PayoffKind::BarrierCall {
                    return unsupported("likelihood-ratio gamma");
                }
            }
        }
        Ok(())
    }
}

fn model_name(model: &MarketModel) -> &'static str {
    match model {
        MarketModel::Gbm(_) => "GBM",
        MarketModel::TwoStepGbm(_) => "two-date GBM",
        MarketModel::BachelierBasket(_) => "Bachelier basket",
        MarketModel::Euler(_) => "Euler scheme",
    }
}

fn single_date(kind: PayoffKind) -> bool {
    matches!(
        kind,
        PayoffKind::VanillaCall | PayoffKind::Digital | PayoffKind::SmoothedDigital | PayoffKind::CallPortfolio
    )
}

fn lrm_supported(model: &MarketModel, kind: PayoffKind) -> bool {
    match model {
        MarketModel::Gbm(_) | MarketModel::Euler(_) => single_date(kind),
        MarketModel::BachelierBasket(_) => kind == PayoffKind::BasketDigital,
        MarketModel::TwoStepGbm(_) => kind == PayoffKind::BarrierCall,
    }
}

/// One training record. Delta and gamma labels are averages over the same
/// inner paths as the value label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub input: Vec<f64>,
    pub value: f64,
    pub delta: Option<Vec<f64>>,
    pub gamma: Option<f64>,
}

#[inline]
fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Derivative of the discounted payoff with the normals held fixed.
pub fn pathwise_delta(draw: &PathDraw, spec: &PayoffSpec, model: &MarketModel) -> Result<Vec<f64>> {
    let df = spec.discount();
    match (model, &spec.contract) {
        (MarketModel::Gbm(p), Contract::VanillaCall { strike }) => {
            let s = single(draw)?;
            Ok(vec![df * indicator(s > *strike) * s / p.spot])
        }
        (MarketModel::Gbm(_), Contract::Digital { .. }) => Ok(vec![0.0]),
        (MarketModel::Gbm(p), Contract::CallPortfolio { legs }) => {
            let s = single(draw)?;
            let itm: f64 = legs.iter().map(|l| l.weight * indicator(s > l.strike)).sum();
            Ok(vec![df * itm * s / p.spot])
        }
        (MarketModel::BachelierBasket(p), Contract::BasketDigital { .. }) => Ok(vec![0.0; p.dim()]),
        (MarketModel::TwoStepGbm(p), Contract::BarrierCall { strike, barrier }) => {
            let (s1, s2) = two_dates(draw)?;
            Ok(vec![df * indicator(s1 > *barrier && s2 > *strike) * s2 / p.spot])
        }
        _ => Err(DmlError::Config(format!(
            "pathwise delta is not defined for {:?} under {}",
            spec.kind(),
            model_name(model)
        ))),
    }
}

/// Pathwise derivative of the ramp-smoothed digital.
pub fn pathwise_smoothed_delta(draw: &PathDraw, spec: &PayoffSpec, model: &GbmParams) -> Result<f64> {
    let Contract::SmoothedDigital { strike, width } = spec.contract else {
        return Err(DmlError::Config(format!(
            "smoothed pathwise delta needs a smoothed digital, got {:?}",
            spec.kind()
        )));
    };
    if !(width > 0.0) {
        return Err(DmlError::Config(format!("smoothing width must be positive, got {width}")));
    }
    let s = single(draw)?;
    let on_ramp = s > strike - 0.5 * width && s < strike + 0.5 * width;
    Ok(spec.discount() * indicator(on_ramp) / width * s / model.spot)
}

/// `∂ log p(S_T; x) / ∂x = ξ / (x σ √T)` for the lognormal terminal density.
pub fn lrm_score_gbm(draw: &PathDraw, model: &GbmParams) -> f64 {
    draw.normals[0] / (model.spot * model.total_vol())
}

/// `(∂ₓ log p)² + ∂ₓ² log p` for the lognormal terminal density, as a
/// function of the normal that generated the draw:
/// `(ξ² − 1 − ξ σ√T) / (x² σ² T)`.
pub fn lrm_gamma_score(xi: f64, spot: f64, vol: f64, maturity: f64) -> f64 {
    let sd = vol * maturity.sqrt();
    (xi * xi - 1.0 - xi * sd) / (spot * spot * sd * sd)
}

/// Score of the Euler path density with respect to the initial state.
///
/// Only the first transition `X₁ | x ~ N(x + μ(x)Δt, σ(x)²Δt)` depends on
/// `x`, which gives `ξ₁(1 + μ'(x)Δt)/(σ(x)√Δt) + (σ'(x)/σ(x))(ξ₁² − 1)`.
pub fn euler_lrm_score(draw: &PathDraw, model: &EulerParams) -> Result<f64> {
    let x = model.spot;
    let diff = model.sde.diffusion(x);
    if diff == 0.0 || !diff.is_finite() {
        return Err(DmlError::SingularDiffusion { state: x });
    }
    let xi = *draw
        .normals
        .first()
        .ok_or_else(|| DmlError::InvalidInput("Euler draw without normals".into()))?;
    let location = xi * (1.0 + model.sde.drift_deriv(x) * model.dt) / (diff * model.dt.sqrt());
    let scale = model.sde.diffusion_deriv(x) / diff * (xi * xi - 1.0);
    Ok(location + scale)
}

/// Likelihood-ratio delta: payoff times the score of the simulated state.
///
/// For the basket the components are `payoff · ξᵢ / (σᵢ √T)`; for the
/// barrier only the first increment carries the spot, so the score uses
/// `ξ₁` and `T₁`.
pub fn lrm_delta(draw: &PathDraw, spec: &PayoffSpec, model: &MarketModel) -> Result<Vec<f64>> {
    if !lrm_supported(model, spec.kind()) {
        return Err(DmlError::Config(format!(
            "likelihood-ratio delta is not defined for {:?} under {}",
            spec.kind(),
            model_name(model)
        )));
    }
    let payoff = spec.discounted_payoff(draw)?;
    match model {
        MarketModel::Gbm(p) => Ok(vec![payoff * lrm_score_gbm(draw, p)]),
        MarketModel::BachelierBasket(p) => {
            let sqrt_t = p.maturity.sqrt();
            Ok(draw.normals.iter().zip(&p.vols).map(|(xi, vol)| payoff * xi / (vol * sqrt_t)).collect())
        }
        MarketModel::TwoStepGbm(p) => Ok(vec![payoff * lrm_score_gbm(draw, &p.first_leg())]),
        MarketModel::Euler(p) => Ok(vec![payoff * euler_lrm_score(draw, p)?]),
    }
}

/// Hybrid gamma: differentiate the call payoff pathwise once, then apply
/// the likelihood ratio. Per leg `1{S>K} e^{-rT} (S/x²)(ξ/(σ√T) − 1)`.
pub fn pw_lr_gamma(draw: &PathDraw, spec: &PayoffSpec, model: &GbmParams) -> Result<f64> {
    let s = single(draw)?;
    let xi = draw.normals[0];
    let bracket = xi / model.total_vol() - 1.0;
    let itm = match &spec.contract {
        Contract::VanillaCall { strike } => indicator(s > *strike),
        Contract::CallPortfolio { legs } => legs.iter().map(|l| l.weight * indicator(s > l.strike)).sum(),
        _ => {
            return Err(DmlError::Config(format!(
                "pathwise-LRM gamma needs a continuous call payoff, got {:?}",
                spec.kind()
            )))
        }
    };
    Ok(spec.discount() * itm * s / (model.spot * model.spot) * bracket)
}

/// Likelihood-ratio gamma: payoff times `∇ₓ²p / p`.
pub fn lrm_gamma(draw: &PathDraw, spec: &PayoffSpec, model: &GbmParams) -> Result<f64> {
    let payoff = spec.discounted_payoff(draw)?;
    Ok(payoff * lrm_gamma_score(draw.normals[0], model.spot, model.vol, model.maturity))
}

/// Replaces a componentwise basket delta by its average, spread back over the
/// assets in proportion to the basket weights.
///
/// The basket price depends on the spots only through `Σ wᵢ xᵢ`, so the true
/// delta is `c · w`; `avg · wᵢ / w̄` is an unbiased estimate of each
/// component with the variance of the averaged estimator.
pub fn basket_average_label(components: &[f64], weights: &[f64]) -> Vec<f64> {
    let d = components.len() as f64;
    let avg = components.iter().sum::<f64>() / d;
    let w_bar = weights.iter().sum::<f64>() / d;
    weights.iter().map(|w| avg * w / w_bar).collect()
}

/// Draws `k` inner paths from spot `x` and averages payoff, delta and gamma
/// labels over them.
pub fn make_labeled_sample(
    x: &[f64],
    k: usize,
    method: &LabelMethod,
    model: &MarketModel,
    spec: &PayoffSpec,
    rng: &mut RngStream,
) -> Result<LabeledSample> {
    if k == 0 {
        return Err(DmlError::InvalidInput("need at least one inner path per sample".into()));
    }
    let model = model.with_spots(x)?;
    method.validate(spec, &model)?;
    let dim = x.len();
    let want_gamma = method.gamma != GammaKind::None;
    if want_gamma && dim != 1 {
        return Err(DmlError::Config("gamma labels are only defined for one-dimensional inputs".into()));
    }
    let gbm = match &model {
        MarketModel::Gbm(p) => Some(*p),
        _ => None,
    };

    let mut normals = vec![0.0; model.normals_per_path()];
    let mut value = 0.0;
    let mut delta = vec![0.0; dim];
    let mut gamma = 0.0;
    for _ in 0..k {
        rng.fill_normals(&mut normals);
        let draw = model.simulate(&normals)?;
        value += spec.discounted_payoff(&draw)?;
        let d = match method.delta {
            DeltaKind::None => None,
            DeltaKind::Pathwise => Some(pathwise_delta(&draw, spec, &model)?),
            DeltaKind::PathwiseSmoothed => {
                Some(vec![pathwise_smoothed_delta(&draw, spec, gbm.as_ref().expect("validated GBM model"))?])
            }
            DeltaKind::Lrm => Some(lrm_delta(&draw, spec, &model)?),
        };
        if let Some(d) = d {
            delta.iter_mut().zip(&d).for_each(|(acc, v)| *acc += v);
        }
        gamma += match method.gamma {
            GammaKind::None => 0.0,
            GammaKind::PwLr => pw_lr_gamma(&draw, spec, gbm.as_ref().expect("validated GBM model"))?,
            GammaKind::Lrm => lrm_gamma(&draw, spec, gbm.as_ref().expect("validated GBM model"))?,
        };
    }
    let kf = k as f64;
    let delta = (method.delta != DeltaKind::None).then(|| {
        let mean: Vec<f64> = delta.iter().map(|v| v / kf).collect();
        match (&spec.contract, method.delta) {
            (Contract::BasketDigital { weights, .. }, DeltaKind::Lrm) => basket_average_label(&mean, weights),
            _ => mean,
        }
    });
    Ok(LabeledSample {
        input: x.to_vec(),
        value: value / kf,
        delta,
        gamma: want_gamma.then_some(gamma / kf),
    })
}

/// The basket value `Σ wᵢ Sᵢ` of a basket draw.
pub fn basket_level(draw: &PathDraw, weights: &[f64]) -> f64 {
    basket_value(weights, &draw.terminals)
}
