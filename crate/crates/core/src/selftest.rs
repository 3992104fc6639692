//! Built-in statistical and numerical self-checks.
//!
//! The unbiasedness suite compares 10⁶-sample label means against closed-form
//! or independent Monte Carlo oracles at 3 standard errors. The gradient suite
//! compares the network's analytic derivatives against finite differences on
//! randomly drawn small networks.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::Result;
use crate::labels::{lrm_delta, lrm_gamma, pathwise_delta, pw_lr_gamma};
use crate::market::{
    BachelierBasketParams, EulerParams, GbmParams, GbmSde, MarketModel, ScalarSde, TwoStepGbmParams,
};
use crate::montecarlo::{estimate, estimate_many, Estimate};
use crate::network::{
    forward, input_gradient, input_second_derivative, loss, parameter_gradient, Batch, LossWeights, NetworkConfig,
    NetworkParams,
};
use crate::oracles::{self, richardson_first, richardson_second};
use crate::payoffs::{CallLeg, Contract, PayoffSpec};
use crate::rng::{Purpose, RngStream, StreamFactory};

pub const UNBIASEDNESS_SAMPLES: usize = 1_000_000;
pub const N_STANDARD_ERRORS: f64 = 3.0;
pub const GRADIENT_NETWORKS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn mc_check(name: &str, est: Estimate, target: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed: est.within(target, N_STANDARD_ERRORS),
        detail: format!("mean {:.6e} vs oracle {:.6e}, z = {:+.2}", est.mean, target, est.z_score(target)),
    }
}

fn draw(model: &MarketModel, rng: &mut RngStream, normals: &mut [f64]) -> Result<crate::market::PathDraw> {
    rng.fill_normals(normals);
    model.simulate(normals)
}

/// Sampler for a scalar label; simulation errors surface as NaN, which fails
/// the check.
fn scalar_label<F>(model: MarketModel, f: F) -> impl Fn(&mut RngStream) -> f64 + Sync
where
    F: Fn(&crate::market::PathDraw) -> Result<f64> + Sync,
{
    move |rng| {
        let mut normals = vec![0.0; model.normals_per_path()];
        draw(&model, rng, &mut normals).and_then(|d| f(&d)).unwrap_or(f64::NAN)
    }
}

const T: f64 = 1.0 / 3.0;

/// Seven label estimators against their oracles.
pub fn unbiasedness_suite(n: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();

    // Pathwise vanilla-call delta.
    let gbm = GbmParams::new(100.0, 0.03, 0.25, 1.0)?;
    let spec = PayoffSpec::new(Contract::VanillaCall { strike: 105.0 }, 0.03, 1.0)?;
    let model = MarketModel::Gbm(gbm);
    let est = estimate(n, seed, 1, scalar_label(model.clone(), |d| Ok(pathwise_delta(d, &spec, &model)?[0])));
    out.push(mc_check("pathwise call delta", est, oracles::bs_call(100.0, 105.0, 0.03, 0.25, 1.0)?.delta[0]));

    // LRM digital delta and gamma.
    let gbm = GbmParams::new(100.0, 0.0, 0.2, T)?;
    let spec = PayoffSpec::new(Contract::Digital { strike: 100.0 }, 0.0, T)?;
    let model = MarketModel::Gbm(gbm);
    let digital = oracles::bs_digital(100.0, 100.0, 0.0, 0.2, T)?;
    let est = estimate(n, seed, 2, scalar_label(model.clone(), |d| Ok(lrm_delta(d, &spec, &model)?[0])));
    out.push(mc_check("LRM digital delta", est, digital.delta[0]));
    let gbm95 = GbmParams::new(95.0, 0.0, 0.2, T)?;
    let est = estimate(n, seed, 3, scalar_label(MarketModel::Gbm(gbm95), |d| lrm_gamma(d, &spec, &gbm95)));
    out.push(mc_check("LRM digital gamma", est, oracles::bs_digital(95.0, 100.0, 0.0, 0.2, T)?.gamma.unwrap_or(0.0)));

    // LRM basket component deltas, uneven spots, vols and weights.
    let d = 20;
    let spots: Vec<f64> = (0..d).map(|i| 95.0 + i as f64 * 0.5).collect();
    let vols: Vec<f64> = (0..d).map(|i| 15.0 + i as f64).collect();
    let raw: Vec<f64> = (0..d).map(|i| 1.0 + (i % 4) as f64).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let basket = BachelierBasketParams::new(spots, vols, weights.clone(), T)?;
    let strike = basket.basket_mean() + 0.3 * basket.basket_std();
    let spec = PayoffSpec::new(Contract::BasketDigital { strike, weights }, 0.01, T)?;
    let oracle = oracles::bachelier_basket_digital(&basket, strike, 0.01)?;
    let model = MarketModel::BachelierBasket(basket);
    let ests = estimate_many(n, d, seed, 4, |rng, buf| {
        let mut normals = vec![0.0; d];
        match draw(&model, rng, &mut normals).and_then(|p| lrm_delta(&p, &spec, &model)) {
            Ok(v) => buf.copy_from_slice(&v),
            Err(_) => buf.fill(f64::NAN),
        }
    });
    let worst = ests
        .iter()
        .zip(&oracle.delta)
        .map(|(e, t)| e.z_score(*t))
        .fold(0.0f64, |a, z| if z.abs() > a.abs() || z.is_nan() { z } else { a });
    out.push(CheckOutcome {
        name: format!("LRM basket component deltas (d={d})"),
        passed: ests.iter().zip(&oracle.delta).all(|(e, t)| e.within(*t, N_STANDARD_ERRORS)),
        detail: format!("worst component z = {worst:+.2}"),
    });

    // LRM barrier delta.
    let two = TwoStepGbmParams::new(100.0, 0.0, 0.2, T / 2.0, T)?;
    let spec = PayoffSpec::new(Contract::BarrierCall { strike: 100.0, barrier: 85.0 }, 0.0, T)?;
    let model = MarketModel::TwoStepGbm(two);
    let est = estimate(n, seed, 5, scalar_label(model.clone(), |d| Ok(lrm_delta(d, &spec, &model)?[0])));
    out.push(mc_check("LRM barrier delta", est, oracles::barrier_price(&two, 85.0, 100.0)?.delta[0]));

    // PW-LR portfolio gamma.
    let legs = vec![
        CallLeg { weight: 1.0, strike: 0.85 },
        CallLeg { weight: -1.5, strike: 0.9 },
        CallLeg { weight: 0.75, strike: 1.15 },
    ];
    let gbm = GbmParams::new(1.0, 0.0, 0.2, T)?;
    let spec = PayoffSpec::new(Contract::CallPortfolio { legs: legs.clone() }, 0.0, T)?;
    let est = estimate(n, seed, 6, scalar_label(MarketModel::Gbm(gbm), |d| pw_lr_gamma(d, &spec, &gbm)));
    out.push(mc_check("PW-LR portfolio gamma", est, oracles::portfolio_gamma(1.0, &legs, 0.0, 0.2, T)?.gamma.unwrap_or(0.0)));

    // Euler-GBM LRM call delta against the pathwise delta of the same scheme.
    let sde: Arc<dyn ScalarSde> = Arc::new(GbmSde { rate: 0.0, vol: 0.2 });
    let euler = EulerParams::new(100.0, 64, T / 64.0, sde.clone())?;
    let spec = PayoffSpec::new(Contract::VanillaCall { strike: 100.0 }, 0.0, T)?;
    let model = MarketModel::Euler(euler.clone());
    let lrm = estimate(n, seed, 7, scalar_label(model.clone(), |d| Ok(lrm_delta(d, &spec, &model)?[0])));
    let pathwise = estimate(n, seed, 8, |rng| euler_pathwise_call_delta(&euler, 100.0, rng));
    let combined = (lrm.std_err.powi(2) + pathwise.std_err.powi(2)).sqrt();
    let z = (lrm.mean - pathwise.mean) / combined;
    out.push(CheckOutcome {
        name: "Euler-GBM LRM call delta".into(),
        passed: z.abs() <= N_STANDARD_ERRORS,
        detail: format!("LRM {:.6e} vs pathwise-on-Euler {:.6e}, z = {z:+.2}", lrm.mean, pathwise.mean),
    });
    Ok(out)
}

/// Pathwise delta of a call under the Euler scheme, propagating the tangent
/// `Y = ∂X/∂x` alongside the path.
pub fn euler_pathwise_call_delta(p: &EulerParams, strike: f64, rng: &mut RngStream) -> f64 {
    let sq = p.dt.sqrt();
    let (mut x, mut y) = (p.spot, 1.0);
    for _ in 0..p.n_steps {
        let xi = rng.normal();
        let step_y = 1.0 + p.sde.drift_deriv(x) * p.dt + p.sde.diffusion_deriv(x) * sq * xi;
        x += p.sde.drift(x) * p.dt + p.sde.diffusion(x) * sq * xi;
        y *= step_y;
    }
    if x > strike {
        y
    } else {
        0.0
    }
}

fn rel_err(analytic: f64, fd: f64, floor: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(floor)
}

fn random_network(rng: &mut RngStream) -> Result<NetworkParams> {
    let cfg = NetworkConfig {
        input_dim: 1 + rng.below(3),
        hidden_layers: 1 + rng.below(3),
        hidden_units: 2 + rng.below(5),
    };
    let mut p = NetworkParams::init(&cfg, rng)?;
    for v in p.iter_mut() {
        *v += rng.uniform_in(-0.5, 0.5);
    }
    Ok(p)
}

/// Worst relative errors of the input gradient, the input second derivative
/// and the parameter gradient over `n_networks` random networks and batches.
pub fn gradient_errors(n_networks: usize, seed: u64) -> Result<[f64; 3]> {
    let factory = StreamFactory::new(seed, 0);
    let mut worst = [0.0f64; 3];
    for i in 0..n_networks {
        let mut rng = factory.stream(Purpose::Check, i as u64);
        let p = random_network(&mut rng)?;
        let d = p.input_dim();
        let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();

        let (_, acts) = forward(&p, &x)?;
        let grad = input_gradient(&p, &acts);
        for (j, g) in grad.iter().enumerate() {
            let f = |v: f64| {
                let mut y = x.clone();
                y[j] = v;
                forward(&p, &y).map(|r| r.0).unwrap_or(f64::NAN)
            };
            worst[0] = worst[0].max(rel_err(*g, richardson_first(f, x[j], 1e-3), 1e-6));
        }

        let mut p1 = p.clone();
        if d != 1 {
            p1.layers[0].weights = p.layers[0].weights.slice(ndarray::s![0..1, ..]).to_owned();
        }
        let f = |v: f64| forward(&p1, &[v]).map(|r| r.0).unwrap_or(f64::NAN);
        let second = input_second_derivative(&p1, x[0])?;
        worst[1] = worst[1].max(rel_err(second, richardson_second(f, x[0], 1e-2), 1e-5));

        let b = 1 + rng.below(5);
        let batch = Batch {
            inputs: Array2::from_shape_fn((b, 1), |_| rng.normal()),
            values: Array1::from_shape_fn(b, |_| rng.normal()),
            deltas: Some(Array2::from_shape_fn((b, 1), |_| rng.normal())),
            gammas: Some(Array1::from_shape_fn(b, |_| rng.normal())),
            delta_weights: None,
        };
        let raw = [rng.uniform(), rng.uniform(), rng.uniform()];
        let total: f64 = raw.iter().sum();
        let w = LossWeights { value: raw[0] / total, delta: raw[1] / total, gamma: raw[2] / total };
        let (_, pg) = parameter_gradient(&p1, &batch, &w)?;
        let base = p1.to_vec();
        for (k, g) in pg.iter().enumerate() {
            let at = |v: f64| {
                let mut q = p1.clone();
                *q.iter_mut().nth(k).expect("index in range") = v;
                loss(&q, &batch, &w).unwrap_or(f64::NAN)
            };
            let h = 1e-3 * base[k].abs().max(1.0);
            worst[2] = worst[2].max(rel_err(*g, richardson_first(at, base[k], h), 1e-6));
        }
    }
    Ok(worst)
}

pub fn gradient_suite(n_networks: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let worst = gradient_errors(n_networks, seed)?;
    let names = ["input_gradient", "input_second_derivative", "parameter_gradient"];
    let tols = [1e-5, 1e-4, 1e-4];
    Ok(names
        .iter()
        .zip(worst.iter().zip(tols))
        .map(|(name, (w, tol))| CheckOutcome {
            name: format!("{name} vs finite differences ({n_networks} networks)"),
            passed: *w < tol,
            detail: format!("worst relative error {w:.2e} (tolerance {tol:.0e})"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_suite_small() {
        for o in gradient_suite(10, 3).unwrap() {
            assert!(o.passed, "{o}");
        }
    }

    #[test]
    fn euler_pathwise_is_linear_for_gbm() {
        let sde: Arc<dyn ScalarSde> = Arc::new(GbmSde { rate: 0.0, vol: 0.2 });
        let p = EulerParams::new(100.0, 8, 0.01, sde).unwrap();
        let mut a = StreamFactory::new(0, 0).stream(Purpose::Check, 0);
        let mut b = a.clone();
        let y = euler_pathwise_call_delta(&p, 0.0, &mut a);
        let mut x = 100.0;
        for _ in 0..8 {
            x *= 1.0 + 0.2 * 0.1 * b.normal();
        }
        assert!((y - x / 100.0).abs() < 1e-12);
    }
}
