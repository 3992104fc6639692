//! Differential training loss and its parameter gradient.
//!
//! Per sample the loss is `c_v (f̂−y)² + c_d Σⱼ(∂ⱼf̂−δⱼ)² + c_g (∂²f̂−γ)²` with
//! `c_v = w_v/B`, `c_d = w_d/(B·d)`, `c_g = w_g/B`. The gradient is an exact
//! batched reverse sweep through the value pass, the adjoint (input-gradient)
//! pass and the forward second-order tangent pass.

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::{logistic, softplus, NetworkParams};
use crate::error::{DmlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub const VALUE_ONLY: Self = Self { value: 1.0, delta: 0.0, gamma: 0.0 };

    pub fn new(value: f64, delta: f64, gamma: f64) -> Result<Self> {
        let w = Self { value, delta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.value, self.delta, self.gamma];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DmlError::Config(format!(
                "loss weights must be non-negative and sum to 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// A mini-batch in normalised units.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `B × d`.
    pub inputs: Array2<f64>,
    pub values: Array1<f64>,
    /// `B × d`.
    pub deltas: Option<Array2<f64>>,
    pub gammas: Option<Array1<f64>>,
    /// Per-component multipliers on the squared delta residuals; uniform
    /// when absent.
    pub delta_weights: Option<Array1<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, params: &NetworkParams, weights: &LossWeights) -> Result<()> {
        weights.validate()?;
        let (b, d) = self.inputs.dim();
        if b == 0 {
            return Err(DmlError::InvalidInput("empty batch".into()));
        }
        if d != params.input_dim() {
            return Err(DmlError::InvalidInput(format!(
                "batch has {d} inputs, network takes {}",
                params.input_dim()
            )));
        }
        if self.values.len() != b {
            return Err(DmlError::InvalidInput("value labels do not match batch size".into()));
        }
        if weights.delta > 0.0 {
            match &self.deltas {
                Some(g) if g.dim() == (b, d) => {}
                Some(_) => return Err(DmlError::InvalidInput("delta labels have the wrong shape".into())),
                None => return Err(DmlError::InvalidInput("delta weight set but batch has no delta labels".into())),
            }
        }
        if self.delta_weights.as_ref().is_some_and(|w| w.len() != d || w.iter().any(|v| !(*v >= 0.0))) {
            return Err(DmlError::InvalidInput("delta weights need one non-negative entry per input".into()));
        }
        if weights.gamma > 0.0 {
            if d != 1 {
                return Err(DmlError::InvalidInput("gamma loss needs a one-dimensional input".into()));
            }
            match &self.gammas {
                Some(g) if g.len() == b => {}
                Some(_) => return Err(DmlError::InvalidInput("gamma labels have the wrong length".into())),
                None => return Err(DmlError::InvalidInput("gamma weight set but batch has no gamma labels".into())),
            }
        }
        Ok(())
    }
}

/// Forward quantities kept for the reverse sweep. Index `l` runs over layer
/// inputs `0 … L−1`; entry 0 is the identity-activated input.
struct Tape {
    activated: Vec<Array2<f64>>,
    slope: Vec<Array2<f64>>,
    curve: Vec<Array2<f64>>,
    third: Vec<Array2<f64>>,
    output: Array1<f64>,
}

fn forward_tape(params: &NetworkParams, x: &Array2<f64>) -> Tape {
    let depth = params.depth();
    let (b, d) = x.dim();
    let mut tape = Tape {
        activated: vec![x.clone()],
        slope: vec![Array2::ones((b, d))],
        curve: vec![Array2::zeros((b, d))],
        third: vec![Array2::zeros((b, d))],
        output: Array1::zeros(b),
    };
    for l in 0..depth {
        let layer = &params.layers[l];
        let z = tape.activated[l].dot(&layer.weights) + &layer.bias;
        if l + 1 == depth {
            tape.output = z.column(0).to_owned();
        } else {
            let sig = z.mapv(logistic);
            tape.activated.push(z.mapv(softplus));
            tape.curve.push(sig.mapv(|s| s * (1.0 - s)));
            tape.third.push(sig.mapv(|s| s * (1.0 - s) * (1.0 - 2.0 * s)));
            tape.slope.push(sig);
        }
    }
    tape
}

/// Adjoint pass: `ybar[l]` for `l = 0 … L` and `u[l] = ybar[l+1] Wᵀ`.
struct AdjointPass {
    ybar: Vec<Array2<f64>>,
    u: Vec<Array2<f64>>,
}

fn adjoint_pass(params: &NetworkParams, tape: &Tape) -> AdjointPass {
    let depth = params.depth();
    let b = tape.output.len();
    let mut ybar = vec![Array2::zeros((0, 0)); depth + 1];
    let mut u = vec![Array2::zeros((0, 0)); depth];
    ybar[depth] = Array2::ones((b, 1));
    for l in (0..depth).rev() {
        u[l] = ybar[l + 1].dot(&params.layers[l].weights.t());
        ybar[l] = &u[l] * &tape.slope[l];
    }
    AdjointPass { ybar, u }
}

/// Second-order input tangents for a scalar input: `t[l] = dzₗ/dx`,
/// `s[l] = d²zₗ/dx²`, with `p[l] = g′∘t`, `q[l] = g″∘t² + g′∘s`.
struct TangentPass {
    t: Vec<Array2<f64>>,
    s: Vec<Array2<f64>>,
    p: Vec<Array2<f64>>,
    q: Vec<Array2<f64>>,
    second: Array1<f64>,
}

fn tangent_pass(params: &NetworkParams, tape: &Tape) -> TangentPass {
    let depth = params.depth();
    let b = tape.output.len();
    let mut pass = TangentPass {
        t: vec![Array2::ones((b, 1))],
        s: vec![Array2::zeros((b, 1))],
        p: Vec::with_capacity(depth),
        q: Vec::with_capacity(depth),
        second: Array1::zeros(b),
    };
    for l in 0..depth {
        let t = &pass.t[l];
        let s = &pass.s[l];
        let p = &tape.slope[l] * t;
        let q = &tape.curve[l] * &(t * t) + &tape.slope[l] * s;
        let w = &params.layers[l].weights;
        pass.t.push(p.dot(w));
        pass.s.push(q.dot(w));
        pass.p.push(p);
        pass.q.push(q);
    }
    pass.second = pass.s[depth].column(0).to_owned();
    pass
}

struct Evaluation {
    tape: Tape,
    adjoint: Option<AdjointPass>,
    tangent: Option<TangentPass>,
    loss: f64,
    value_seed: Array1<f64>,
    delta_seed: Option<Array2<f64>>,
    gamma_seed: Option<Array1<f64>>,
}

fn evaluate(params: &NetworkParams, batch: &Batch, weights: &LossWeights) -> Result<Evaluation> {
    batch.check(params, weights)?;
    let (b, d) = batch.inputs.dim();
    let bf = b as f64;
    let tape = forward_tape(params, &batch.inputs);

    let cv = weights.value / bf;
    let resid = &tape.output - &batch.values;
    let mut loss = cv * resid.dot(&resid);
    let value_seed = resid * (2.0 * cv);

    let mut adjoint = None;
    let mut delta_seed = None;
    if weights.delta > 0.0 {
        let pass = adjoint_pass(params, &tape);
        let cd = weights.delta / (bf * d as f64);
        let resid = &pass.ybar[0] - batch.deltas.as_ref().expect("checked");
        let weighted = match &batch.delta_weights {
            Some(w) => &resid * w,
            None => resid.clone(),
        };
        loss += cd * (&weighted * &resid).sum();
        delta_seed = Some(weighted * (2.0 * cd));
        adjoint = Some(pass);
    }

    let mut tangent = None;
    let mut gamma_seed = None;
    if weights.gamma > 0.0 {
        let pass = tangent_pass(params, &tape);
        let cg = weights.gamma / bf;
        let resid = &pass.second - batch.gammas.as_ref().expect("checked");
        loss += cg * resid.dot(&resid);
        gamma_seed = Some(resid * (2.0 * cg));
        tangent = Some(pass);
    }

    Ok(Evaluation { tape, adjoint, tangent, loss, value_seed, delta_seed, gamma_seed })
}

pub fn loss(params: &NetworkParams, batch: &Batch, weights: &LossWeights) -> Result<f64> {
    Ok(evaluate(params, batch, weights)?.loss)
}

/// Loss and its gradient with respect to every weight and bias.
pub fn parameter_gradient(
    params: &NetworkParams,
    batch: &Batch,
    weights: &LossWeights,
) -> Result<(f64, NetworkParams)> {
    let eval = evaluate(params, batch, weights)?;
    let depth = params.depth();
    let b = batch.len();
    let tape = &eval.tape;
    let mut grad = params.zeros_like();
    // Adjoints of the pre-activations zₗ, l = 1 … L (index 0 unused).
    let mut zhat: Vec<Array2<f64>> = (0..=depth)
        .map(|l| if l == 0 { Array2::zeros((0, 0)) } else { Array2::zeros((b, params.layers[l - 1].weights.ncols())) })
        .collect();

    if let (Some(pass), Some(seed)) = (&eval.adjoint, &eval.delta_seed) {
        // yhat is the adjoint of ybar[l-1] entering step l.
        let mut yhat = seed.clone();
        for l in 1..=depth {
            let uhat = if l == 1 {
                yhat.clone()
            } else {
                let k = l - 1;
                Zip::from(&mut zhat[k])
                    .and(&yhat)
                    .and(&pass.u[k])
                    .and(&tape.curve[k])
                    .for_each(|zh, &y, &u, &c| *zh += y * u * c);
                &yhat * &tape.slope[k]
            };
            let w = &params.layers[l - 1].weights;
            grad.layers[l - 1].weights += &uhat.t().dot(&pass.ybar[l]);
            if l < depth {
                yhat = uhat.dot(w);
            }
        }
    }

    if let (Some(pass), Some(seed)) = (&eval.tangent, &eval.gamma_seed) {
        let mut s_hat = seed.clone().insert_axis(Axis(1));
        let mut t_hat: Array2<f64> = Array2::zeros((b, 1));
        for l in (0..depth).rev() {
            let w = &params.layers[l].weights;
            grad.layers[l].weights += &(pass.q[l].t().dot(&s_hat) + pass.p[l].t().dot(&t_hat));
            if l == 0 {
                break;
            }
            let q_hat = s_hat.dot(&w.t());
            let p_hat = t_hat.dot(&w.t());
            let (t, s) = (&pass.t[l], &pass.s[l]);
            let (slope, curve, third) = (&tape.slope[l], &tape.curve[l], &tape.third[l]);
            t_hat = &p_hat * slope + &(&q_hat * curve * t * 2.0);
            s_hat = &q_hat * slope;
            let slope_hat = &p_hat * t + &(&q_hat * s);
            Zip::from(&mut zhat[l])
                .and(&slope_hat)
                .and(&q_hat)
                .and(t)
                .and(curve)
                .and(third)
                .for_each(|zh, &gh, &qh, &t, &c, &th| *zh += gh * c + qh * t * t * th);
        }
    }

    zhat[depth].column_mut(0).scaled_add(1.0, &eval.value_seed);
    for l in (1..=depth).rev() {
        let layer = &params.layers[l - 1];
        let g = &mut grad.layers[l - 1];
        g.weights += &tape.activated[l - 1].t().dot(&zhat[l]);
        g.bias += &zhat[l].sum_axis(Axis(0));
        if l > 1 {
            let back = zhat[l].dot(&layer.weights.t()) * &tape.slope[l - 1];
            zhat[l - 1] += &back;
        }
    }

    Ok((eval.loss, grad))
}
