//! Penalized least-squares discovery loss and its closed-form gradient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::residuals::residuals;
use super::sampler::StateMoments;
use crate::error::{Error, Result};
use crate::generator::GeneratorPair;
use crate::model::{ActionVec, EnvModel, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_q: f64,
    pub lambda_r: f64,
    pub lambda_nrm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_q: 1.0,
            lambda_r: 1.0,
            lambda_nrm: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_q", self.lambda_q),
            ("lambda_r", self.lambda_r),
            ("lambda_nrm", self.lambda_nrm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where `E_ρS ‖X(s)‖²` in the normalization penalty comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormEstimate {
    /// Exact moments of the replay state marginal.
    #[default]
    Exact,
    /// Moments of the states in the current minibatch.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Residual part plus normalization penalty.
    pub total: f64,
    /// `mean(‖R_b‖² + λ_Q‖R_Q‖² + λ_r R_r²)`.
    pub residual: f64,
    /// `λ_nrm (E‖X‖² − 1)²`.
    pub normalization: f64,
    /// `E‖X‖²` under the moments used.
    pub field_sq_norm: f64,
}

fn check_batch(model: &dyn EnvModel, gen: &GeneratorPair, batch: &[(StateVec, ActionVec)]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "empty batch"));
    }
    crate::error::ensure_dim("generator state dimension", model.dim_s(), gen.dim_s())?;
    crate::error::ensure_dim("generator action dimension", model.dim_a(), gen.dim_a())?;
    Ok(())
}

/// Loss value only.
pub fn loss_value(
    model: &dyn EnvModel,
    gen: &GeneratorPair,
    batch: &[(StateVec, ActionVec)],
    weights: &LossWeights,
    moments: &StateMoments,
) -> Result<LossValue> {
    check_batch(model, gen, batch)?;
    let mut acc = 0.0;
    for (s, a) in batch {
        let r = residuals(model, gen, s, a);
        acc += r.drift.norm_squared() + weights.lambda_q * r.diffusion.norm_squared() + weights.lambda_r * r.reward * r.reward;
    }
    let residual = acc / batch.len() as f64;
    let m = moments.expected_sq_norm(&gen.a_x, &gen.c_x);
    let normalization = weights.lambda_nrm * (m - 1.0).powi(2);
    Ok(LossValue {
        total: residual + normalization,
        residual,
        normalization,
        field_sq_norm: m,
    })
}

/// Loss value and its exact gradient with respect to `(A_X, c_X, A_Y, c_Y)`,
/// returned as a `GeneratorPair` of partial derivatives.
///
/// Each residual is linear in the parameters, so every squared term is a
/// quadratic and the gradient is assembled from the residual and the model's
/// Jacobians at each sample.
pub fn loss_and_grad(
    model: &dyn EnvModel,
    gen: &GeneratorPair,
    batch: &[(StateVec, ActionVec)],
    weights: &LossWeights,
    moments: &StateMoments,
) -> Result<(LossValue, GeneratorPair)> {
    check_batch(model, gen, batch)?;
    let d = gen.dim_s();
    let m = gen.dim_a();
    let mut grad = GeneratorPair::zeros(d, m);
    let mut acc = 0.0;
    let (lq, lr) = (weights.lambda_q, weights.lambda_r);
    let constant_q = model.constant_diffusion();

    for (s, a) in batch {
        let x = gen.state_field(s);
        let y = gen.action_field(a);
        let b = model.drift(s, a);
        let js = model.jac_s_drift(s, a);
        let ja = model.jac_a_drift(s, a);
        let q = model.diffusion_q(s, a);
        let gs = model.grad_s_reward(s, a);
        let ga = model.grad_a_reward(s, a);

        let rb = &js * &x - &gen.a_x * &b + &ja * &y;
        let rr = x.dot(&gs) + y.dot(&ga);
        let aq = &gen.a_x * &q;
        let mut rq = -&aq - aq.transpose();
        if !constant_q {
            rq += model.dir_s_q(s, a, &x) + model.dir_a_q(s, a, &y);
        }
        acc += rb.norm_squared() + lq * rq.norm_squared() + lr * rr * rr;

        // drift term
        let jsr = js.transpose() * &rb;
        let jar = ja.transpose() * &rb;
        grad.a_x += 2.0 * (&jsr * s.transpose() - &rb * b.transpose());
        grad.c_x += 2.0 * &jsr;
        grad.a_y += 2.0 * (&jar * a.transpose());
        grad.c_y += 2.0 * &jar;

        // reward term
        let k = 2.0 * lr * rr;
        grad.a_x += k * (&gs * s.transpose());
        grad.c_x += k * &gs;
        grad.a_y += k * (&ga * a.transpose());
        grad.c_y += k * &ga;

        // diffusion term
        if lq != 0.0 {
            rq *= 2.0 * lq;
            grad.a_x -= &rq * &q + rq.transpose() * &q;
            if constant_q {
                continue;
            }
            let mut wx = DVector::zeros(d);
            for i in 0..d {
                let mut e = DVector::zeros(d);
                e[i] = 1.0;
                wx[i] = model.dir_s_q(s, a, &e).dot(&rq);
            }
            let mut wy = DVector::zeros(m);
            for i in 0..m {
                let mut e = DVector::zeros(m);
                e[i] = 1.0;
                wy[i] = model.dir_a_q(s, a, &e).dot(&rq);
            }
            grad.a_x += &wx * s.transpose();
            grad.c_x += wx;
            grad.a_y += &wy * a.transpose();
            grad.c_y += wy;
        }
    }

    let n = batch.len() as f64;
    let residual = acc / n;
    grad = grad.scaled(1.0 / n);

    let fm = moments.expected_sq_norm(&gen.a_x, &gen.c_x);
    let normalization = weights.lambda_nrm * (fm - 1.0).powi(2);
    // ∂E‖X‖²/∂(A, c) = 2 (A M₂ + c μᵀ, A μ + c)
    let (ga, gc) = moments.inner_grad(&gen.a_x, &gen.c_x);
    let k = 2.0 * weights.lambda_nrm * (fm - 1.0) * 2.0;
    grad.a_x += k * ga;
    grad.c_x += k * gc;

    Ok((
        LossValue {
            total: residual + normalization,
            residual,
            normalization,
            field_sq_norm: fm,
        },
        grad,
    ))
}

/// Moments for the normalization penalty under the chosen estimate.
pub fn penalty_moments(
    estimate: NormEstimate,
    exact: &StateMoments,
    batch: &[(StateVec, ActionVec)],
) -> Result<StateMoments> {
    match estimate {
        NormEstimate::Exact => Ok(exact.clone()),
        NormEstimate::Batch => StateMoments::from_samples(batch.iter().map(|x| &x.0)),
    }
}

/// Gram penalty `Σ_{i≠j} (E[X_i·X_j])²` over a family of generators and its
/// gradient with respect to each member's `(A_X, c_X)`.
pub fn gram_penalty(gens: &[GeneratorPair], moments: &StateMoments) -> (f64, Vec<(DMatrix<f64>, DVector<f64>)>) {
    let n = gens.len();
    let mut value = 0.0;
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = gens
        .iter()
        .map(|g| (DMatrix::zeros(g.dim_s(), g.dim_s()), DVector::zeros(g.dim_s())))
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (gi, gj) = (&gens[i], &gens[j]);
            let mij = moments.expected_inner(&gi.a_x, &gi.c_x, &gj.a_x, &gj.c_x);
            value += mij * mij;
            // the (i, j) and (j, i) terms are equal, so this accumulates 4 m_ij ∂m_ij
            let (da, dc) = moments.inner_grad(&gj.a_x, &gj.c_x);
            grads[i].0 += 4.0 * mij * da;
            grads[i].1 += 4.0 * mij * dc;
        }
    }
    (value, grads)
}
