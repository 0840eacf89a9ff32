//! Determining-equation residuals for affine generator pairs.

use nalgebra::{DMatrix, DVector};

use crate::generator::GeneratorPair;
use crate::model::{ActionVec, EnvModel, StateVec};

/// `X(s)·∇_s r + Y(a)·∇_a r`.
pub fn residual_reward(model: &dyn EnvModel, gen: &GeneratorPair, s: &StateVec, a: &ActionVec) -> f64 {
    gen.state_field(s).dot(&model.grad_s_reward(s, a)) + gen.action_field(a).dot(&model.grad_a_reward(s, a))
}

/// `∇_s b · X − A_X b + ∇_a b · Y`.
///
/// The Itô correction `½ Δ_Q X` is identically zero for affine `X`.
pub fn residual_drift(model: &dyn EnvModel, gen: &GeneratorPair, s: &StateVec, a: &ActionVec) -> DVector<f64> {
    let x = gen.state_field(s);
    let y = gen.action_field(a);
    model.jac_s_drift(s, a) * x - &gen.a_x * model.drift(s, a) + model.jac_a_drift(s, a) * y
}

/// `∇_s Q[X] − A_X Q − Q A_Xᵀ + ∇_a Q[Y]`.
pub fn residual_diffusion(model: &dyn EnvModel, gen: &GeneratorPair, s: &StateVec, a: &ActionVec) -> DMatrix<f64> {
    let x = gen.state_field(s);
    let y = gen.action_field(a);
    let q = model.diffusion_q(s, a);
    let aq = &gen.a_x * &q;
    model.dir_s_q(s, a, &x) - &aq - aq.transpose() + model.dir_a_q(s, a, &y)
}

/// All three residuals at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub reward: f64,
    pub drift: DVector<f64>,
    pub diffusion: DMatrix<f64>,
}

pub fn residuals(model: &dyn EnvModel, gen: &GeneratorPair, s: &StateVec, a: &ActionVec) -> Residuals {
    Residuals {
        reward: residual_reward(model, gen, s, a),
        drift: residual_drift(model, gen, s, a),
        diffusion: residual_diffusion(model, gen, s, a),
    }
}

/// Residuals over a batch of samples.
#[derive(Debug, Clone, Default)]
pub struct ResidualBatch {
    pub reward: Vec<f64>,
    pub drift: Vec<DVector<f64>>,
    pub diffusion: Vec<DMatrix<f64>>,
}

impl ResidualBatch {
    pub fn evaluate(model: &dyn EnvModel, gen: &GeneratorPair, batch: &[(StateVec, ActionVec)]) -> Self {
        let mut out = Self::default();
        for (s, a) in batch {
            let r = residuals(model, gen, s, a);
            out.reward.push(r.reward);
            out.drift.push(r.drift);
            out.diffusion.push(r.diffusion);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }

    /// `(E‖R_b‖², E‖R_Q‖_F², E|R_r|²)`.
    pub fn mean_squares(&self) -> (f64, f64, f64) {
        let n = self.len().max(1) as f64;
        (
            self.drift.iter().map(|r| r.norm_squared()).sum::<f64>() / n,
            self.diffusion.iter().map(|r| r.norm_squared()).sum::<f64>() / n,
            self.reward.iter().map(|r| r * r).sum::<f64>() / n,
        )
    }

    /// Largest absolute entry over all residuals.
    pub fn max_abs(&self) -> f64 {
        let r = self.reward.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let b = self.drift.iter().map(|x| x.amax()).fold(0.0, f64::max);
        let q = self.diffusion.iter().map(|x| x.amax()).fold(0.0, f64::max);
        r.max(b).max(q)
    }
}
