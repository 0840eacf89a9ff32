use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rot2d::{accel_jac_a, damped_jac_s};
use super::{check_action, check_finite, semi_implicit_step, velocity_noise_q, Dynamics, SimConfig, Transition, TransitionFlags};
use crate::error::Result;
use crate::model::{ActionVec, EnvModel, StateVec};

/// Position clip applied after each step, componentwise.
pub const POSITION_CLIP: f64 = 5.0;
/// Velocity clip applied after each step, componentwise.
pub const VELOCITY_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleWellParams {
    /// Tilt `δ` of the dynamics potential; the reward never sees it.
    pub delta: f64,
}

/// Double-well potential `U₀ = (x² − 1)² + y²`, tilted by `δx` in the drift
/// only. Reflection `x ↦ −x` is exact when `δ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    pub cfg: SimConfig,
    pub params: DoubleWellParams,
}

impl DoubleWell {
    pub fn new(cfg: SimConfig, params: DoubleWellParams) -> Self {
        Self { cfg, params }
    }

    /// `∇U_dyn(x, y) = (4x(x² − 1) + δ, 2y)`.
    pub fn grad_potential(&self, x: f64, y: f64) -> [f64; 2] {
        [4.0 * x * (x * x - 1.0) + self.params.delta, 2.0 * y]
    }

    /// `U₀(x, y)`, independent of `δ`.
    pub fn base_potential(x: f64, y: f64) -> f64 {
        (x * x - 1.0).powi(2) + y * y
    }
}

impl EnvModel for DoubleWell {
    fn name(&self) -> &str {
        "doublewell"
    }
    fn dim_s(&self) -> usize {
        4
    }
    fn dim_a(&self) -> usize {
        2
    }
    fn drift(&self, s: &StateVec, a: &ActionVec) -> DVector<f64> {
        let lam = self.cfg.lambda_damp;
        let g = self.grad_potential(s[0], s[1]);
        DVector::from_vec(vec![
            s[2],
            s[3],
            -g[0] - lam * s[2] + a[0],
            -g[1] - lam * s[3] + a[1],
        ])
    }
    fn diffusion_q(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        velocity_noise_q(self.cfg.sigma)
    }
    fn reward(&self, s: &StateVec, _a: &ActionVec) -> f64 {
        -Self::base_potential(s[0], s[1]) - 0.1 * (s[2] * s[2] + s[3] * s[3])
    }
    fn grad_s_reward(&self, s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        let x = s[0];
        DVector::from_vec(vec![
            -4.0 * x * (x * x - 1.0),
            -2.0 * s[1],
            -0.2 * s[2],
            -0.2 * s[3],
        ])
    }
    fn grad_a_reward(&self, _s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn jac_s_drift(&self, s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        let mut j = damped_jac_s(self.cfg.lambda_damp);
        let x = s[0];
        j[(2, 0)] = -(12.0 * x * x - 4.0);
        j[(3, 1)] = -2.0;
        j
    }
    fn jac_a_drift(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        accel_jac_a()
    }
    fn dir_s_q(&self, _s: &StateVec, _a: &ActionVec, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(4, 4)
    }
    fn dir_a_q(&self, _s: &StateVec, _a: &ActionVec, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(4, 4)
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
}

impl Dynamics for DoubleWell {
    fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition> {
        check_action(a)?;
        let mut s_next = semi_implicit_step(self, &self.cfg, s, a, xi);
        check_finite(s, a, &s_next)?;
        let mut clipped = false;
        for (i, lim) in [POSITION_CLIP, POSITION_CLIP, VELOCITY_CLIP, VELOCITY_CLIP]
            .into_iter()
            .enumerate()
        {
            let c = s_next[i].clamp(-lim, lim);
            clipped |= c != s_next[i];
            s_next[i] = c;
        }
        Ok(Transition {
            reward: self.reward(s, a),
            s: s.clone(),
            a: a.clone(),
            s_next,
            flags: TransitionFlags {
                clipped,
                ..Default::default()
            },
        })
    }
}
