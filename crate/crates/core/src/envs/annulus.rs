use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rot2d::{accel_jac_a, damped_drift, damped_jac_s, radial_reward, radial_reward_grad};
use super::{check_action, check_finite, semi_implicit_step, velocity_noise_q, Dynamics, SimConfig, Transition, TransitionFlags};
use crate::error::{Error, Result};
use crate::model::{ActionVec, EnvModel, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnulusParams {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for AnnulusParams {
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 2.0,
        }
    }
}

impl AnnulusParams {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        let p = Self { r_min, r_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::invalid(
                "annulus",
                format!("need 0 < r_min < r_max, got [{}, {}]", self.r_min, self.r_max),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r = p[0].hypot(p[1]);
        r >= self.r_min && r <= self.r_max
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RetractOutcome {
    pub projected: bool,
    /// The position was the origin and was sent to `(r_min, 0)`.
    pub degenerate: bool,
}

/// Projects the position block `s[0..2]` onto the annulus by radial rescaling
/// and, when it moved, removes the radial velocity component `v ← v − u⟨v,u⟩`
/// (`u = p/‖p‖`) from `s[2..4]` if the state carries one.
pub fn annulus_retract(s: &mut StateVec, params: &AnnulusParams) -> RetractOutcome {
    let r = s[0].hypot(s[1]);
    let mut out = RetractOutcome::default();
    let target = if r == 0.0 {
        out.degenerate = true;
        s[0] = params.r_min;
        s[1] = 0.0;
        params.r_min
    } else if r < params.r_min {
        params.r_min
    } else if r > params.r_max {
        params.r_max
    } else {
        return out;
    };
    out.projected = true;
    if !out.degenerate {
        let k = target / r;
        s[0] *= k;
        s[1] *= k;
        // the rescaled radius can miss the boundary by an ulp
        let nudge = if target == params.r_max { 1.0 - f64::EPSILON } else { 1.0 + f64::EPSILON };
        while !params.contains([s[0], s[1]]) {
            s[0] *= nudge;
            s[1] *= nudge;
        }
    }
    if s.len() >= 4 {
        let rn = s[0].hypot(s[1]);
        let (ux, uy) = (s[0] / rn, s[1] / rn);
        let radial = s[2] * ux + s[3] * uy;
        s[2] -= radial * ux;
        s[3] -= radial * uy;
    }
    out
}

/// Rot2D dynamics with the position confined to `r_min ≤ ‖p‖ ≤ r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostConstraintRot2D {
    pub cfg: SimConfig,
    pub annulus: AnnulusParams,
}

impl PostConstraintRot2D {
    pub fn new(cfg: SimConfig, annulus: AnnulusParams) -> Self {
        Self { cfg, annulus }
    }

    pub fn is_feasible(&self, s: &StateVec) -> bool {
        self.annulus.contains([s[0], s[1]])
    }

    pub fn retract(&self, s: &mut StateVec) -> RetractOutcome {
        annulus_retract(s, &self.annulus)
    }
}

impl EnvModel for PostConstraintRot2D {
    fn name(&self) -> &str {
        "postconstraint"
    }
    fn dim_s(&self) -> usize {
        4
    }
    fn dim_a(&self) -> usize {
        2
    }
    fn drift(&self, s: &StateVec, a: &ActionVec) -> DVector<f64> {
        damped_drift(s, a, self.cfg.lambda_damp)
    }
    fn diffusion_q(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        velocity_noise_q(self.cfg.sigma)
    }
    fn reward(&self, s: &StateVec, _a: &ActionVec) -> f64 {
        radial_reward(s)
    }
    fn grad_s_reward(&self, s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        radial_reward_grad(s)
    }
    fn grad_a_reward(&self, _s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn jac_s_drift(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        damped_jac_s(self.cfg.lambda_damp)
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
    fn in_domain(&self, s: &StateVec, a: &ActionVec) -> bool {
        self.is_feasible(s) && a.iter().all(|x| x.abs() <= 1.0)
    }
}

impl Dynamics for PostConstraintRot2D {
    fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition> {
        check_action(a)?;
        let mut s_next = semi_implicit_step(self, &self.cfg, s, a, xi);
        check_finite(s, a, &s_next)?;
        let outcome = self.retract(&mut s_next);
        Ok(Transition {
            reward: self.reward(s, a),
            s: s.clone(),
            a: a.clone(),
            s_next,
            flags: TransitionFlags {
                projected: outcome.projected,
                ..Default::default()
            },
        })
    }
}
