use nalgebra::{DMatrix, DVector};

use super::{check_action, check_finite, semi_implicit_step, velocity_noise_q, Dynamics, SimConfig, Transition, TransitionFlags};
use crate::error::Result;
use crate::model::{ActionVec, EnvModel, StateVec};

/// Damped point mass with SO(2)-invariant drift `f = a − λv` and reward
/// `r = −‖p‖² − 0.1‖v‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rot2D {
    pub cfg: SimConfig,
}

impl Rot2D {
    pub fn new(cfg: SimConfig) -> Self {
        Self { cfg }
    }
}

pub(crate) fn damped_drift(s: &StateVec, a: &ActionVec, lambda: f64) -> DVector<f64> {
    DVector::from_vec(vec![
        s[2],
        s[3],
        a[0] - lambda * s[2],
        a[1] - lambda * s[3],
    ])
}

pub(crate) fn damped_jac_s(lambda: f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(4, 4);
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 2)] = -lambda;
    j[(3, 3)] = -lambda;
    j
}

pub(crate) fn accel_jac_a() -> DMatrix<f64> {
    let mut j = DMatrix::zeros(4, 2);
    j[(2, 0)] = 1.0;
    j[(3, 1)] = 1.0;
    j
}

pub(crate) fn radial_reward(s: &StateVec) -> f64 {
    -(s[0] * s[0] + s[1] * s[1]) - 0.1 * (s[2] * s[2] + s[3] * s[3])
}

pub(crate) fn radial_reward_grad(s: &StateVec) -> DVector<f64> {
    DVector::from_vec(vec![-2.0 * s[0], -2.0 * s[1], -0.2 * s[2], -0.2 * s[3]])
}

impl EnvModel for Rot2D {
    fn name(&self) -> &str {
        "rot2d"
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
}

impl Dynamics for Rot2D {
    fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition> {
        check_action(a)?;
        let s_next = semi_implicit_step(self, &self.cfg, s, a, xi);
        check_finite(s, a, &s_next)?;
        Ok(Transition {
            reward: self.reward(s, a),
            s: s.clone(),
            a: a.clone(),
            s_next,
            flags: TransitionFlags::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn reward_at_unit_position() {
        let m = Rot2D::new(SimConfig::default());
        assert_eq!(m.reward(&v(&[1.0, 0.0, 0.0, 0.0]), &v(&[0.0, 0.0])), -1.0);
    }

    #[test]
    fn origin_is_a_fixed_point() {
        let m = Rot2D::new(SimConfig::default());
        let z = v(&[0.0; 4]);
        assert_eq!(m.drift(&z, &v(&[0.0, 0.0])), v(&[0.0; 4]));
        assert_eq!(m.reward(&z, &v(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn drift_hand_value() {
        let m = Rot2D::new(SimConfig::default());
        let b = m.drift(&v(&[1.0, 0.0, 0.5, 0.0]), &v(&[0.0, 0.0]));
        assert_relative_eq!(b[0], 0.5);
        assert_relative_eq!(b[1], 0.0);
        assert_relative_eq!(b[2], -0.05);
        assert_relative_eq!(b[3], 0.0);
    }

    #[test]
    fn noiseless_step_hand_value() {
        let m = Rot2D::new(SimConfig::default().noiseless());
        let t = m
            .step_with_noise(&v(&[1.0, 0.0, 0.0, 0.0]), &v(&[1.0, 0.0]), &[0.0, 0.0])
            .unwrap();
        assert_relative_eq!(t.s_next[2], 0.05, epsilon = 1e-15);
        assert_relative_eq!(t.s_next[0], 1.0025, epsilon = 1e-15);
        assert_eq!(t.s_next[1], 0.0);
        assert_eq!(t.reward, -1.0);
    }

    #[test]
    fn rejects_out_of_box_action() {
        let m = Rot2D::new(SimConfig::default());
        let err = m
            .step_with_noise(&v(&[0.0; 4]), &v(&[1.5, 0.0]), &[0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, crate::Error::ActionOutOfBounds { index: 0, .. }));
    }
}
