use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_action, check_finite, Dynamics, SimConfig, Transition, TransitionFlags};
use crate::error::Result;
use crate::model::{ActionVec, EnvModel, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OverdampedPotential {
    /// No force; reward `−‖s‖²`. Rotation invariant.
    Radial,
    /// Force `−∇(U₀ + δx)`, reward `−U₀` with `U₀ = (x² − 1)² + y²`.
    DoubleWell { delta: f64 },
}

/// First-order planar diffusion `ds = (a − ∇U(s)) dt + σ dW` on `ℝ²`.
///
/// A two-dimensional member of the controlled-diffusion class, small enough
/// to discretize on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Overdamped2D {
    pub cfg: SimConfig,
    pub potential: OverdampedPotential,
}

impl Overdamped2D {
    pub fn radial(cfg: SimConfig) -> Self {
        Self {
            cfg,
            potential: OverdampedPotential::Radial,
        }
    }

    pub fn double_well(cfg: SimConfig, delta: f64) -> Self {
        Self {
            cfg,
            potential: OverdampedPotential::DoubleWell { delta },
        }
    }

    fn force(&self, x: f64, y: f64) -> [f64; 2] {
        match self.potential {
            OverdampedPotential::Radial => [0.0, 0.0],
            OverdampedPotential::DoubleWell { delta } => {
                [-(4.0 * x * (x * x - 1.0) + delta), -2.0 * y]
            }
        }
    }
}

impl EnvModel for Overdamped2D {
    fn name(&self) -> &str {
        match self.potential {
            OverdampedPotential::Radial => "overdamped_radial",
            OverdampedPotential::DoubleWell { .. } => "overdamped_doublewell",
        }
    }
    fn dim_s(&self) -> usize {
        2
    }
    fn dim_a(&self) -> usize {
        2
    }
    fn drift(&self, s: &StateVec, a: &ActionVec) -> DVector<f64> {
        let f = self.force(s[0], s[1]);
        DVector::from_vec(vec![a[0] + f[0], a[1] + f[1]])
    }
    fn diffusion_q(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * (self.cfg.sigma * self.cfg.sigma)
    }
    fn reward(&self, s: &StateVec, _a: &ActionVec) -> f64 {
        let (x, y) = (s[0], s[1]);
        match self.potential {
            OverdampedPotential::Radial => -(x * x + y * y),
            OverdampedPotential::DoubleWell { .. } => -((x * x - 1.0).powi(2) + y * y),
        }
    }
    fn grad_s_reward(&self, s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        let (x, y) = (s[0], s[1]);
        match self.potential {
            OverdampedPotential::Radial => DVector::from_vec(vec![-2.0 * x, -2.0 * y]),
            OverdampedPotential::DoubleWell { .. } => {
                DVector::from_vec(vec![-4.0 * x * (x * x - 1.0), -2.0 * y])
            }
        }
    }
    fn grad_a_reward(&self, _s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn jac_s_drift(&self, s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        match self.potential {
            OverdampedPotential::Radial => DMatrix::zeros(2, 2),
            OverdampedPotential::DoubleWell { .. } => {
                let x = s[0];
                DMatrix::from_row_slice(2, 2, &[-(12.0 * x * x - 4.0), 0.0, 0.0, -2.0])
            }
        }
    }
    fn jac_a_drift(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
    fn dir_s_q(&self, _s: &StateVec, _a: &ActionVec, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }
    fn dir_a_q(&self, _s: &StateVec, _a: &ActionVec, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
}

impl Dynamics for Overdamped2D {
    fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Plain Euler–Maruyama: `s' = s + Δt b(s, a) + σ √Δt ξ`.
    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition> {
        check_action(a)?;
        let dt = self.cfg.dt;
        let noise = self.cfg.sigma * dt.sqrt();
        let b = self.drift(s, a);
        let s_next = DVector::from_vec(vec![
            s[0] + dt * b[0] + noise * xi[0],
            s[1] + dt * b[1] + noise * xi[1],
        ]);
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
