//! Synthetic controlled diffusions and their seeded simulators.
//!
//! The planar environments share the state `(x, y, v_x, v_y)`, the action
//! `(a_x, a_y) ∈ [-1, 1]²` and the semi-implicit Euler–Maruyama update
//!
//! ```text
//! v' = v + Δt f(p, v, a) + σ √Δt ξ,   p' = p + Δt v',   ξ ~ N(0, I₂)
//! ```
//!
//! with noise entering the velocity channels only.

mod annulus;
mod doublewell;
mod overdamped;
mod rot2d;
mod symnav;

pub use annulus::{annulus_retract, AnnulusParams, PostConstraintRot2D, RetractOutcome};
pub use doublewell::{DoubleWell, DoubleWellParams};
pub use overdamped::{Overdamped2D, OverdampedPotential};
pub use rot2d::Rot2D;
pub use symnav::{symnav_map, symnav_observe, Obstacle, SymNav, SymNavMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionVec, EnvModel, StateVec};
use crate::rng::{normals, seeded, SimRng};

/// Simulation defaults shared by the synthetic environments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub sigma: f64,
    pub lambda_damp: f64,
    pub horizon: usize,
    pub seed: u64,
    pub noise_enabled: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            sigma: 0.02,
            lambda_damp: 0.1,
            horizon: 200,
            seed: 0,
            noise_enabled: true,
        }
    }
}

impl SimConfig {
    pub fn symnav_default() -> Self {
        Self {
            horizon: 400,
            ..Self::default()
        }
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise_enabled: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !self.lambda_damp.is_finite() {
            return Err(Error::invalid("lambda_damp", "must be finite"));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionFlags {
    pub projected: bool,
    pub collided: bool,
    pub success: bool,
    pub clipped: bool,
    pub boundary_augmented: bool,
}

impl TransitionFlags {
    /// Pipe-joined names of the raised flags, `none` when empty.
    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.projected, "projected"),
            (self.collided, "collided"),
            (self.success, "success"),
            (self.clipped, "clipped"),
            (self.boundary_augmented, "boundary_augmented"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            "none".to_owned()
        } else {
            names.join("|")
        }
    }
}

/// One `(s, a, s', r)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: StateVec,
    pub a: ActionVec,
    pub s_next: StateVec,
    pub reward: f64,
    pub flags: TransitionFlags,
}

/// A model that can also be stepped in discrete time.
pub trait Dynamics: EnvModel {
    fn config(&self) -> &SimConfig;

    /// Number of standard normals consumed per step.
    fn noise_dim(&self) -> usize {
        2
    }

    /// One step driven by the given standard-normal draws.
    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition>;
}

pub(crate) fn check_action(a: &ActionVec) -> Result<()> {
    for (index, &value) in a.iter().enumerate() {
        if !(value.abs() <= 1.0) {
            return Err(Error::ActionOutOfBounds { index, value });
        }
    }
    Ok(())
}

pub(crate) fn check_finite(s: &StateVec, a: &ActionVec, out: &StateVec) -> Result<()> {
    if out.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteStep {
            s: s.iter().copied().collect(),
            a: a.iter().copied().collect(),
        })
    }
}

/// Semi-implicit update of a planar second-order model whose drift is
/// `(v, f(p, v, a))`.
pub(crate) fn semi_implicit_step(
    model: &dyn EnvModel,
    cfg: &SimConfig,
    s: &StateVec,
    a: &ActionVec,
    xi: &[f64],
) -> StateVec {
    let b = model.drift(s, a);
    let dt = cfg.dt;
    let noise = cfg.sigma * dt.sqrt();
    let vx = s[2] + dt * b[2] + noise * xi[0];
    let vy = s[3] + dt * b[3] + noise * xi[1];
    DVector::from_vec(vec![s[0] + dt * vx, s[1] + dt * vy, vx, vy])
}

/// `diag(0, 0, σ², σ²)`.
pub(crate) fn velocity_noise_q(sigma: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(4, 4);
    q[(2, 2)] = sigma * sigma;
    q[(3, 3)] = sigma * sigma;
    q
}

/// Simulator owning its RNG; one instance per thread.
pub struct Simulator<E> {
    env: E,
    rng: SimRng,
}

impl<E: Dynamics> Simulator<E> {
    /// Seeds from `env.config().seed`.
    pub fn new(env: E) -> Self {
        let rng = seeded(env.config().seed);
        Self { env, rng }
    }

    pub fn with_seed(env: E, seed: u64) -> Self {
        Self {
            env,
            rng: seeded(seed),
        }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn step(&mut self, s: &StateVec, a: &ActionVec) -> Result<Transition> {
        let k = self.env.noise_dim();
        let xi = if self.env.config().noise_enabled {
            normals(&mut self.rng, k)
        } else {
            vec![0.0; k]
        };
        self.env.step_with_noise(s, a, &xi)
    }

    /// Rolls out `steps` transitions under `policy(state, step_index)`.
    /// Stops early after a transition flagged `success`.
    pub fn rollout<P>(&mut self, s0: &StateVec, steps: usize, mut policy: P) -> Result<Vec<Transition>>
    where
        P: FnMut(&StateVec, usize) -> ActionVec,
    {
        let mut out = Vec::with_capacity(steps);
        let mut s = s0.clone();
        for k in 0..steps {
            let a = policy(&s, k);
            let t = self.step(&s, &a)?;
            s = t.s_next.clone();
            let done = t.flags.success;
            out.push(t);
            if done {
                break;
            }
        }
        Ok(out)
    }
}
