use nalgebra::{DMatrix, DVector};

use crate::envs::Transition;
use crate::error::{ensure_dim, Error, Result};
use crate::model::{ActionVec, StateVec};

/// A candidate state/action transformation `(g, h)`.
pub trait Transform: Send + Sync {
    fn dim_s(&self) -> usize;
    fn dim_a(&self) -> usize;

    fn map_state(&self, s: &StateVec) -> Result<StateVec>;
    fn map_action(&self, a: &ActionVec) -> Result<ActionVec>;

    /// `g(s)` plus whether a feasibility retraction fired on the way.
    fn map_state_flagged(&self, s: &StateVec) -> Result<(StateVec, bool)> {
        Ok((self.map_state(s)?, false))
    }

    /// `h(a)` plus whether a feasibility retraction fired on the way.
    fn map_action_flagged(&self, a: &ActionVec) -> Result<(ActionVec, bool)> {
        Ok((self.map_action(a)?, false))
    }

    /// `∂g/∂s` by central differences with step `1e-5`.
    fn state_jacobian(&self, s: &StateVec) -> Result<DMatrix<f64>> {
        fd_state_jacobian(self, s)
    }
}

pub(crate) fn fd_state_jacobian<T: Transform + ?Sized>(t: &T, s: &StateVec) -> Result<DMatrix<f64>> {
    const STEP: f64 = 1e-5;
    let d = s.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut x = s.clone();
    for j in 0..d {
        x[j] = s[j] + STEP;
        let up = t.map_state(&x)?;
        x[j] = s[j] - STEP;
        let dn = t.map_state(&x)?;
        x[j] = s[j];
        jac.set_column(j, &((up - dn) / (2.0 * STEP)));
    }
    Ok(jac)
}

/// Affine transform `g(s) = G s + g₀`, `h(a) = H a + h₀` in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransform {
    pub state: DMatrix<f64>,
    pub state_offset: DVector<f64>,
    pub action: DMatrix<f64>,
    pub action_offset: DVector<f64>,
}

/// Block-diagonal rotation by `angle` on each consecutive coordinate pair.
pub fn block_rotation(n: usize, angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    let mut out = DMatrix::identity(n, n);
    for b in 0..n / 2 {
        let i = 2 * b;
        out[(i, i)] = c;
        out[(i, i + 1)] = -s;
        out[(i + 1, i)] = s;
        out[(i + 1, i + 1)] = c;
    }
    out
}

impl LinearTransform {
    pub fn linear(state: DMatrix<f64>, action: DMatrix<f64>) -> Result<Self> {
        ensure_dim("state map columns", state.nrows(), state.ncols())?;
        ensure_dim("action map columns", action.nrows(), action.ncols())?;
        Ok(Self {
            state_offset: DVector::zeros(state.nrows()),
            action_offset: DVector::zeros(action.nrows()),
            state,
            action,
        })
    }

    pub fn identity(d: usize, m: usize) -> Self {
        Self::linear(DMatrix::identity(d, d), DMatrix::identity(m, m)).expect("square")
    }

    /// Simultaneous rotation of every planar block of state and action.
    pub fn rotation(d: usize, m: usize, angle: f64) -> Result<Self> {
        if d % 2 != 0 || m % 2 != 0 {
            return Err(Error::invalid("rotation", "state and action dimensions must be even"));
        }
        Self::linear(block_rotation(d, angle), block_rotation(m, angle))
    }

    /// `x ↦ −x` on the first coordinate of every planar block
    /// (`diag(−1, 1, −1, 1)` for `d = 4`, `diag(−1, 1)` for actions).
    pub fn reflection_x(d: usize, m: usize) -> Self {
        let flip = |n: usize| DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| if i % 2 == 0 { -1.0 } else { 1.0 }));
        Self::linear(flip(d), flip(m)).expect("square")
    }
}

impl Transform for LinearTransform {
    fn dim_s(&self) -> usize {
        self.state.nrows()
    }
    fn dim_a(&self) -> usize {
        self.action.nrows()
    }
    fn map_state(&self, s: &StateVec) -> Result<StateVec> {
        ensure_dim("state", self.dim_s(), s.len())?;
        Ok(&self.state * s + &self.state_offset)
    }
    fn map_action(&self, a: &ActionVec) -> Result<ActionVec> {
        ensure_dim("action", self.dim_a(), a.len())?;
        Ok(&self.action * a + &self.action_offset)
    }
    fn state_jacobian(&self, s: &StateVec) -> Result<DMatrix<f64>> {
        ensure_dim("state", self.dim_s(), s.len())?;
        Ok(self.state.clone())
    }
}

/// `(g(s), h(a), g(s'), r)`; flags are copied and `boundary_augmented` is set
/// when a retraction fired on `s` or `s'`.
pub fn transform_transition(t: &Transition, transform: &dyn Transform) -> Result<Transition> {
    let (s, f1) = transform.map_state_flagged(&t.s)?;
    let (s_next, f2) = transform.map_state_flagged(&t.s_next)?;
    let (a, f3) = transform.map_action_flagged(&t.a)?;
    let mut flags = t.flags;
    flags.boundary_augmented |= f1 || f2 || f3;
    Ok(Transition {
        s,
        a,
        s_next,
        reward: t.reward,
        flags,
    })
}
