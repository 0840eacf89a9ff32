//! Fixed-step RK4 exponentiation of affine generator fields.

use nalgebra::{DMatrix, DVector};

use super::transform::Transform;
use crate::envs::{annulus_retract, AnnulusParams};
use crate::error::{ensure_dim, Error, Result};
use crate::generator::GeneratorPair;
use crate::model::{ActionVec, StateVec};

/// Upper bound on integrator steps per flow.
pub const MAX_FLOW_STEPS: f64 = 1e6;

/// Feasibility projection applied after every accepted integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retraction {
    /// Radial projection of the position block onto an annulus, removing the
    /// radial velocity when it fires.
    Annulus(AnnulusParams),
    /// Componentwise clamp into `[lo, hi]`.
    Box { lo: f64, hi: f64 },
}

impl Retraction {
    /// The `[-1, 1]` action box.
    pub fn unit_box() -> Self {
        Retraction::Box { lo: -1.0, hi: 1.0 }
    }

    /// Applies in place; returns whether anything moved.
    pub fn apply(&self, x: &mut DVector<f64>) -> bool {
        match self {
            Retraction::Annulus(p) => annulus_retract(x, p).projected,
            Retraction::Box { lo, hi } => {
                let mut fired = false;
                for v in x.iter_mut() {
                    let c = v.clamp(*lo, *hi);
                    fired |= c != *v;
                    *v = c;
                }
                fired
            }
        }
    }
}

/// One classical RK4 step of `ẋ = A x + c` with signed step `tau`.
fn rk4_step(a: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>, tau: f64) -> DVector<f64> {
    let f = |y: &DVector<f64>| a * y + c;
    let k1 = f(x);
    let k2 = f(&(x + (0.5 * tau) * &k1));
    let k3 = f(&(x + (0.5 * tau) * &k2));
    let k4 = f(&(x + tau * &k3));
    x + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Signed RK4 step lengths covering flow time `alpha`.
fn step_schedule(alpha: f64, h: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return Vec::new();
    }
    let span = alpha.abs();
    let full = (span / h).floor() as usize;
    let rem = span - full as f64 * h;
    let mut steps = vec![h; full];
    if rem > 1e-12 * h {
        steps.push(rem);
    }
    steps.iter().map(|t| alpha.signum() * t).collect()
}

/// `∂/∂x` of one RK4 step for a linear field: `I + τA + (τA)²/2 + (τA)³/6 + (τA)⁴/24`.
fn rk4_step_matrix(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let m = a * tau;
    let n = a.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=4 {
        term = &term * &m / k as f64;
        out += &term;
    }
    out
}

/// Integrates `ẋ = A x + c` for flow time `alpha` with step `h`, taking
/// `⌊|α|/h⌋` full steps and one partial step for the remainder. Negative
/// `alpha` runs the reversed field.
pub fn integrate_affine(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    x0: &DVector<f64>,
    alpha: f64,
    h: f64,
    retraction: Option<&Retraction>,
) -> Result<(DVector<f64>, bool)> {
    validate_steps(alpha, h)?;
    let mut x = x0.clone();
    let mut fired = false;
    for (k, tau) in step_schedule(alpha, h).into_iter().enumerate() {
        x = rk4_step(a, c, &x, tau);
        if let Some(r) = retraction {
            fired |= r.apply(&mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFlow { step: k });
        }
    }
    Ok((x, fired))
}

fn validate_steps(alpha: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive and finite, got {h}")));
    }
    if !alpha.is_finite() || alpha.abs() / h > MAX_FLOW_STEPS {
        return Err(Error::invalid(
            "alpha",
            format!("|alpha|/h must be at most {MAX_FLOW_STEPS:e}, got alpha={alpha}, h={h}"),
        ));
    }
    Ok(())
}

/// Flow maps `(ĝ_α, ĥ_α)` of a generator pair, evaluated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTransform {
    pub generator: GeneratorPair,
    pub alpha: f64,
    pub step: f64,
    pub state_retraction: Option<Retraction>,
    pub action_retraction: Option<Retraction>,
}

impl FiniteTransform {
    pub const ORDER: u32 = 4;

    pub fn with_action_retraction(mut self, r: Retraction) -> Self {
        self.action_retraction = Some(r);
        self
    }

    /// `ĝ_{−α}, ĥ_{−α}` with the same step and retractions.
    pub fn inverse(&self) -> Self {
        Self {
            alpha: -self.alpha,
            ..self.clone()
        }
    }
}

/// Builds the finite transform `ĝ_α`, `ĥ_α` of `gen` (validated eagerly).
pub fn integrate_flow(gen: &GeneratorPair, alpha: f64, h: f64, retraction: Option<Retraction>) -> Result<FiniteTransform> {
    validate_steps(alpha, h)?;
    if !gen.is_finite() {
        return Err(Error::invalid("generator", "non-finite parameters"));
    }
    Ok(FiniteTransform {
        generator: gen.clone(),
        alpha,
        step: h,
        state_retraction: retraction,
        action_retraction: None,
    })
}

impl Transform for FiniteTransform {
    fn dim_s(&self) -> usize {
        self.generator.dim_s()
    }
    fn dim_a(&self) -> usize {
        self.generator.dim_a()
    }
    fn map_state(&self, s: &StateVec) -> Result<StateVec> {
        Ok(self.map_state_flagged(s)?.0)
    }
    fn map_action(&self, a: &ActionVec) -> Result<ActionVec> {
        Ok(self.map_action_flagged(a)?.0)
    }
    fn map_state_flagged(&self, s: &StateVec) -> Result<(StateVec, bool)> {
        ensure_dim("state", self.dim_s(), s.len())?;
        let g = &self.generator;
        integrate_affine(&g.a_x, &g.c_x, s, self.alpha, self.step, self.state_retraction.as_ref())
    }
    fn map_action_flagged(&self, a: &ActionVec) -> Result<(ActionVec, bool)> {
        ensure_dim("action", self.dim_a(), a.len())?;
        let g = &self.generator;
        integrate_affine(&g.a_y, &g.c_y, a, self.alpha, self.step, self.action_retraction.as_ref())
    }
    /// Exact derivative of the discrete flow when no state retraction is
    /// set (the map is then affine); central differences otherwise.
    fn state_jacobian(&self, s: &StateVec) -> Result<DMatrix<f64>> {
        ensure_dim("state", self.dim_s(), s.len())?;
        let steps = step_schedule(self.alpha, self.step);
        if self.state_retraction.is_some() && !steps.is_empty() {
            return super::transform::fd_state_jacobian(self, s);
        }
        let d = self.dim_s();
        let mut j = DMatrix::identity(d, d);
        for tau in steps {
            j = rk4_step_matrix(&self.generator.a_x, tau) * j;
        }
        Ok(j)
    }
}
