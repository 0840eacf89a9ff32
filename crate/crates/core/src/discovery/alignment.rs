use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};
use crate::generator::GeneratorPair;
use crate::model::{ActionVec, StateVec};

fn stacked_field(gen: &GeneratorPair, states: &[StateVec], actions: &[ActionVec]) -> DVector<f64> {
    let mut out = Vec::with_capacity(states.len() * gen.dim_s() + actions.len() * gen.dim_a());
    for s in states {
        out.extend(gen.state_field(s).iter());
    }
    for a in actions {
        out.extend(gen.action_field(a).iter());
    }
    DVector::from_vec(out)
}

/// `|cos|` between the stacked evaluations `[X(s₁)…X(s_N), Y(a₁)…Y(a_N)]` of
/// two generators. The sign of a generator is a gauge freedom, hence the
/// absolute value.
pub fn alignment(gen: &GeneratorPair, reference: &GeneratorPair, states: &[StateVec], actions: &[ActionVec]) -> Result<f64> {
    ensure_dim("state dimension", reference.dim_s(), gen.dim_s())?;
    ensure_dim("action dimension", reference.dim_a(), gen.dim_a())?;
    let u = stacked_field(gen, states, actions);
    let w = stacked_field(reference, states, actions);
    let (nu, nw) = (u.norm(), w.norm());
    if nu == 0.0 || nw == 0.0 || !nu.is_finite() || !nw.is_finite() {
        return Err(Error::ZeroField);
    }
    Ok((u.dot(&w) / (nu * nw)).abs().min(1.0))
}
