//! Measured `(ε_L, ε_r)` mismatch of a candidate transform.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::flows::Transform;
use crate::model::{ActionVec, EnvModel, StateVec};

/// A `C²` function on states with closed-form derivatives.
pub trait TestFunction: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, s: &StateVec) -> f64;
    fn gradient(&self, s: &StateVec) -> DVector<f64>;
    fn hessian(&self, s: &StateVec) -> DMatrix<f64>;
}

/// `s_i` or `s_i s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monomial {
    pub i: usize,
    pub j: Option<usize>,
}

impl TestFunction for Monomial {
    fn name(&self) -> String {
        match self.j {
            None => format!("s{}", self.i),
            Some(j) => format!("s{}*s{}", self.i, j),
        }
    }
    fn value(&self, s: &StateVec) -> f64 {
        match self.j {
            None => s[self.i],
            Some(j) => s[self.i] * s[j],
        }
    }
    fn gradient(&self, s: &StateVec) -> DVector<f64> {
        let mut g = DVector::zeros(s.len());
        match self.j {
            None => g[self.i] = 1.0,
            Some(j) => {
                g[self.i] += s[j];
                g[j] += s[self.i];
            }
        }
        g
    }
    fn hessian(&self, s: &StateVec) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(s.len(), s.len());
        if let Some(j) = self.j {
            h[(self.i, j)] += 1.0;
            h[(j, self.i)] += 1.0;
        }
        h
    }
}

/// All `s_i` and all `s_i s_j` with `i ≤ j`.
pub fn quadratic_monomials(d: usize) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = (0..d).map(|i| Monomial { i, j: None }).collect();
    for i in 0..d {
        for j in i..d {
            out.push(Monomial { i, j: Some(j) });
        }
    }
    out
}

/// Mean and sup of `|V(s) − V(g(s))|` over the probes that stayed in range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonInvariance {
    pub mean: f64,
    pub sup: f64,
    pub evaluated: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub eps_l: f64,
    pub eps_r: f64,
    pub value_noninvariance: Option<NonInvariance>,
    pub probe_count: usize,
    pub test_functions: Vec<String>,
    /// Region over which `‖f‖_{C²}` is taken.
    pub norm_region: String,
    /// Probe index and test function attaining `eps_l`.
    pub worst_generator: Option<(usize, String)>,
    /// Probe index attaining `eps_r`.
    pub worst_reward: Option<usize>,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `b · ∇f + ½ tr(Q ∇²f)`.
fn generator_action(b: &DVector<f64>, q: &DMatrix<f64>, grad: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
    b.dot(grad) + 0.5 * q.component_mul(hess).sum()
}

/// `ε_L = max |L_a(f∘g)(s) − (L_{h(a)} f)(g(s))| / ‖f‖_{C²}` and
/// `ε_r = max |r(g(s), h(a)) − r(s, a)|` over the probes.
///
/// `∇²(f∘g) = J_gᵀ (∇²f ∘ g) J_g`; the second derivative of `g` is dropped,
/// which is exact for affine maps. `‖f‖_{C²}` is the sum of the sups of
/// `|f|`, `‖∇f‖₂` and `‖∇²f‖₂` over the probes and their images.
pub fn measure_mismatch(
    model: &dyn EnvModel,
    transform: &dyn Transform,
    test_functions: &[&dyn TestFunction],
    probes: &[(StateVec, ActionVec)],
) -> Result<MismatchReport> {
    if test_functions.is_empty() {
        return Err(Error::invalid("test_functions", "empty test family"));
    }
    ensure_dim("transform state dimension", model.dim_s(), transform.dim_s())?;
    ensure_dim("transform action dimension", model.dim_a(), transform.dim_a())?;

    struct Probe {
        gs: StateVec,
        ha: ActionVec,
        jac: DMatrix<f64>,
    }
    let mut mapped = Vec::with_capacity(probes.len());
    for (s, a) in probes {
        mapped.push(Probe {
            gs: transform.map_state(s)?,
            ha: transform.map_action(a)?,
            jac: transform.state_jacobian(s)?,
        });
    }

    let mut eps_r = 0.0f64;
    let mut worst_reward = None;
    for (k, ((s, a), p)) in probes.iter().zip(&mapped).enumerate() {
        let dr = (model.reward(&p.gs, &p.ha) - model.reward(s, a)).abs();
        if dr > eps_r || worst_reward.is_none() {
            eps_r = eps_r.max(dr);
            worst_reward = Some(k);
        }
    }

    let mut eps_l = 0.0f64;
    let mut worst_generator = None;
    for f in test_functions {
        let mut norm = (0.0f64, 0.0f64, 0.0f64);
        for x in probes.iter().map(|p| &p.0).chain(mapped.iter().map(|p| &p.gs)) {
            norm.0 = norm.0.max(f.value(x).abs());
            norm.1 = norm.1.max(f.gradient(x).norm());
            norm.2 = norm.2.max(spectral_norm(&f.hessian(x)));
        }
        let c2 = norm.0 + norm.1 + norm.2;
        if c2 == 0.0 {
            continue;
        }
        for (k, ((s, a), p)) in probes.iter().zip(&mapped).enumerate() {
            let grad = f.gradient(&p.gs);
            let hess = f.hessian(&p.gs);
            let lhs = generator_action(
                &model.drift(s, a),
                &model.diffusion_q(s, a),
                &(p.jac.transpose() * &grad),
                &(p.jac.transpose() * &hess * &p.jac),
            );
            let rhs = generator_action(&model.drift(&p.gs, &p.ha), &model.diffusion_q(&p.gs, &p.ha), &grad, &hess);
            let e = (lhs - rhs).abs() / c2;
            if e > eps_l || worst_generator.is_none() {
                eps_l = eps_l.max(e);
                worst_generator = Some((k, f.name()));
            }
        }
    }

    Ok(MismatchReport {
        eps_l,
        eps_r,
        value_noninvariance: None,
        probe_count: probes.len(),
        test_functions: test_functions.iter().map(|f| f.name()).collect(),
        norm_region: "probes and their images".to_string(),
        worst_generator,
        worst_reward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{DoubleWell, DoubleWellParams, Rot2D, SimConfig};
    use crate::flows::LinearTransform;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn probes() -> Vec<(StateVec, ActionVec)> {
        vec![
            (v(&[1.0, 0.5, -0.2, 0.3]), v(&[0.1, -0.4])),
            (v(&[-0.7, 1.2, 0.9, -1.1]), v(&[-0.8, 0.6])),
        ]
    }

    #[test]
    fn monomial_count_and_derivatives() {
        let fams = quadratic_monomials(4);
        assert_eq!(fams.len(), 4 + 10);
        let m = Monomial { i: 1, j: Some(1) };
        let s = v(&[0.0, 3.0, 0.0, 0.0]);
        assert_eq!(m.value(&s), 9.0);
        assert_eq!(m.gradient(&s)[1], 6.0);
        assert_eq!(m.hessian(&s)[(1, 1)], 2.0);
    }

    #[test]
    fn identity_has_zero_mismatch() {
        let model = Rot2D::new(SimConfig::default());
        let fams = quadratic_monomials(4);
        let refs: Vec<&dyn TestFunction> = fams.iter().map(|f| f as &dyn TestFunction).collect();
        let rep = measure_mismatch(&model, &LinearTransform::identity(4, 2), &refs, &probes()).unwrap();
        assert_eq!(rep.eps_l, 0.0);
        assert_eq!(rep.eps_r, 0.0);
    }

    #[test]
    fn doublewell_tilt_mismatch_is_linear() {
        let fams = quadratic_monomials(4);
        let refs: Vec<&dyn TestFunction> = fams.iter().map(|f| f as &dyn TestFunction).collect();
        let refl = LinearTransform::reflection_x(4, 2);
        let eps = |delta: f64| {
            let m = DoubleWell::new(SimConfig::default(), DoubleWellParams { delta });
            measure_mismatch(&m, &refl, &refs, &probes()).unwrap()
        };
        let (r1, r2) = (eps(0.1), eps(0.2));
        assert_eq!(r1.eps_r, 0.0);
        assert!((r2.eps_l / r1.eps_l - 2.0).abs() < 1e-9);
        assert!(eps(0.0).eps_l < 1e-15);
    }
}
