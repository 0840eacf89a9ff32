//! Controlled-diffusion models with analytic derivatives.
//!
//! A model describes `ds = b(s,a) dt + Σ(s,a) dW` through its drift `b`, the
//! diffusion matrix `Q = Σ Σᵀ` and an instantaneous reward `r`, together with
//! every first-order derivative the determining-equation residuals consume.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// A point of the state space `S ⊆ ℝ^d`.
pub type StateVec = DVector<f64>;
/// A point of the action space `A ⊆ ℝ^m`.
pub type ActionVec = DVector<f64>;

/// Discounting attached to a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Discount {
    /// Continuous-time rate `β > 0`.
    Continuous { beta: f64 },
    /// Discrete-time factor `γ ∈ (0, 1)`.
    Discrete { gamma: f64 },
}

impl Default for Discount {
    fn default() -> Self {
        Discount::Continuous { beta: 1.0 }
    }
}

/// Closed-form controlled diffusion.
///
/// Implementations are immutable and may be shared read-only across threads.
pub trait EnvModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim_s(&self) -> usize;
    fn dim_a(&self) -> usize;

    fn drift(&self, s: &StateVec, a: &ActionVec) -> DVector<f64>;
    /// Symmetric PSD diffusion matrix `Q = Σ Σᵀ`.
    fn diffusion_q(&self, s: &StateVec, a: &ActionVec) -> DMatrix<f64>;
    fn reward(&self, s: &StateVec, a: &ActionVec) -> f64;

    fn grad_s_reward(&self, s: &StateVec, a: &ActionVec) -> DVector<f64>;
    fn grad_a_reward(&self, s: &StateVec, a: &ActionVec) -> DVector<f64>;
    /// `∂b/∂s`, `d × d`.
    fn jac_s_drift(&self, s: &StateVec, a: &ActionVec) -> DMatrix<f64>;
    /// `∂b/∂a`, `d × m`.
    fn jac_a_drift(&self, s: &StateVec, a: &ActionVec) -> DMatrix<f64>;
    /// Directional derivative `∇_s Q(s,a)[x]`.
    fn dir_s_q(&self, s: &StateVec, a: &ActionVec, x: &DVector<f64>) -> DMatrix<f64>;
    /// Directional derivative `∇_a Q(s,a)[y]`.
    fn dir_a_q(&self, s: &StateVec, a: &ActionVec, y: &DVector<f64>) -> DMatrix<f64>;

    /// True when `Q` is independent of `(s, a)`, so both directional
    /// derivatives vanish and callers may skip them.
    fn constant_diffusion(&self) -> bool {
        false
    }

    fn discount(&self) -> Discount {
        Discount::default()
    }

    /// Feasibility of a query point. Unconstrained models accept everything
    /// with actions in the box `[-1, 1]^m`.
    fn in_domain(&self, _s: &StateVec, a: &ActionVec) -> bool {
        a.iter().all(|x| x.abs() <= 1.0)
    }
}

/// One analytic derivative entry compared against its finite-difference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeMismatch {
    pub probe: usize,
    /// e.g. `jac_s_drift[2][0]`.
    pub entry: String,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub passed: bool,
    pub tol: f64,
    /// Largest relative error seen, with its location.
    pub worst: Option<DerivativeMismatch>,
    /// Entries that exceeded `tol`.
    pub failures: Vec<DerivativeMismatch>,
    /// Indices of probes rejected by [`EnvModel::in_domain`].
    pub domain_violations: Vec<usize>,
    pub checked_entries: usize,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

struct Collector {
    tol: f64,
    probe: usize,
    worst: Option<DerivativeMismatch>,
    failures: Vec<DerivativeMismatch>,
    checked: usize,
}

impl Collector {
    fn compare(&mut self, entry: impl FnOnce() -> String, analytic: f64, fd: f64) {
        self.checked += 1;
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0);
        let is_worse = self.worst.as_ref().is_none_or(|w| rel > w.rel_error);
        if !is_worse && rel <= self.tol {
            return;
        }
        let m = DerivativeMismatch {
            probe: self.probe,
            entry: entry(),
            analytic,
            finite_difference: fd,
            rel_error: rel,
        };
        if rel > self.tol {
            self.failures.push(m.clone());
        }
        if is_worse {
            self.worst = Some(m);
        }
    }
}

/// Compares every analytic derivative of `model` against central finite
/// differences (step `1e-5 · max(1, |x_i|)`) at each probe.
///
/// Probes outside the model's domain are reported and skipped.
pub fn check_derivatives(
    model: &dyn EnvModel,
    probes: &[(StateVec, ActionVec)],
    tol: f64,
) -> DerivativeReport {
    let d = model.dim_s();
    let m = model.dim_a();
    let mut c = Collector {
        tol,
        probe: 0,
        worst: None,
        failures: Vec::new(),
        checked: 0,
    };
    let mut domain_violations = Vec::new();

    for (idx, (s, a)) in probes.iter().enumerate() {
        c.probe = idx;
        if s.len() != d || a.len() != m || !model.in_domain(s, a) {
            domain_violations.push(idx);
            continue;
        }
        let gs = model.grad_s_reward(s, a);
        let ga = model.grad_a_reward(s, a);
        let js = model.jac_s_drift(s, a);
        let ja = model.jac_a_drift(s, a);

        for i in 0..d {
            let h = fd_step(s[i]);
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[i] += h;
            sm[i] -= h;
            let dr = (model.reward(&sp, a) - model.reward(&sm, a)) / (2.0 * h);
            c.compare(|| format!("grad_s_reward[{i}]"), gs[i], dr);
            let db = (model.drift(&sp, a) - model.drift(&sm, a)) / (2.0 * h);
            for k in 0..d {
                c.compare(|| format!("jac_s_drift[{k}][{i}]"), js[(k, i)], db[k]);
            }
            let dq = (model.diffusion_q(&sp, a) - model.diffusion_q(&sm, a)) / (2.0 * h);
            let e = DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 });
            let dq_an = model.dir_s_q(s, a, &e);
            for (k, (x, y)) in dq_an.iter().zip(dq.iter()).enumerate() {
                c.compare(|| format!("dir_s_q[e{i}][{}][{}]", k % d, k / d), *x, *y);
            }
        }
        for j in 0..m {
            let h = fd_step(a[j]);
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[j] += h;
            am[j] -= h;
            let dr = (model.reward(s, &ap) - model.reward(s, &am)) / (2.0 * h);
            c.compare(|| format!("grad_a_reward[{j}]"), ga[j], dr);
            let db = (model.drift(s, &ap) - model.drift(s, &am)) / (2.0 * h);
            for k in 0..d {
                c.compare(|| format!("jac_a_drift[{k}][{j}]"), ja[(k, j)], db[k]);
            }
            let dq = (model.diffusion_q(s, &ap) - model.diffusion_q(s, &am)) / (2.0 * h);
            let e = DVector::from_fn(m, |k, _| if k == j { 1.0 } else { 0.0 });
            let dq_an = model.dir_a_q(s, a, &e);
            for (k, (x, y)) in dq_an.iter().zip(dq.iter()).enumerate() {
                c.compare(|| format!("dir_a_q[e{j}][{}][{}]", k % d, k / d), *x, *y);
            }
        }
    }

    DerivativeReport {
        passed: c.failures.is_empty() && c.checked > 0,
        tol,
        worst: c.worst,
        failures: c.failures,
        domain_violations,
        checked_entries: c.checked,
    }
}

/// Smallest eigenvalue of the symmetric part of `q`.
pub fn min_eigenvalue(q: &DMatrix<f64>) -> f64 {
    let sym = (q + q.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
