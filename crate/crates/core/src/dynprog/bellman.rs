use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mdp::GridMdp;

/// `(TV)(s) = max_a { R(s,a) + γ Σ P(s'|s,a) V(s') }`, parallel over states.
pub fn bellman_apply(mdp: &GridMdp, v: &[f64]) -> Vec<f64> {
    (0..mdp.n_states)
        .into_par_iter()
        .map(|s| (0..mdp.n_actions).map(|a| mdp.q_value(s, a, v)).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Maximizing action per state (lowest index on ties).
pub fn greedy_policy(mdp: &GridMdp, v: &[f64]) -> Vec<usize> {
    (0..mdp.n_states)
        .into_par_iter()
        .map(|s| {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..mdp.n_actions {
                let q = mdp.q_value(s, a, v);
                if q > best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect()
}

pub fn sup_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖V_{k+1} − V_k‖_∞` per sweep.
    pub deltas: Vec<f64>,
    /// `‖V_k − V_final‖_∞` for `k = 0..=iterations`.
    pub errors: Vec<f64>,
    /// A posteriori bound `γ δ_last / (1 − γ)` on `‖V_final − V*‖_∞`.
    pub final_error_bound: f64,
    pub gamma: f64,
}

impl ValueIteration {
    /// Iterations at which `‖V_k − V_final‖ ≤ γ^k ‖V_0 − V_final‖ + slack_k`
    /// fails, with `slack_k = (1 + γ^k) e + slack` accounting for
    /// `V_final ≠ V*` through the a posteriori bound `e`.
    pub fn envelope_violations(&self, slack: f64) -> Vec<usize> {
        let e0 = self.errors.first().copied().unwrap_or(0.0);
        let e = self.final_error_bound;
        self.errors
            .iter()
            .enumerate()
            .filter(|(k, err)| {
                let gk = self.gamma.powi(*k as i32);
                **err > gk * e0 + (1.0 + gk) * e + slack
            })
            .map(|(k, _)| k)
            .collect()
    }
}

/// Iterates `T` from `v0` until the sup-norm change drops below `tol` or
/// `k_max` sweeps are done (`converged = false` then).
pub fn value_iteration(mdp: &GridMdp, v0: &[f64], k_max: usize, tol: f64) -> ValueIteration {
    value_iteration_with(mdp.gamma, v0, k_max, tol, |v| bellman_apply(mdp, v))
}

pub(crate) fn value_iteration_with<F>(gamma: f64, v0: &[f64], k_max: usize, tol: f64, op: F) -> ValueIteration
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut history = vec![v0.to_vec()];
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut v = v0.to_vec();
    for _ in 0..k_max {
        let next = op(&v);
        let delta = sup_distance(&next, &v);
        deltas.push(delta);
        v = next;
        history.push(v.clone());
        if delta < tol {
            converged = true;
            break;
        }
    }
    let errors = history.iter().map(|h| sup_distance(h, &v)).collect();
    let last = deltas.last().copied().unwrap_or(f64::INFINITY);
    ValueIteration {
        iterations: deltas.len(),
        values: v,
        converged,
        deltas,
        errors,
        final_error_bound: gamma * last / (1.0 - gamma),
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_geometric_series() {
        let mdp = GridMdp::from_dense(&[vec![vec![1.0]]], &[vec![1.0]], 0.9).unwrap();
        let vi = value_iteration(&mdp, &[0.0], 10_000, 1e-13);
        assert!(vi.converged);
        assert!((vi.values[0] - 10.0).abs() < 1e-11);
        assert!(vi.envelope_violations(1e-9).is_empty());
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let p = vec![vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]]];
        let mdp = GridMdp::from_dense(&p, &[vec![0.0], vec![0.0]], 0.8).unwrap();
        let vi = value_iteration(&mdp, &[3.0, -7.0], 10_000, 1e-14);
        assert!(vi.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_state_hand_backup() {
        let p = vec![
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.3, 0.7]],
        ];
        let r = vec![vec![1.0, 0.0], vec![0.5, 2.0]];
        let mdp = GridMdp::from_dense(&p, &r, 0.9).unwrap();
        let tv = bellman_apply(&mdp, &[2.0, 4.0]);
        // s0: max(1 + 0.9*3, 0 + 0.9*2) = 3.7; s1: max(0.5 + 0.9*4, 2 + 0.9*3.4) = 5.06
        assert!((tv[0] - 3.7).abs() < 1e-14);
        assert!((tv[1] - 5.06).abs() < 1e-14);
        assert_eq!(greedy_policy(&mdp, &[2.0, 4.0]), vec![0, 1]);
        assert_eq!(bellman_apply(&mdp, &[0.0, 0.0]), vec![1.0, 2.0]);
    }
}
