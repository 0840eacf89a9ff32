//! Augmented Bellman operators from state/action maps on a grid MDP.

use serde::{Deserialize, Serialize};

use super::bellman::{bellman_apply, sup_distance, sup_norm, value_iteration, ValueIteration};
use super::mdp::GridMdp;
use crate::error::{ensure_dim, Error, Result};
use crate::flows::Transform;

/// Barycentric weights below this are dropped when building `σ_g`.
pub const SNAP_TOL: f64 = 1e-9;

/// Grid image of a transform: a row-stochastic state map `σ_g` and an action
/// permutation `σ_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationMap {
    /// `σ_g[s]`: weights of `g(s)` on grid states, ascending indices.
    pub state_map: Vec<Vec<(usize, f64)>>,
    /// `σ_h[a]`: index of `h(a)`.
    pub action_map: Vec<usize>,
    /// States whose image left the box and was clamped.
    pub clamped_states: usize,
}

impl AugmentationMap {
    pub fn new(state_map: Vec<Vec<(usize, f64)>>, action_map: Vec<usize>) -> Result<Self> {
        let n = state_map.len();
        for (s, row) in state_map.iter().enumerate() {
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if row.iter().any(|e| e.0 >= n || !(e.1 >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("state_map", format!("row {s} is not a distribution over states")));
            }
        }
        let mut seen = vec![false; action_map.len()];
        for &b in &action_map {
            if b >= seen.len() || seen[b] {
                return Err(Error::invalid("action_map", "not a permutation"));
            }
            seen[b] = true;
        }
        Ok(Self {
            state_map,
            action_map,
            clamped_states: 0,
        })
    }

    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        Self {
            state_map: (0..n_states).map(|s| vec![(s, 1.0)]).collect(),
            action_map: (0..n_actions).collect(),
            clamped_states: 0,
        }
    }

    /// Images of lattice points and actions under `transform`: barycentric
    /// weights (with weights below [`SNAP_TOL`] dropped and the rest
    /// renormalized) and exact matching of transformed actions within `1e-9`.
    pub fn from_transform(mdp: &GridMdp, transform: &dyn Transform) -> Result<Self> {
        Self::build(mdp, transform, false)
    }

    /// Like [`AugmentationMap::from_transform`], but each transformed action
    /// is sent to the nearest grid action. Fails when that is not a bijection.
    /// The snapping error shows up in the measured budget.
    pub fn from_transform_snapped(mdp: &GridMdp, transform: &dyn Transform) -> Result<Self> {
        Self::build(mdp, transform, true)
    }

    fn build(mdp: &GridMdp, transform: &dyn Transform, snap_actions: bool) -> Result<Self> {
        let lattice = mdp
            .lattice
            .as_ref()
            .ok_or_else(|| Error::invalid("mdp", "augmentation from a transform needs lattice states"))?;
        ensure_dim("transform state dimension", lattice.dim(), transform.dim_s())?;
        let mut clamped = 0;
        let mut state_map = Vec::with_capacity(mdp.n_states);
        for s in 0..mdp.n_states {
            let gs = transform.map_state(&lattice.point(s))?;
            if !lattice.contains(gs.as_slice()) {
                clamped += 1;
            }
            let mut w: Vec<(usize, f64)> = lattice
                .barycentric(gs.as_slice())
                .into_iter()
                .filter(|e| e.1 > SNAP_TOL)
                .collect();
            let total: f64 = w.iter().map(|e| e.1).sum();
            for e in &mut w {
                e.1 /= total;
            }
            state_map.push(w);
        }
        let mut action_map = Vec::with_capacity(mdp.actions.len());
        for a in &mdp.actions {
            let ha = transform.map_action(a)?;
            let (best, dist) = mdp
                .actions
                .iter()
                .enumerate()
                .map(|(k, b)| (k, (b - &ha).norm()))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonempty action set");
            if dist > 1e-9 && !snap_actions {
                return Err(Error::invalid(
                    "transform",
                    format!("action set is not closed under h: nearest image is {dist:e} away"),
                ));
            }
            action_map.push(best);
        }
        let mut map = Self::new(state_map, action_map)?;
        map.clamped_states = clamped;
        Ok(map)
    }

    pub fn n_states(&self) -> usize {
        self.state_map.len()
    }

    /// True when `σ_g` is a permutation.
    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.state_map.len()];
        for row in &self.state_map {
            if row.len() != 1 || row[0].1 != 1.0 || seen[row[0].0] {
                return false;
            }
            seen[row[0].0] = true;
        }
        true
    }

    /// `(V∘g)(s) = Σ_x σ_g[s][x] V(x)`.
    pub fn pullback(&self, v: &[f64]) -> Vec<f64> {
        self.state_map.iter().map(|row| row.iter().map(|(x, w)| w * v[*x]).sum()).collect()
    }
}

/// The augmented model `(R̃, P̃)` indexed by the transformed pair `(x, b)`:
/// every source `(s, a)` with `h(a) = b` contributes to target `x` with
/// weight `c(s|x) ∝ σ_g[s][x]`, carrying its reward and its pushforward row
/// `P(·|s, a) σ_g`. Targets that no source reaches keep their own row.
///
/// When `σ_g` is a permutation this is the relabelled model
/// `R̃(g s, h a) = R(s, a)`, `P̃(·|g s, h a) = g_# P(·|s, a)`, and an exact
/// symmetry gives back the original tables.
pub fn augmented_model(mdp: &GridMdp, aug: &AugmentationMap) -> Result<GridMdp> {
    ensure_dim("augmentation states", mdp.n_states, aug.n_states())?;
    ensure_dim("augmentation actions", mdp.n_actions, aug.action_map.len())?;
    let n = mdp.n_states;
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (s, row) in aug.state_map.iter().enumerate() {
        for &(x, w) in row {
            incoming[x].push((s, w));
        }
    }
    let mut inv_h = vec![0; mdp.n_actions];
    for (a, &b) in aug.action_map.iter().enumerate() {
        inv_h[b] = a;
    }

    let mut rows = Vec::with_capacity(n * mdp.n_actions);
    let mut rewards = Vec::with_capacity(n * mdp.n_actions);
    let mut scratch = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut list: Vec<usize> = Vec::new();
    for x in 0..n {
        let mass: f64 = incoming[x].iter().map(|e| e.1).sum();
        for b in 0..mdp.n_actions {
            if mass == 0.0 {
                let (c, p) = mdp.row(x, b);
                rows.push(c.iter().copied().zip(p.iter().copied()).collect());
                rewards.push(mdp.reward(x, b));
                continue;
            }
            let a = inv_h[b];
            let mut r = 0.0;
            for &(s, w) in &incoming[x] {
                r += w * mdp.reward(s, a);
                let (c, p) = mdp.row(s, a);
                for (y, py) in c.iter().zip(p) {
                    for &(z, u) in &aug.state_map[*y] {
                        if !touched[z] {
                            touched[z] = true;
                            list.push(z);
                        }
                        scratch[z] += w * py * u;
                    }
                }
            }
            list.sort_unstable();
            let row: Vec<(usize, f64)> = list
                .iter()
                .map(|&z| {
                    let v = scratch[z] / mass;
                    scratch[z] = 0.0;
                    touched[z] = false;
                    (z, v)
                })
                .collect();
            list.clear();
            rows.push(row);
            rewards.push(r / mass);
        }
    }
    let mut out = GridMdp::from_rows(n, mdp.n_actions, mdp.gamma, rows, rewards)?;
    out.lattice = mdp.lattice.clone();
    out.actions = mdp.actions.clone();
    Ok(out)
}

/// `T̃`, the optimal Bellman operator of the augmented model.
#[derive(Debug, Clone)]
pub struct AugmentedOperator {
    pub model: GridMdp,
}

impl AugmentedOperator {
    pub fn new(mdp: &GridMdp, aug: &AugmentationMap) -> Result<Self> {
        Ok(Self {
            model: augmented_model(mdp, aug)?,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        bellman_apply(&self.model, v)
    }
}

/// One augmented backup `T̃V`.
pub fn augmented_bellman(mdp: &GridMdp, aug: &AugmentationMap, v: &[f64]) -> Result<Vec<f64>> {
    Ok(AugmentedOperator::new(mdp, aug)?.apply(v))
}

/// Discrete-time mismatch of an augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    /// `max |R̃ − R|`.
    pub eps_r: f64,
    /// `max ‖P̃(·|s,a) − P(·|s,a)‖₁`, the sup-functional total variation.
    pub eps_p: f64,
}

impl PerturbationBudget {
    /// `ε_r + γ ε_P ‖V‖_∞`.
    pub fn operator_bound(&self, gamma: f64, v: &[f64]) -> f64 {
        self.eps_r + gamma * self.eps_p * sup_norm(v)
    }
}

fn l1_row_distance(u: &GridMdp, v: &GridMdp, s: usize, a: usize) -> f64 {
    let (cu, pu) = u.row(s, a);
    let (cv, pv) = v.row(s, a);
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < cu.len() || j < cv.len() {
        if j >= cv.len() || (i < cu.len() && cu[i] < cv[j]) {
            acc += pu[i].abs();
            i += 1;
        } else if i >= cu.len() || cv[j] < cu[i] {
            acc += pv[j].abs();
            j += 1;
        } else {
            acc += (pu[i] - pv[j]).abs();
            i += 1;
            j += 1;
        }
    }
    acc
}

pub fn budget_between(mdp: &GridMdp, augmented: &GridMdp) -> PerturbationBudget {
    let mut eps_r = 0.0f64;
    let mut eps_p = 0.0f64;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            eps_r = eps_r.max((augmented.reward(s, a) - mdp.reward(s, a)).abs());
            eps_p = eps_p.max(l1_row_distance(mdp, augmented, s, a));
        }
    }
    PerturbationBudget { eps_r, eps_p }
}

pub fn measure_budget(mdp: &GridMdp, aug: &AugmentationMap) -> Result<PerturbationBudget> {
    Ok(budget_between(mdp, &augmented_model(mdp, aug)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointGap {
    /// `‖Ṽ* − V*‖_∞`.
    pub gap: f64,
    /// `(ε_r + γ ε_P ‖V*‖_∞) / (1 − γ)`.
    pub bound: f64,
    pub holds: bool,
    pub budget: PerturbationBudget,
    pub v_star_sup: f64,
    pub converged: bool,
}

/// Fixed points of `T` and `T̃` by value iteration to `1e-12` and the check
/// `gap ≤ bound + 1e-9`.
pub fn fixed_point_gap(mdp: &GridMdp, aug: &AugmentationMap) -> Result<(FixedPointGap, ValueIteration, ValueIteration)> {
    let op = AugmentedOperator::new(mdp, aug)?;
    let budget = budget_between(mdp, &op.model);
    let v0 = vec![0.0; mdp.n_states];
    let k_max = 200_000;
    let plain = value_iteration(mdp, &v0, k_max, 1e-12);
    let aug_vi = value_iteration(&op.model, &v0, k_max, 1e-12);
    let gap = sup_distance(&plain.values, &aug_vi.values);
    let v_star_sup = sup_norm(&plain.values);
    let bound = (budget.eps_r + mdp.gamma * budget.eps_p * v_star_sup) / (1.0 - mdp.gamma);
    Ok((
        FixedPointGap {
            gap,
            bound,
            holds: gap <= bound + 1e-9,
            budget,
            v_star_sup,
            converged: plain.converged && aug_vi.converged,
        },
        plain,
        aug_vi,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_pair(shift: f64) -> GridMdp {
        let p = vec![
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            vec![vec![0.3, 0.7], vec![0.8, 0.2]],
        ];
        let r = vec![vec![1.0 + shift, 0.5], vec![1.0, 0.5]];
        GridMdp::from_dense(&p, &r, 0.9).unwrap()
    }

    fn swap() -> AugmentationMap {
        AugmentationMap::new(vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![0, 1]).unwrap()
    }

    #[test]
    fn identity_augmentation_is_bit_exact() {
        let mdp = symmetric_pair(0.3);
        let id = AugmentationMap::identity(2, 2);
        let v = [1.25, -3.5];
        assert_eq!(augmented_bellman(&mdp, &id, &v).unwrap(), bellman_apply(&mdp, &v));
        let b = measure_budget(&mdp, &id).unwrap();
        assert_eq!((b.eps_r, b.eps_p), (0.0, 0.0));
        let (g, _, _) = fixed_point_gap(&mdp, &id).unwrap();
        assert_eq!(g.gap, 0.0);
    }

    #[test]
    fn exact_swap_symmetry() {
        let mdp = symmetric_pair(0.0);
        let b = measure_budget(&mdp, &swap()).unwrap();
        assert_eq!((b.eps_r, b.eps_p), (0.0, 0.0));
    }

    #[test]
    fn shifted_reward_budget_and_bound() {
        let mdp = symmetric_pair(0.01);
        let (g, _, _) = fixed_point_gap(&mdp, &swap()).unwrap();
        assert!((g.budget.eps_r - 0.01).abs() < 1e-15);
        assert_eq!(g.budget.eps_p, 0.0);
        assert!((g.bound - 0.1).abs() < 1e-12);
        assert!(g.holds && g.gap <= 0.1);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(AugmentationMap::new(vec![vec![(0, 0.5)]], vec![0]).is_err());
        assert!(AugmentationMap::new(vec![vec![(0, 1.0)]], vec![0, 0]).is_err());
        assert!(AugmentationMap::new(vec![vec![(3, 1.0)]], vec![0]).is_err());
    }
}
