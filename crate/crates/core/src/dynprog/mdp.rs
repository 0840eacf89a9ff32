use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;

use super::lattice::Lattice;
use crate::error::{ensure_dim, Error, Result};
use crate::model::{ActionVec, EnvModel};

/// Truncation radius of the one-step Gaussian, in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// Tolerance on stochastic rows.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Finite discounted MDP with a sparse row-stochastic kernel.
///
/// Row `s·|A| + a` of the kernel holds `P(·|s, a)` with ascending columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Present when the states are lattice points.
    pub lattice: Option<Lattice>,
    /// Present when actions are vectors (empty for abstract MDPs).
    pub actions: Vec<ActionVec>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) probs: Vec<f64>,
    pub(crate) rewards: Vec<f64>,
    /// Rows replaced by a self-loop because truncation left no support.
    pub flagged_rows: Vec<usize>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

impl GridMdp {
    /// From sparse rows, one per `(s, a)` in `s·|A| + a` order.
    pub fn from_rows(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rows: Vec<Vec<(usize, f64)>>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        ensure_dim("kernel rows", n_states * n_actions, rows.len())?;
        ensure_dim("reward entries", n_states * n_actions, rewards.len())?;
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards", "non-finite reward"));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        row_ptr.push(0);
        for (k, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut sum = 0.0;
            for (c, p) in row {
                if c >= n_states || !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::invalid("kernel", format!("bad entry ({c}, {p}) in row {k}")));
                }
                sum += p;
                cols.push(c);
                probs.push(p);
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid("kernel", format!("row {k} sums to {sum}")));
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            lattice: None,
            actions: Vec::new(),
            row_ptr,
            cols,
            probs,
            rewards,
            flagged_rows: Vec::new(),
        })
    }

    /// From dense tables `p[s][a][s']` and `r[s][a]`.
    pub fn from_dense(p: &[Vec<Vec<f64>>], r: &[Vec<f64>], gamma: f64) -> Result<Self> {
        let n_states = p.len();
        let n_actions = p.first().map_or(0, |x| x.len());
        let mut rows = Vec::with_capacity(n_states * n_actions);
        let mut rewards = Vec::with_capacity(n_states * n_actions);
        ensure_dim("reward table rows", n_states, r.len())?;
        for s in 0..n_states {
            ensure_dim("kernel actions", n_actions, p[s].len())?;
            ensure_dim("reward actions", n_actions, r[s].len())?;
            for a in 0..n_actions {
                ensure_dim("kernel row", n_states, p[s][a].len())?;
                rows.push(p[s][a].iter().copied().enumerate().filter(|e| e.1 != 0.0).collect());
                rewards.push(r[s][a]);
            }
        }
        Self::from_rows(n_states, n_actions, gamma, rows, rewards)
    }

    pub fn row_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Columns and probabilities of `P(·|s, a)`.
    pub fn row(&self, s: usize, a: usize) -> (&[usize], &[f64]) {
        let k = self.row_index(s, a);
        let (b, e) = (self.row_ptr[k], self.row_ptr[k + 1]);
        (&self.cols[b..e], &self.probs[b..e])
    }

    pub fn dense_row(&self, s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        let (c, p) = self.row(s, a);
        for (j, v) in c.iter().zip(p) {
            out[*j] += v;
        }
        out
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[self.row_index(s, a)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn r_max(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn nnz(&self) -> usize {
        self.probs.len()
    }

    /// Largest `|Σ_{s'} P(s'|s, a) − 1|` over rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n_states * self.n_actions)
            .map(|k| (self.probs[self.row_ptr[k]..self.row_ptr[k + 1]].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `R(s, a) + γ Σ P(s'|s, a) V(s')`.
    pub fn q_value(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let (c, p) = self.row(s, a);
        let ev: f64 = c.iter().zip(p).map(|(j, w)| w * v[*j]).sum();
        self.reward(s, a) + self.gamma * ev
    }
}

/// `n` unit compass directions starting at `+x`, counter-clockwise. For
/// `n = 8` the diagonal components are exactly `±1/√2` so that quarter turns
/// permute the set without rounding.
pub fn compass_actions(n: usize) -> Vec<ActionVec> {
    (0..n)
        .map(|k| {
            let (x, y) = if n == 8 {
                let s = FRAC_1_SQRT_2;
                [(1.0, 0.0), (s, s), (0.0, 1.0), (-s, s), (-1.0, 0.0), (-s, -s), (0.0, -1.0), (s, -s)][k]
            } else {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                (th.cos(), th.sin())
            };
            DVector::from_vec(vec![x, y])
        })
        .collect()
}

/// One-dimensional projection weights of `N(μ, std²)` onto the lattice
/// coordinates of dimension `i`, ascending and merged; out-of-box points are
/// clamped to the boundary index. Empty when truncation leaves no support.
fn axis_weights(lattice: &Lattice, i: usize, mu: f64, std: f64) -> Vec<(usize, f64)> {
    let last = lattice.n[i] - 1;
    if std == 0.0 {
        let t = ((mu - lattice.lo[i]) / lattice.spacing(i)).clamp(0.0, last as f64);
        let k = (t.floor() as usize).min(last - 1);
        let f = t - k as f64;
        return [(k, 1.0 - f), (k + 1, f)].into_iter().filter(|e| e.1 != 0.0).collect();
    }
    let h = lattice.spacing(i);
    let reach = TRUNCATION_SIGMAS * std;
    let k_lo = ((mu - reach - lattice.lo[i]) / h).ceil() as i64 - 1;
    let k_hi = ((mu + reach - lattice.lo[i]) / h).floor() as i64 + 1;
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut total = 0.0;
    for k in k_lo..=k_hi {
        let z = (lattice.coord(i, k) - mu) / std;
        if z.abs() > TRUNCATION_SIGMAS {
            continue;
        }
        let w = (-0.5 * z * z).exp();
        let idx = k.clamp(0, last as i64) as usize;
        total += w;
        match out.last_mut() {
            Some(e) if e.0 == idx => e.1 += w,
            _ => out.push((idx, w)),
        }
    }
    for e in &mut out {
        e.1 /= total;
    }
    out
}

/// Projects one Euler–Maruyama step of `model` onto the lattice.
///
/// The one-step law `N(s + Δt b(s,a), Δt Q(s,a))` is split per dimension (the
/// diffusion must be diagonal): each coordinate gets truncated-Gaussian
/// weights at lattice coordinates within `4√(Δt Q_ii)` of the mean, or
/// linear-interpolation weights when `Q_ii = 0`. Mass at coordinates beyond
/// the box goes to the boundary index, and the kernel row is the product of
/// the per-dimension weights.
pub fn discretize(
    model: &dyn EnvModel,
    lattice: &Lattice,
    actions: &[ActionVec],
    dt: f64,
    gamma: f64,
) -> Result<GridMdp> {
    check_gamma(gamma)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if actions.is_empty() {
        return Err(Error::invalid("actions", "empty action set"));
    }
    let d = lattice.dim();
    ensure_dim("lattice dimension", model.dim_s(), d)?;
    for a in actions {
        ensure_dim("action", model.dim_a(), a.len())?;
    }
    let n_states = lattice.len();
    let mut rows = Vec::with_capacity(n_states * actions.len());
    let mut rewards = Vec::with_capacity(n_states * actions.len());
    let mut flagged = Vec::new();
    for s_idx in 0..n_states {
        let s = lattice.point(s_idx);
        for a in actions {
            let b = model.drift(&s, a);
            let q = model.diffusion_q(&s, a);
            for r in 0..d {
                for c in 0..d {
                    if r != c && q[(r, c)] != 0.0 {
                        return Err(Error::Unsupported(format!(
                            "{}: discretization needs a diagonal diffusion, Q[{r}][{c}] = {}",
                            model.name(),
                            q[(r, c)]
                        )));
                    }
                }
            }
            let axes: Vec<Vec<(usize, f64)>> = (0..d)
                .map(|i| axis_weights(lattice, i, s[i] + dt * b[i], (dt * q[(i, i)].max(0.0)).sqrt()))
                .collect();
            let row = if axes.iter().any(|ax| ax.is_empty()) {
                flagged.push(rows.len());
                vec![(s_idx, 1.0)]
            } else {
                let mut row: Vec<(usize, f64)> = vec![(0, 1.0)];
                for (i, ax) in axes.iter().enumerate() {
                    let mut next = Vec::with_capacity(row.len() * ax.len());
                    for &(base, w) in &row {
                        for &(k, v) in ax {
                            next.push((base * lattice.n[i] + k, w * v));
                        }
                    }
                    row = next;
                }
                let total: f64 = row.iter().map(|e| e.1).sum();
                for e in &mut row {
                    e.1 /= total;
                }
                row
            };
            rows.push(row);
            rewards.push(model.reward(&s, a));
        }
    }
    let mut mdp = GridMdp::from_rows(n_states, actions.len(), gamma, rows, rewards)?;
    mdp.lattice = Some(lattice.clone());
    mdp.actions = actions.to_vec();
    mdp.flagged_rows = flagged;
    Ok(mdp)
}
