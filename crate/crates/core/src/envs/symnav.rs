//! Goal-reaching navigation among circular obstacles with a smooth wind.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::rot2d::accel_jac_a;
use super::{check_action, check_finite, semi_implicit_step, velocity_noise_q, Dynamics, SimConfig, Transition, TransitionFlags};
use crate::error::{Error, Result};
use crate::model::{ActionVec, EnvModel, StateVec};

pub const GOAL_RADIUS: f64 = 3.5;
/// Not fixed by the map generator; goal circle plus a margin.
pub const DEFAULT_WORLD_RADIUS: f64 = 4.5;
pub const SUCCESS_RADIUS: f64 = 0.3;
pub const COLLISION_PENALTY: f64 = 2.0;
pub const SUCCESS_BONUS: f64 = 10.0;
pub const LIDAR_RAYS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymNavMap {
    pub variant: u32,
    pub goal: [f64; 2],
    pub obstacles: Vec<Obstacle>,
    pub wind_scale: f64,
    pub world_radius: f64,
}

/// Deterministic map for `variant ∈ 1..=15`.
pub fn symnav_map(variant: i64) -> Result<SymNavMap> {
    if !(1..=15).contains(&variant) {
        return Err(Error::VariantOutOfRange(variant));
    }
    let v = variant as u32;
    let theta = TAU * f64::from(v % 15) / 15.0;
    let goal = [GOAL_RADIUS * theta.cos(), GOAL_RADIUS * theta.sin()];
    let obstacles = (0..6u32)
        .map(|k| {
            let th = TAU * f64::from(k) / 6.0 + 0.15 * f64::from(v % 5);
            let rho = 1.2 + 0.2 * f64::from((v + k) % 3);
            Obstacle {
                center: [rho * th.cos(), rho * th.sin()],
                radius: 0.35 + 0.05 * f64::from((v + 2 * k) % 4),
            }
        })
        .collect();
    Ok(SymNavMap {
        variant: v,
        goal,
        obstacles,
        wind_scale: 0.15 * f64::from(v % 5 + 1),
        world_radius: DEFAULT_WORLD_RADIUS,
    })
}

impl SymNavMap {
    /// `w(x, y) = k (sin(y/2), cos(x/2))`.
    pub fn wind(&self, x: f64, y: f64) -> [f64; 2] {
        [
            self.wind_scale * (0.5 * y).sin(),
            self.wind_scale * (0.5 * x).cos(),
        ]
    }

    pub fn goal_distance(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.goal[0]).hypot(p[1] - self.goal[1])
    }

    pub fn collides(&self, p: [f64; 2]) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Free distance from `p` along the unit direction `u` before hitting an
    /// obstacle or the world boundary.
    pub fn ray_distance(&self, p: [f64; 2], u: [f64; 2]) -> f64 {
        let r_w = self.world_radius;
        let pp = p[0] * p[0] + p[1] * p[1];
        let mut best = if pp >= r_w * r_w {
            0.0
        } else {
            let b = u[0] * p[0] + u[1] * p[1];
            -b + (b * b - (pp - r_w * r_w)).sqrt()
        };
        for o in &self.obstacles {
            let dx = p[0] - o.center[0];
            let dy = p[1] - o.center[1];
            let c = dx * dx + dy * dy - o.radius * o.radius;
            if c <= 0.0 {
                return 0.0;
            }
            let b = u[0] * dx + u[1] * dy;
            let disc = b * b - c;
            if disc < 0.0 {
                continue;
            }
            let t = -b - disc.sqrt();
            if t >= 0.0 && t < best {
                best = t;
            }
        }
        best
    }
}

/// `[x, y, v_x, v_y, g_x − x, g_y − y, d₁ … d₈]` with `d_i = min(t_i / R, 1)`
/// along rays at angles `2πi/8`.
pub fn symnav_observe(map: &SymNavMap, s: &StateVec) -> [f64; 14] {
    let mut o = [0.0; 14];
    for i in 0..4 {
        o[i] = s[i];
    }
    o[4] = map.goal[0] - s[0];
    o[5] = map.goal[1] - s[1];
    let p = [s[0], s[1]];
    for i in 0..LIDAR_RAYS {
        let th = TAU * i as f64 / LIDAR_RAYS as f64;
        let t = map.ray_distance(p, [th.cos(), th.sin()]);
        o[6 + i] = (t / map.world_radius).clamp(0.0, 1.0);
    }
    o
}

/// Navigation dynamics `f = a + w(p) − λv` on one generated map.
#[derive(Debug, Clone, PartialEq)]
pub struct SymNav {
    pub cfg: SimConfig,
    pub map: SymNavMap,
}

impl SymNav {
    pub fn new(cfg: SimConfig, map: SymNavMap) -> Self {
        Self { cfg, map }
    }

    pub fn from_variant(cfg: SimConfig, variant: i64) -> Result<Self> {
        Ok(Self::new(cfg, symnav_map(variant)?))
    }

    pub fn observe(&self, s: &StateVec) -> [f64; 14] {
        symnav_observe(&self.map, s)
    }
}

impl EnvModel for SymNav {
    fn name(&self) -> &str {
        "symnav"
    }
    fn dim_s(&self) -> usize {
        4
    }
    fn dim_a(&self) -> usize {
        2
    }
    fn drift(&self, s: &StateVec, a: &ActionVec) -> DVector<f64> {
        let lam = self.cfg.lambda_damp;
        let w = self.map.wind(s[0], s[1]);
        DVector::from_vec(vec![
            s[2],
            s[3],
            a[0] + w[0] - lam * s[2],
            a[1] + w[1] - lam * s[3],
        ])
    }
    fn diffusion_q(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        velocity_noise_q(self.cfg.sigma)
    }
    /// Dense shaping, collision penalty and success bonus at `p`.
    fn reward(&self, s: &StateVec, _a: &ActionVec) -> f64 {
        let p = [s[0], s[1]];
        let d = self.map.goal_distance(p);
        let mut r = -d;
        if self.map.collides(p) {
            r -= COLLISION_PENALTY;
        }
        if d < SUCCESS_RADIUS {
            r += SUCCESS_BONUS;
        }
        r
    }
    /// Gradient of the dense term; the indicator terms are flat almost everywhere.
    fn grad_s_reward(&self, s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        let dx = s[0] - self.map.goal[0];
        let dy = s[1] - self.map.goal[1];
        let d = dx.hypot(dy);
        if d == 0.0 {
            DVector::zeros(4)
        } else {
            DVector::from_vec(vec![-dx / d, -dy / d, 0.0, 0.0])
        }
    }
    fn grad_a_reward(&self, _s: &StateVec, _a: &ActionVec) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn jac_s_drift(&self, s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        let lam = self.cfg.lambda_damp;
        let k = self.map.wind_scale;
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 1)] = 0.5 * k * (0.5 * s[1]).cos();
        j[(2, 2)] = -lam;
        j[(3, 0)] = -0.5 * k * (0.5 * s[0]).sin();
        j[(3, 3)] = -lam;
        j
    }
    fn jac_a_drift(&self, _s: &StateVec, _a: &ActionVec) -> DMatrix<f64> {
        accel_jac_a()
    }
    fn dir_s_q(&self, _s: &StateVec, _a: &ActionVec, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(4, 4)
    }
    fn dir_a_q(&self, _s: &StateVec, _a: &ActionVec, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(4, 4)
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
}

impl Dynamics for SymNav {
    fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Reward and the collided/success flags are evaluated at the pre-step
    /// position; the new position is clamped into the world disk.
    fn step_with_noise(&self, s: &StateVec, a: &ActionVec, xi: &[f64]) -> Result<Transition> {
        check_action(a)?;
        let mut s_next = semi_implicit_step(self, &self.cfg, s, a, xi);
        check_finite(s, a, &s_next)?;
        let r = s_next[0].hypot(s_next[1]);
        let r_w = self.map.world_radius;
        let projected = r > r_w;
        if projected {
            s_next[0] *= r_w / r;
            s_next[1] *= r_w / r;
        }
        let p = [s[0], s[1]];
        Ok(Transition {
            reward: self.reward(s, a),
            s: s.clone(),
            a: a.clone(),
            s_next,
            flags: TransitionFlags {
                projected,
                collided: self.map.collides(p),
                success: self.map.goal_distance(p) < SUCCESS_RADIUS,
                ..Default::default()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn variant_fifteen_goal_on_positive_axis() {
        let m = symnav_map(15).unwrap();
        assert_eq!(m.goal, [3.5, 0.0]);
    }

    #[test]
    fn variant_one_first_obstacle_and_wind() {
        let m = symnav_map(1).unwrap();
        let o = m.obstacles[0];
        assert_relative_eq!(o.center[0], 1.4 * 0.15f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(o.center[1], 1.4 * 0.15f64.sin(), epsilon = 1e-15);
        assert_relative_eq!(o.radius, 0.40, epsilon = 1e-15);
        assert_relative_eq!(m.wind_scale, 0.30, epsilon = 1e-15);
        assert_eq!(m.obstacles.len(), 6);
    }

    #[test]
    fn out_of_range_variants_rejected() {
        assert!(matches!(symnav_map(0), Err(Error::VariantOutOfRange(0))));
        assert!(symnav_map(16).is_err());
    }

    #[test]
    fn goal_relative_features_vanish_at_goal() {
        let m = symnav_map(3).unwrap();
        let o = symnav_observe(&m, &v(&[m.goal[0], m.goal[1], 0.0, 0.0]));
        assert_eq!((o[4], o[5]), (0.0, 0.0));
    }

    #[test]
    fn lidar_hits_world_boundary_and_obstacle() {
        let mut m = symnav_map(1).unwrap();
        m.obstacles.clear();
        m.world_radius = 4.0;
        let o = symnav_observe(&m, &v(&[0.0; 4]));
        assert_relative_eq!(o[6], 1.0, epsilon = 1e-15);
        m.obstacles.push(Obstacle {
            center: [1.0, 0.0],
            radius: 0.4,
        });
        let o = symnav_observe(&m, &v(&[0.0; 4]));
        assert_relative_eq!(o[6], 0.15, epsilon = 1e-15);
        // the -x ray still sees the boundary
        assert_relative_eq!(o[10], 1.0, epsilon = 1e-15);
        assert!(o[6..].iter().all(|d| (0.0..=1.0).contains(d)));
    }

    #[test]
    fn reward_at_goal_is_success_bonus() {
        let mut m = symnav_map(15).unwrap();
        m.obstacles.clear();
        let env = SymNav::new(SimConfig::symnav_default().noiseless(), m.clone());
        let s = v(&[m.goal[0], m.goal[1], 0.0, 0.0]);
        let t = env.step_with_noise(&s, &v(&[0.0, 0.0]), &[0.0, 0.0]).unwrap();
        assert_eq!(t.reward, 10.0);
        assert!(t.flags.success && !t.flags.collided);
    }

    #[test]
    fn collision_penalty_applies_inside_obstacle() {
        let m = symnav_map(2).unwrap();
        let c = m.obstacles[0].center;
        let env = SymNav::new(SimConfig::symnav_default(), m.clone());
        let s = v(&[c[0], c[1], 0.0, 0.0]);
        let r = env.reward(&s, &v(&[0.0, 0.0]));
        assert_relative_eq!(r, -m.goal_distance(c) - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn world_clamp() {
        let env = SymNav::from_variant(SimConfig::symnav_default().noiseless(), 4).unwrap();
        let t = env
            .step_with_noise(&v(&[0.0, 4.49, 0.0, 5.0]), &v(&[0.0, 1.0]), &[0.0, 0.0])
            .unwrap();
        assert!(t.flags.projected);
        assert_relative_eq!(t.s_next[0].hypot(t.s_next[1]), DEFAULT_WORLD_RADIUS, epsilon = 1e-12);
    }
}
