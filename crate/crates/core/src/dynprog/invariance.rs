//! Value-invariance diagnostics on grid value functions.

use serde::{Deserialize, Serialize};

use super::lattice::GridValue;
use crate::error::{ensure_dim, Result};
use crate::flows::Transform;
use crate::model::StateVec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonInvariancePoint {
    pub alpha: f64,
    pub mean: f64,
    pub sup: f64,
    pub evaluated: usize,
    /// Probes that were outside the box or mapped outside it.
    pub dropped: usize,
}

/// `|V(s) − V(g(s))|` statistics over probes for a single transform.
pub fn noninvariance_stats(values: &GridValue, transform: &dyn Transform, probes: &[StateVec]) -> Result<NonInvariancePoint> {
    ensure_dim("transform state dimension", values.lattice.dim(), transform.dim_s())?;
    let (mut sum, mut sup, mut n, mut dropped) = (0.0, 0.0f64, 0usize, 0usize);
    for p in probes {
        let Some(v) = values.interpolate(p.as_slice()) else {
            dropped += 1;
            continue;
        };
        let gp = transform.map_state(p)?;
        let Some(vg) = values.interpolate(gp.as_slice()) else {
            dropped += 1;
            continue;
        };
        let d = (v - vg).abs();
        sum += d;
        sup = sup.max(d);
        n += 1;
    }
    Ok(NonInvariancePoint {
        alpha: 0.0,
        mean: if n > 0 { sum / n as f64 } else { 0.0 },
        sup,
        evaluated: n,
        dropped,
    })
}

/// Non-invariance curve over flow times; `transform_at(α)` builds `g_α`.
pub fn value_noninvariance<T, F>(values: &GridValue, transform_at: F, alphas: &[f64], probes: &[StateVec]) -> Result<Vec<NonInvariancePoint>>
where
    T: Transform,
    F: Fn(f64) -> Result<T>,
{
    alphas
        .iter()
        .map(|&alpha| {
            let t = transform_at(alpha)?;
            let mut point = noninvariance_stats(values, &t, probes)?;
            point.alpha = alpha;
            Ok(point)
        })
        .collect()
}

/// `(‖p‖², ‖v‖², p·v, p×v)` for `s = (p, v)`; a two-dimensional state is
/// read as a position with zero velocity.
pub fn invariant_coordinates_rot2d(s: &StateVec) -> [f64; 4] {
    let (px, py) = (s[0], s[1]);
    let (vx, vy) = if s.len() >= 4 { (s[2], s[3]) } else { (0.0, 0.0) };
    [px * px + py * py, vx * vx + vy * vy, px * vx + py * vy, px * vy - py * vx]
}

/// Mean `|I₁[V₁](x) − I₂[V₂](x)|` over probes inside both boxes: the
/// interpolation-error budget of a coarse value table measured against a
/// refined one.
pub fn refinement_error(coarse: &GridValue, fine: &GridValue, probes: &[StateVec]) -> f64 {
    let diffs: Vec<f64> = probes
        .iter()
        .filter_map(|p| Some((coarse.interpolate(p.as_slice())? - fine.interpolate(p.as_slice())?).abs()))
        .collect();
    if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    /// Mean `|V(s) − V̄(‖p‖)|` over lattice nodes in the disk.
    pub mean_abs_residual: f64,
    pub max_abs_residual: f64,
    /// Largest raw `max − min` of values within a bin.
    pub max_bin_spread: f64,
    pub nodes: usize,
    pub bins: usize,
}

/// How well grid values factor through the invariant `‖p‖²`: nodes with
/// `‖p‖ ≤ r_max` are binned by radius, `V̄` is the piecewise-linear curve
/// through the bin means, and the report gives the residual spread around it.
pub fn invariant_factorization(values: &GridValue, r_max: f64, n_bins: usize) -> FactorizationReport {
    let n_bins = n_bins.max(1);
    let mut sums = vec![(0.0, 0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY); n_bins];
    let mut nodes = Vec::new();
    for (idx, p) in values.lattice.points().iter().enumerate() {
        let r = invariant_coordinates_rot2d(p)[0].sqrt();
        if r > r_max {
            continue;
        }
        let b = ((r / r_max * n_bins as f64) as usize).min(n_bins - 1);
        let v = values.values[idx];
        let e = &mut sums[b];
        e.0 += r;
        e.1 += v;
        e.2 += 1;
        e.3 = e.3.min(v);
        e.4 = e.4.max(v);
        nodes.push((r, v));
    }
    let knots: Vec<(f64, f64)> = sums
        .iter()
        .filter(|e| e.2 > 0)
        .map(|e| (e.0 / e.2 as f64, e.1 / e.2 as f64))
        .collect();
    let max_bin_spread = sums.iter().filter(|e| e.2 > 0).map(|e| e.4 - e.3).fold(0.0, f64::max);
    let curve = |r: f64| -> f64 {
        if knots.len() == 1 || r <= knots[0].0 {
            return knots[0].1;
        }
        for w in knots.windows(2) {
            if r <= w[1].0 {
                let t = (r - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        knots[knots.len() - 1].1
    };
    let residuals: Vec<f64> = nodes.iter().map(|&(r, v)| (v - curve(r)).abs()).collect();
    FactorizationReport {
        mean_abs_residual: if residuals.is_empty() { 0.0 } else { residuals.iter().sum::<f64>() / residuals.len() as f64 },
        max_abs_residual: residuals.iter().copied().fold(0.0, f64::max),
        max_bin_spread,
        nodes: nodes.len(),
        bins: knots.len(),
    }
}

/// Second-difference proxy for `‖V‖_{C²}` on a two-dimensional lattice:
/// `sup|V| + sup‖∇_h V‖ + sup|∂²_h V|` over interior nodes with central
/// differences.
pub fn c2_proxy(values: &GridValue) -> f64 {
    let lat = &values.lattice;
    let d = lat.dim();
    let at = |m: &[usize]| values.values[lat.flat_index(m)];
    let mut sup_v = 0.0f64;
    let mut sup_g = 0.0f64;
    let mut sup_h = 0.0f64;
    for idx in 0..lat.len() {
        let m = lat.multi_index(idx);
        sup_v = sup_v.max(values.values[idx].abs());
        if (0..d).any(|i| m[i] == 0 || m[i] + 1 == lat.n[i]) {
            continue;
        }
        let mut g2 = 0.0;
        for i in 0..d {
            let h = lat.spacing(i);
            let mut up = m.clone();
            up[i] += 1;
            let mut dn = m.clone();
            dn[i] -= 1;
            let (vu, v0, vd) = (at(&up), at(&m), at(&dn));
            g2 += ((vu - vd) / (2.0 * h)).powi(2);
            sup_h = sup_h.max(((vu - 2.0 * v0 + vd) / (h * h)).abs());
            for j in (i + 1)..d {
                let hj = lat.spacing(j);
                let corner = |si: bool, sj: bool| {
                    let mut c = m.clone();
                    c[i] = if si { c[i] + 1 } else { c[i] - 1 };
                    c[j] = if sj { c[j] + 1 } else { c[j] - 1 };
                    at(&c)
                };
                let mixed = (corner(true, true) - corner(true, false) - corner(false, true) + corner(false, false)) / (4.0 * h * hj);
                sup_h = sup_h.max(mixed.abs());
            }
        }
        sup_g = sup_g.max(g2.sqrt());
    }
    sup_v + sup_g + sup_h
}

/// `(ε_r + ε_L · C) / β`, reported as an indicative level only.
pub fn indicative_value_bound(eps_r: f64, eps_l: f64, c2: f64, beta: f64) -> f64 {
    (eps_r + eps_l * c2) / beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynprog::Lattice;
    use crate::flows::LinearTransform;
    use nalgebra::DVector;

    fn radial_grid(n: usize) -> GridValue {
        let lat = Lattice::cube(2, -2.0, 2.0, n).unwrap();
        let vals = lat.points().iter().map(|p| -p.norm_squared()).collect();
        GridValue::new(lat, vals).unwrap()
    }

    #[test]
    fn invariant_coordinates_examples() {
        let s = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(invariant_coordinates_rot2d(&s), [1.0, 1.0, 0.0, 1.0]);
        assert_eq!(invariant_coordinates_rot2d(&DVector::zeros(4)), [0.0; 4]);
    }

    #[test]
    fn zero_angle_has_zero_noninvariance() {
        let gv = radial_grid(21);
        let probes: Vec<StateVec> = (0..20).map(|k| DVector::from_vec(vec![0.05 * k as f64, -0.03 * k as f64])).collect();
        let pts = value_noninvariance(&gv, |a| LinearTransform::rotation(2, 2, a), &[0.0], &probes).unwrap();
        assert_eq!(pts[0].sup, 0.0);
        assert_eq!(pts[0].evaluated, 20);
    }

    #[test]
    fn probes_leaving_the_box_are_dropped() {
        let gv = radial_grid(21);
        let probes = vec![DVector::from_vec(vec![1.9, 1.9]), DVector::from_vec(vec![3.0, 0.0])];
        let p = noninvariance_stats(&gv, &LinearTransform::rotation(2, 2, 0.3).unwrap(), &probes).unwrap();
        assert_eq!(p.dropped, 2);
        assert_eq!(p.evaluated, 0);
    }

    #[test]
    fn radial_values_factor_through_radius() {
        let rep = invariant_factorization(&radial_grid(41), 1.5, 60);
        assert!(rep.mean_abs_residual < 1e-2, "{rep:?}");
        assert!(rep.nodes > 100);
    }

    #[test]
    fn c2_proxy_of_quadratic() {
        // V = -|p|²: sup|V| = 8, sup|∇V| ≈ 2√2·1.9, second differences = 2
        let c = c2_proxy(&radial_grid(21));
        assert!((c - (8.0 + 2.0 * (2.0f64).sqrt() * 1.8 + 2.0)).abs() < 1e-9, "{c}");
    }
}
