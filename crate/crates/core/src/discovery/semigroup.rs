use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Dynamics;
use crate::error::{Error, Result};
use crate::flows::Transform;
use crate::model::{ActionVec, StateVec};
use crate::rng::normals;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    /// `|mean(f(g(s_t)) − f(s'_t))|`.
    pub gap: f64,
    pub std_error: f64,
    pub mean_lhs: f64,
    pub mean_rhs: f64,
    pub n_paths: usize,
    pub steps: usize,
}

impl SemigroupEstimate {
    /// `gap / std_error`, infinite for a nonzero gap with zero spread.
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            self.gap / self.std_error
        } else if self.gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte Carlo estimate of `|E[f(g(s_t)) | s, a] − E[f(s_t) | g(s), h(a)]|`
/// under a constant action, driving both paths with the same noise sequence.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_check<R: Rng + ?Sized>(
    env: &dyn Dynamics,
    transform: &dyn Transform,
    f: &dyn Fn(&StateVec) -> f64,
    s: &StateVec,
    a: &ActionVec,
    t: f64,
    n_paths: usize,
    rng: &mut R,
) -> Result<SemigroupEstimate> {
    let dt = env.config().dt;
    let steps_f = t / dt;
    let steps = steps_f.round();
    if !(t >= 0.0) || (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::invalid("t", format!("must be a nonnegative multiple of dt={dt}, got {t}")));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least 2 paths"));
    }
    let steps = steps as usize;
    let gs0 = transform.map_state(s)?;
    let ha = transform.map_action(a)?;
    let noisy = env.config().noise_enabled;
    let nd = env.noise_dim();
    let zero = vec![0.0; nd];

    let mut diffs = Vec::with_capacity(n_paths);
    let (mut sum_l, mut sum_r) = (0.0, 0.0);
    for _ in 0..n_paths {
        let mut x = s.clone();
        let mut y = gs0.clone();
        for _ in 0..steps {
            let xi = if noisy { normals(rng, nd) } else { zero.clone() };
            x = env.step_with_noise(&x, a, &xi)?.s_next;
            y = env.step_with_noise(&y, &ha, &xi)?.s_next;
        }
        let lhs = f(&transform.map_state(&x)?);
        let rhs = f(&y);
        sum_l += lhs;
        sum_r += rhs;
        diffs.push(lhs - rhs);
    }
    let n = n_paths as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SemigroupEstimate {
        gap: mean.abs(),
        std_error: (var / n).sqrt(),
        mean_lhs: sum_l / n,
        mean_rhs: sum_r / n,
        n_paths,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Rot2D, SimConfig};
    use crate::flows::LinearTransform;
    use crate::rng::seeded;
    use nalgebra::DVector;

    #[test]
    fn zero_time_gap_is_exactly_zero() {
        let env = Rot2D::new(SimConfig::default());
        let rot = LinearTransform::rotation(4, 2, 0.7).unwrap();
        let f = |s: &StateVec| s[0] * s[0] + s[1] * s[1];
        let s = DVector::from_vec(vec![1.0, 0.2, 0.0, 0.3]);
        let a = DVector::from_vec(vec![0.5, 0.0]);
        let est = semigroup_check(&env, &rot, &f, &s, &a, 0.0, 10, &mut seeded(0)).unwrap();
        assert_eq!(est.gap, 0.0);
        assert_eq!(est.steps, 0);
    }

    #[test]
    fn rejects_off_grid_time() {
        let env = Rot2D::new(SimConfig::default());
        let rot = LinearTransform::identity(4, 2);
        let f = |s: &StateVec| s[0];
        let s = DVector::zeros(4);
        let a = DVector::zeros(2);
        assert!(semigroup_check(&env, &rot, &f, &s, &a, 0.07, 10, &mut seeded(0)).is_err());
    }
}
