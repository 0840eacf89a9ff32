use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ActionVec, StateVec};
use crate::rng::uniform;

/// First and second moments of a state distribution, `μ = E[s]` and
/// `M₂ = E[s sᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMoments {
    pub mean: DVector<f64>,
    pub second: DMatrix<f64>,
}

impl StateMoments {
    pub fn from_samples<'a, I>(states: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a StateVec>,
    {
        let mut it = states.into_iter().peekable();
        let d = it
            .peek()
            .map(|s| s.len())
            .ok_or_else(|| Error::invalid("samples", "empty sample set"))?;
        let mut mean = DVector::zeros(d);
        let mut second = DMatrix::zeros(d, d);
        let mut n = 0usize;
        for s in it {
            mean += s;
            second += s * s.transpose();
            n += 1;
        }
        let n = n as f64;
        Ok(Self {
            mean: mean / n,
            second: second / n,
        })
    }

    /// Moments of the uniform distribution on the box `[lo, hi]`.
    pub fn uniform_box(lo: &[f64], hi: &[f64]) -> Self {
        let d = lo.len();
        let mean = DVector::from_fn(d, |i, _| 0.5 * (lo[i] + hi[i]));
        let second = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                (lo[i] * lo[i] + lo[i] * hi[i] + hi[i] * hi[i]) / 3.0
            } else {
                mean[i] * mean[j]
            }
        });
        Self { mean, second }
    }

    /// `E‖A s + c‖² = tr(A M₂ Aᵀ) + 2 cᵀ A μ + ‖c‖²`.
    pub fn expected_sq_norm(&self, a: &DMatrix<f64>, c: &DVector<f64>) -> f64 {
        self.expected_inner(a, c, a, c)
    }

    /// `E[(A₁ s + c₁)·(A₂ s + c₂)]`.
    pub fn expected_inner(&self, a1: &DMatrix<f64>, c1: &DVector<f64>, a2: &DMatrix<f64>, c2: &DVector<f64>) -> f64 {
        let quad = (a1.transpose() * a2).component_mul(&self.second).sum();
        quad + c1.dot(&(a2 * &self.mean)) + c2.dot(&(a1 * &self.mean)) + c1.dot(c2)
    }

    /// Gradient of `E[(A₁ s + c₁)·(A₂ s + c₂)]` with respect to `(A₁, c₁)`:
    /// `(A₂ M₂ + c₂ μᵀ, A₂ μ + c₂)`.
    pub fn inner_grad(&self, a2: &DMatrix<f64>, c2: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        (a2 * &self.second + c2 * self.mean.transpose(), a2 * &self.mean + c2)
    }
}

/// Replay distribution `ρ` over `(s, a)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplaySampler {
    /// Independent uniform coordinates on a state box times an action box.
    UniformBox {
        state_lo: Vec<f64>,
        state_hi: Vec<f64>,
        action_lo: Vec<f64>,
        action_hi: Vec<f64>,
    },
    /// Uniform draws with replacement from a fixed buffer.
    Buffer(Vec<(StateVec, ActionVec)>),
}

impl ReplaySampler {
    /// `[-half_s, half_s]^d × [-half_a, half_a]^m`.
    pub fn symmetric_box(d: usize, half_s: f64, m: usize, half_a: f64) -> Self {
        ReplaySampler::UniformBox {
            state_lo: vec![-half_s; d],
            state_hi: vec![half_s; d],
            action_lo: vec![-half_a; m],
            action_hi: vec![half_a; m],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReplaySampler::UniformBox {
                state_lo,
                state_hi,
                action_lo,
                action_hi,
            } => {
                if state_lo.len() != state_hi.len() || action_lo.len() != action_hi.len() {
                    return Err(Error::invalid("replay", "box bounds have mismatched lengths"));
                }
                let ok = state_lo.iter().zip(state_hi).chain(action_lo.iter().zip(action_hi))
                    .all(|(l, h)| l.is_finite() && h.is_finite() && l <= h);
                if !ok {
                    return Err(Error::invalid("replay", "box bounds must be finite with lo <= hi"));
                }
                Ok(())
            }
            ReplaySampler::Buffer(b) if b.is_empty() => Err(Error::invalid("replay", "empty buffer")),
            ReplaySampler::Buffer(_) => Ok(()),
        }
    }

    pub fn dim_s(&self) -> usize {
        match self {
            ReplaySampler::UniformBox { state_lo, .. } => state_lo.len(),
            ReplaySampler::Buffer(b) => b.first().map_or(0, |x| x.0.len()),
        }
    }

    pub fn dim_a(&self) -> usize {
        match self {
            ReplaySampler::UniformBox { action_lo, .. } => action_lo.len(),
            ReplaySampler::Buffer(b) => b.first().map_or(0, |x| x.1.len()),
        }
    }

    /// Exact moments of the state marginal `ρ_S`.
    pub fn state_moments(&self) -> Result<StateMoments> {
        match self {
            ReplaySampler::UniformBox { state_lo, state_hi, .. } => Ok(StateMoments::uniform_box(state_lo, state_hi)),
            ReplaySampler::Buffer(b) => StateMoments::from_samples(b.iter().map(|x| &x.0)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<(StateVec, ActionVec)> {
        match self {
            ReplaySampler::UniformBox {
                state_lo,
                state_hi,
                action_lo,
                action_hi,
            } => (0..n)
                .map(|_| {
                    let s = DVector::from_fn(state_lo.len(), |i, _| uniform(rng, state_lo[i], state_hi[i]));
                    let a = DVector::from_fn(action_lo.len(), |i, _| uniform(rng, action_lo[i], action_hi[i]));
                    (s, a)
                })
                .collect(),
            ReplaySampler::Buffer(b) => (0..n).map(|_| b[rng.random_range(0..b.len())].clone()).collect(),
        }
    }
}
