use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{gram_penalty, loss_and_grad, penalty_moments, LossWeights, NormEstimate};
use super::sampler::ReplaySampler;
use crate::error::{Error, Result};
use crate::generator::GeneratorPair;
use crate::model::EnvModel;

/// Loss at which a run is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub batch_size: usize,
    pub step_size: f64,
    pub steps: usize,
    pub replay: ReplaySampler,
    pub norm_estimate: NormEstimate,
}

impl LossConfig {
    /// Defaults for a `d`-dimensional state box `[-2, 2]^d` and action box
    /// `[-1, 1]^m`: batch 256, `η = 1e-2`, 5000 steps.
    pub fn box_defaults(d: usize, m: usize) -> Self {
        Self {
            weights: LossWeights::default(),
            batch_size: 256,
            step_size: 1e-2,
            steps: 5000,
            replay: ReplaySampler::symmetric_box(d, 2.0, m, 1.0),
            norm_estimate: NormEstimate::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step_size", format!("must be positive, got {}", self.step_size)));
        }
        self.replay.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub residual_loss: f64,
    pub grad_norm: f64,
    /// `E_ρS ‖X(s)‖²`.
    pub field_norm: f64,
}

/// Per-step record of a discovery run, taken before each update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTrace {
    pub rows: Vec<TraceRow>,
}

impl DiscoveryTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Means of the total loss over consecutive non-overlapping windows.
    /// A trailing partial window is dropped.
    pub fn window_means(&self, window: usize) -> Vec<f64> {
        self.rows
            .chunks_exact(window.max(1))
            .map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Index of the first window whose mean exceeds its predecessor's by more
    /// than `rel_slack` relative, if any.
    pub fn first_window_increase(&self, window: usize, rel_slack: f64) -> Option<usize> {
        let w = self.window_means(window);
        (1..w.len()).find(|&k| w[k] > w[k - 1] * (1.0 + rel_slack))
    }
}

#[derive(Debug, Clone)]
pub struct Discovery {
    pub generator: GeneratorPair,
    pub trace: DiscoveryTrace,
}

/// Plain constant-step minibatch SGD on the discovery loss.
pub fn sgd_discover<R: Rng + ?Sized>(
    model: &dyn EnvModel,
    init: &GeneratorPair,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<Discovery> {
    cfg.validate()?;
    crate::error::ensure_dim("replay state dimension", model.dim_s(), cfg.replay.dim_s())?;
    crate::error::ensure_dim("replay action dimension", model.dim_a(), cfg.replay.dim_a())?;
    let exact = cfg.replay.state_moments()?;
    let mut gen = init.clone();
    let mut trace = DiscoveryTrace::default();
    for step in 0..cfg.steps {
        let batch = cfg.replay.sample(rng, cfg.batch_size);
        let moments = penalty_moments(cfg.norm_estimate, &exact, &batch)?;
        let (value, grad) = loss_and_grad(model, &gen, &batch, &cfg.weights, &moments)?;
        let grad_norm = grad.param_norm();
        trace.rows.push(TraceRow {
            step,
            loss: value.total,
            residual_loss: value.residual,
            grad_norm,
            field_norm: value.field_sq_norm,
        });
        if !value.total.is_finite() || value.total > DIVERGENCE_LOSS || !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: value.total,
                trace: Box::new(trace),
            });
        }
        gen = gen.add_scaled(-cfg.step_size, &grad);
    }
    Ok(Discovery { generator: gen, trace })
}

/// Joint discovery of several generators with the Gram penalty
/// `λ_orth Σ_{i≠j} (E[X_i·X_j])²` added to the sum of per-generator losses.
/// All generators see the same minibatch at each step.
pub fn sgd_discover_family<R: Rng + ?Sized>(
    model: &dyn EnvModel,
    inits: &[GeneratorPair],
    cfg: &LossConfig,
    lambda_orth: f64,
    rng: &mut R,
) -> Result<(Vec<GeneratorPair>, DiscoveryTrace)> {
    cfg.validate()?;
    if inits.is_empty() {
        return Err(Error::invalid("inits", "need at least one generator"));
    }
    if !(lambda_orth >= 0.0 && lambda_orth.is_finite()) {
        return Err(Error::invalid("lambda_orth", "must be finite and nonnegative"));
    }
    let exact = cfg.replay.state_moments()?;
    let mut gens = inits.to_vec();
    let mut trace = DiscoveryTrace::default();
    for step in 0..cfg.steps {
        let batch = cfg.replay.sample(rng, cfg.batch_size);
        let moments = penalty_moments(cfg.norm_estimate, &exact, &batch)?;
        let mut total = 0.0;
        let mut residual = 0.0;
        let mut field = 0.0;
        let mut grads = Vec::with_capacity(gens.len());
        for g in &gens {
            let (v, grad) = loss_and_grad(model, g, &batch, &cfg.weights, &moments)?;
            total += v.total;
            residual += v.residual;
            field += v.field_sq_norm;
            grads.push(grad);
        }
        let (gram, gram_grads) = gram_penalty(&gens, &moments);
        total += lambda_orth * gram;
        for (g, (da, dc)) in grads.iter_mut().zip(gram_grads) {
            g.a_x += lambda_orth * da;
            g.c_x += lambda_orth * dc;
        }
        let grad_norm = grads.iter().map(|g| g.param_norm().powi(2)).sum::<f64>().sqrt();
        trace.rows.push(TraceRow {
            step,
            loss: total,
            residual_loss: residual,
            grad_norm,
            field_norm: field / gens.len() as f64,
        });
        if !total.is_finite() || total > DIVERGENCE_LOSS || !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: total,
                trace: Box::new(trace),
            });
        }
        for (g, d) in gens.iter_mut().zip(&grads) {
            *g = g.add_scaled(-cfg.step_size, d);
        }
    }
    Ok((gens, trace))
}

/// Empirical gradient-Lipschitz constant of the discovery loss on a fixed
/// batch: the largest `‖∇L(θ₁) − ∇L(θ₂)‖ / ‖θ₁ − θ₂‖` over pairs where `θ₁`
/// is drawn from `anchors` plus a Gaussian perturbation of size `radius` and
/// `θ₂` is a further perturbation of size `radius / 10`.
pub fn estimate_smoothness<R: Rng + ?Sized>(
    model: &dyn EnvModel,
    anchors: &[GeneratorPair],
    cfg: &LossConfig,
    pairs_per_anchor: usize,
    radius: f64,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let batch = cfg.replay.sample(rng, cfg.batch_size);
    let exact = cfg.replay.state_moments()?;
    let moments = penalty_moments(cfg.norm_estimate, &exact, &batch)?;
    let (d, m) = (model.dim_s(), model.dim_a());
    let mut best = 0.0f64;
    for anchor in anchors {
        for _ in 0..pairs_per_anchor {
            let t1 = anchor.add_scaled(1.0, &GeneratorPair::random(d, m, radius, rng));
            let t2 = t1.add_scaled(1.0, &GeneratorPair::random(d, m, 0.1 * radius, rng));
            let (_, g1) = loss_and_grad(model, &t1, &batch, &cfg.weights, &moments)?;
            let (_, g2) = loss_and_grad(model, &t2, &batch, &cfg.weights, &moments)?;
            let num = g1.add_scaled(-1.0, &g2).param_norm();
            let den = t1.add_scaled(-1.0, &t2).param_norm();
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Rot2D, SimConfig};
    use crate::rng::seeded;

    #[test]
    fn divergence_aborts_with_trace() {
        let model = Rot2D::new(SimConfig::default());
        let mut cfg = LossConfig::box_defaults(4, 2);
        cfg.step_size = 5.0;
        cfg.steps = 200;
        cfg.batch_size = 8;
        let init = GeneratorPair::random(4, 2, 0.3, &mut seeded(0));
        match sgd_discover(&model, &init, &cfg, &mut seeded(1)) {
            Err(Error::Diverged { step, trace, .. }) => {
                assert_eq!(trace.len(), step + 1);
                assert!(step < 200);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn window_helpers() {
        let trace = DiscoveryTrace {
            rows: (0..10)
                .map(|i| TraceRow {
                    step: i,
                    loss: if i < 5 { 2.0 } else { 1.0 },
                    residual_loss: 0.0,
                    grad_norm: 0.0,
                    field_norm: 0.0,
                })
                .collect(),
        };
        assert_eq!(trace.window_means(5), vec![2.0, 1.0]);
        assert_eq!(trace.window_means(3).len(), 3);
        assert_eq!(trace.first_window_increase(5, 0.0), None);
    }

    #[test]
    fn invalid_config_rejected() {
        let model = Rot2D::new(SimConfig::default());
        let mut cfg = LossConfig::box_defaults(4, 2);
        cfg.batch_size = 0;
        let init = GeneratorPair::zeros(4, 2);
        assert!(sgd_discover(&model, &init, &cfg, &mut seeded(0)).is_err());
    }
}
