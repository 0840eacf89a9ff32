//! Structure discovery: determining-equation residuals, the penalized loss,
//! SGD over affine generators, and mismatch diagnostics for finite transforms.

mod alignment;
mod loss;
mod mismatch;
mod oracle;
mod residuals;
mod sampler;
mod semigroup;
mod sgd;

pub use alignment::alignment;
pub use loss::{gram_penalty, loss_and_grad, loss_value, penalty_moments, LossValue, LossWeights, NormEstimate};
pub use mismatch::{measure_mismatch, quadratic_monomials, MismatchReport, Monomial, NonInvariance, TestFunction};
pub use oracle::{residual_design_matrix, residual_null_space, NullSpace};
pub use residuals::{residual_diffusion, residual_drift, residual_reward, residuals, ResidualBatch, Residuals};
pub use sampler::{ReplaySampler, StateMoments};
pub use semigroup::{semigroup_check, SemigroupEstimate};
pub use sgd::{
    estimate_smoothness, sgd_discover, sgd_discover_family, Discovery, DiscoveryTrace, LossConfig, TraceRow,
    DIVERGENCE_LOSS,
};
