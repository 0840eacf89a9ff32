//! Finite transforms from generator flows.

mod flow;
mod order;
mod transform;

pub use flow::{integrate_affine, integrate_flow, FiniteTransform, Retraction, MAX_FLOW_STEPS};
pub use order::{estimate_order, estimate_order_against, OrderEstimate, OrderPoint, NOISE_FLOOR};
pub use transform::{block_rotation, transform_transition, LinearTransform, Transform};
