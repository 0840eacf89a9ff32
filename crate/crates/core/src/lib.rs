//! Discovery and verification of value-preserving transformations for
//! controlled diffusions.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`], [`generator`]: environment models with analytic derivatives
//!   and affine generator pairs.
//! - [`envs`]: the synthetic diffusions, the navigation task and seeded
//!   simulators.
//! - [`discovery`]: determining-equation residuals, the discovery loss, SGD,
//!   and mismatch diagnostics.
//! - [`flows`]: finite transforms obtained by integrating generator fields.
//! - [`dynprog`]: grid MDPs, Bellman operators and augmentation checks.
//! - [`io`]: CSV and JSON export.

pub mod discovery;
pub mod dynprog;
pub mod envs;
pub mod error;
pub mod flows;
pub mod generator;
pub mod io;
pub mod model;
pub mod rng;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use discovery::{DiscoveryTrace, LossConfig, MismatchReport, ResidualBatch};
pub use dynprog::{AugmentationMap, GridMdp, GridValue, Lattice, PerturbationBudget};
pub use envs::{SimConfig, Transition};
pub use error::{Error, Result};
pub use flows::{FiniteTransform, LinearTransform, Transform};
pub use generator::GeneratorPair;
pub use model::{check_derivatives, ActionVec, EnvModel, StateVec};
