//! Grid MDPs built from controlled diffusions, Bellman operators, and checks
//! of augmentation under exact and approximate grid symmetries.

mod augment;
mod bellman;
mod invariance;
mod lattice;
mod mdp;

pub use augment::{
    augmented_bellman, augmented_model, budget_between, fixed_point_gap, measure_budget, AugmentationMap,
    AugmentedOperator, FixedPointGap, PerturbationBudget, SNAP_TOL,
};
pub use bellman::{bellman_apply, greedy_policy, sup_distance, sup_norm, value_iteration, ValueIteration};
pub use invariance::{
    c2_proxy, indicative_value_bound, invariant_coordinates_rot2d, invariant_factorization, noninvariance_stats,
    refinement_error, value_noninvariance, FactorizationReport, NonInvariancePoint,
};
pub use lattice::{GridValue, Lattice};
pub use mdp::{compass_actions, discretize, GridMdp, ROW_SUM_TOL, TRUNCATION_SIGMAS};
