//! Tabular preference schemes over belief coverings.
//!
//! Everything here works on finite [`TabularPomdp`]s with explicit belief
//! vectors: reachable-belief enumeration, greedy internal coverings, the
//! exact, synchronous and asynchronous preference updates, policy
//! evaluation on a covering, a dense-grid value-iteration oracle and the
//! closed-form error bounds.
//!
//! [`TabularPomdp`]: crate::envs::tabular::TabularPomdp

mod beliefs;
mod bounds;
mod oracle;
mod scheme;
mod study;

pub use beliefs::{
    build_internal_covering, covering_radius, d1, enumerate_reachable_beliefs, horizon_for, min_pairwise_distance,
    nearest_belief, project, Belief, CoveringSet,
};
pub use bounds::{k1, k2, theorem1_bound, theorem2_bound, theorem_bounds, BoundParams};
pub use oracle::{oracle_qstar, GridOracle};
pub use scheme::{
    asynchronous_update, evaluate_policy_on_cover, exact_dpp_backup, policy_from_prefs, reference_backup,
    reference_fixed_point, synchronous_update, ErrorLedger, PairSamples, PreferenceTable, ProjectedModel,
    SampleSchedule,
};
pub use study::{run_convergence, write_convergence_csv, ConvergenceConfig, ConvergenceRow, Scheme};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExactError {
    #[error("belief enumeration exceeded its budget of {0} expansions")]
    BudgetExceeded(usize),
    #[error("observation has zero probability under the belief")]
    ZeroProbability,
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("fixed-point iteration did not converge in {0} iterations")]
    NoConvergence(usize),
}
