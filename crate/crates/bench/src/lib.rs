//! Seeded experiment runner: planner comparisons on the navigation
//! scenarios and the tabular models, convergence studies and trace audits.

pub mod converge;
pub mod experiment;
pub mod stats;

pub use converge::{converge, ConvergeArgs};
pub use experiment::{
    audit_trace_file, episode_seeds, run_experiment, CellSummary, EpisodeRow, ExperimentOutput, ExperimentSpec,
    PlannerId, TraceHeader,
};
pub use stats::{mean_ci95, welch_one_sided};
