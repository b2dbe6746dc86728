//! Online POMDP planning toolkit.
//!
//! The crate is organised around a generative [`pomdp::Pomdp`] interface:
//!
//! * [`pomdp`] holds the model trait, macro actions and observations, and the
//!   particle-filter belief update used at execution time.
//! * [`planner`] is the anytime preference-iteration tree search with
//!   progressive widening and log-sum-exp backups.
//! * [`exact`] implements the tabular exact, synchronous and asynchronous
//!   preference schemes over belief coverings, with a grid value-iteration
//!   oracle and closed-form error bounds.
//! * [`baselines`] contains RefPol, RefSolver and POMCP.
//! * [`envs`] provides the 3D maze, the rescue mission and a small discrete
//!   suite (Tiger and friends), plus scenario loading.
//! * [`prm`] builds probabilistic roadmaps and the heuristic macro sampler.

pub mod baselines;
pub mod envs;
pub mod error;
pub mod exact;
pub mod planner;
pub mod pomdp;
pub mod prm;
pub mod rng;
pub mod softmax;

pub use error::{ModelError, PlanError};
