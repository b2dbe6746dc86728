//! Anytime preference-iteration tree search over macro actions.
//!
//! Each history node keeps a particle belief, a visit count and a soft value
//! `V(h) = L_eta(pref)`; each action edge keeps running means of the
//! discounted macro reward and of the discounted descendant value, and a
//! preference updated as
//!
//! ```text
//! pref(ha) <- pref(ha) - V(h) + R(ha) + D(ha)
//! V(h)     <- (1/eta) ln sum_a exp(eta pref(ha))
//! ```
//!
//! Children are added by progressive widening (`|children| < kappa N^alpha`)
//! from a heuristic candidate sampler, and chosen during simulation by
//! sampling the softmax of the preferences.

mod episode;
mod search;
mod trace;
mod tree;

pub use episode::{random_macro, run_episode, Decision, EpisodeConfig, EpisodeResult, OnlinePlanner};
pub use search::{BackupRule, EdgeInit, PreferencePlanner};
pub use trace::{audit_trace, read_trace, write_trace, AuditError, AuditReport, TraceRecord};
pub use tree::{ActionEdge, EdgeId, HistoryNode, NodeId, PrefTree, TreeAuditError};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::pomdp::{MacroAction, Pomdp};

/// Planning budget per decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Simulations(u64),
    Millis(u64),
}

impl Budget {
    pub fn label(&self) -> String {
        match self {
            Budget::Simulations(n) => format!("{n}sims"),
            Budget::Millis(ms) => format!("{ms}ms"),
        }
    }

    pub fn as_u64(&self) -> u64 {
        match self {
            Budget::Simulations(n) | Budget::Millis(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Widening coefficient `kappa >= 0`.
    pub kappa: f64,
    /// Widening exponent in `(0, 1)`.
    pub alpha: f64,
    /// Depth bound in primitive steps.
    pub max_depth: usize,
    /// Temperature `eta > 0`.
    pub eta: f64,
    pub max_macro_len: usize,
    pub budget: Budget,
    /// Particles kept per belief after an execution-time update.
    pub particle_target: usize,
    pub edge_init: EdgeInit,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            alpha: 0.5,
            max_depth: 60,
            eta: 0.05,
            max_macro_len: 10,
            budget: Budget::Simulations(1000),
            particle_target: 200,
            edge_init: EdgeInit::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.kappa >= 0.0) {
            return Err(PlanError::Config(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PlanError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.max_depth < 1 {
            return Err(PlanError::Config("max_depth must be >= 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(PlanError::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_macro_len < 1 {
            return Err(PlanError::Config("max_macro_len must be >= 1".into()));
        }
        if self.particle_target < 1 {
            return Err(PlanError::Config("particle_target must be >= 1".into()));
        }
        Ok(())
    }

    /// `kappa * N^alpha`.
    pub fn widening_threshold(&self, visits: u64) -> f64 {
        self.kappa * (visits as f64).powf(self.alpha)
    }
}

/// Domain knowledge proposing macro actions from a concrete state.
pub trait CandidateSampler<M: Pomdp> {
    /// `None` signals that no candidate could be produced.
    fn sample(&self, model: &M, s: &M::State, rng: &mut dyn RngCore) -> Option<MacroAction<M::Action>>;
}

impl<M: Pomdp, F> CandidateSampler<M> for F
where
    F: Fn(&M, &M::State, &mut dyn RngCore) -> Option<MacroAction<M::Action>>,
{
    fn sample(&self, model: &M, s: &M::State, rng: &mut dyn RngCore) -> Option<MacroAction<M::Action>> {
        self(model, s, rng)
    }
}

/// Leaf value estimate used past the depth bound.
pub trait ValueHeuristic<M: Pomdp> {
    fn value(&self, model: &M, s: &M::State) -> f64;
}

/// Always zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHeuristic;

impl<M: Pomdp> ValueHeuristic<M> for ZeroHeuristic {
    fn value(&self, _model: &M, _s: &M::State) -> f64 {
        0.0
    }
}

/// Heuristic value with the planner's contract applied: zero at terminal
/// states, clipped to `[-Vmax, Vmax]` elsewhere.
pub fn value_heuristic<M: Pomdp, H: ValueHeuristic<M> + ?Sized>(heuristic: &H, model: &M, s: &M::State) -> f64 {
    if model.is_terminal(s) {
        return 0.0;
    }
    let vmax = model.max_value();
    let v = heuristic.value(model, s);
    if v.is_nan() {
        return -vmax;
    }
    v.clamp(-vmax, vmax)
}
