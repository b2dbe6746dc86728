use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::episode::{random_macro, Decision, OnlinePlanner};
use super::tree::{EdgeId, NodeId, PrefTree};
use super::{value_heuristic, Budget, CandidateSampler, PlannerConfig, ValueHeuristic};
use crate::error::PlanError;
use crate::pomdp::{macro_step, BeliefParticleSet, MacroAction, ObsKey, Pomdp};
use crate::rng::PlanRng;
use crate::softmax::{argmax_first, sample_softmax};

/// Initial preference of a freshly widened edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeInit {
    /// `pref = 0`.
    #[default]
    Zero,
    /// `pref = V(h)`, the node's current soft value.
    SoftValue,
}

/// How an edge's preference is refreshed after a visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupRule {
    /// `pref <- pref - V(h) + R + D`: the previous policy is the reference.
    PreferenceIteration,
    /// `pref = (1/eta) ln(1/|children|) + R + D`: a fixed uniform reference
    /// over the node's candidates.
    UniformReference,
}

pub struct PreferencePlanner<M: Pomdp, Smp, H> {
    config: PlannerConfig,
    sampler: Smp,
    heuristic: H,
    rule: BackupRule,
    tree: PrefTree<M::State, M::Action>,
    label: &'static str,
}

impl<M, Smp, H> PreferencePlanner<M, Smp, H>
where
    M: Pomdp,
    Smp: CandidateSampler<M>,
    H: ValueHeuristic<M>,
{
    pub fn new(config: PlannerConfig, sampler: Smp, heuristic: H) -> Result<Self, PlanError> {
        config.validate()?;
        Ok(Self {
            config,
            sampler,
            heuristic,
            rule: BackupRule::PreferenceIteration,
            tree: PrefTree::new(Vec::new()),
            label: "porpi",
        })
    }

    pub fn with_rule(mut self, rule: BackupRule, label: &'static str) -> Self {
        self.rule = rule;
        self.label = label;
        self
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn tree(&self) -> &PrefTree<M::State, M::Action> {
        &self.tree
    }

    pub fn tree_mut(&mut self) -> &mut PrefTree<M::State, M::Action> {
        &mut self.tree
    }

    /// Discards the tree and starts over from `particles`.
    pub fn reset_root(&mut self, particles: Vec<M::State>) {
        self.tree = PrefTree::new(particles);
    }

    /// `(1/eta) ln sum exp(eta pref)` over the node's children.
    pub fn logsumexp_value(&self, node: NodeId) -> f64 {
        crate::softmax::log_sum_exp(&self.tree.preferences(node), self.config.eta)
    }

    /// Samples a child position from the softmax of the preferences.
    pub fn sample_pref_softmax(&self, node: NodeId, rng: &mut dyn RngCore) -> Result<usize, PlanError> {
        sample_softmax(&self.tree.preferences(node), self.config.eta, rng).ok_or(PlanError::NoChildren)
    }

    /// Adds a sampler candidate when `|children| < kappa N(h)^alpha` and the
    /// candidate's key is new. Returns the added edge, if any.
    pub fn progressive_widen(&mut self, model: &M, node: NodeId, s: &M::State, rng: &mut PlanRng) -> Option<EdgeId> {
        let n = self.tree.node(node);
        if (n.children.len() as f64) < self.config.widening_threshold(n.visits) {
            self.widen(model, node, s, rng)
        } else {
            None
        }
    }

    fn widen(&mut self, model: &M, node: NodeId, s: &M::State, rng: &mut PlanRng) -> Option<EdgeId> {
        let candidate = self
            .sampler
            .sample(model, s, rng)
            .map(|m| m.truncated(self.config.max_macro_len))
            .unwrap_or_else(|| random_macro(model, self.config.max_macro_len, rng));
        let key = candidate.key(model);
        let init = match (self.rule, self.config.edge_init) {
            (BackupRule::PreferenceIteration, EdgeInit::Zero) => 0.0,
            (BackupRule::PreferenceIteration, EdgeInit::SoftValue) => self.tree.node(node).value,
            (BackupRule::UniformReference, _) => 0.0,
        };
        let added = self.tree.add_edge(node, candidate, key, init);
        if added.is_some() && self.rule == BackupRule::UniformReference {
            self.refresh_reference_prefs(node);
        }
        added
    }

    /// One simulation from `node` with state `s` at primitive depth `depth`.
    pub fn simulate(
        &mut self,
        model: &M,
        node: NodeId,
        s: M::State,
        depth: usize,
        rng: &mut PlanRng,
    ) -> Result<f64, PlanError> {
        if depth > self.config.max_depth {
            return Ok(value_heuristic(&self.heuristic, model, &s));
        }
        if depth > 0 {
            self.tree.node_mut(node).particles.push(s.clone());
        }
        self.tree.node_mut(node).visits += 1;
        self.progressive_widen(model, node, &s, rng);
        if self.tree.node(node).children.is_empty() {
            // kappa = 0 (or a duplicate-free sampler failure) would leave
            // nothing to select; force one widening call.
            self.widen(model, node, &s, rng);
        }
        let position = self.sample_pref_softmax(node, rng)?;
        let edge = self.tree.node(node).children[position];

        let start = {
            let particles = &self.tree.node(node).particles;
            if particles.is_empty() {
                s
            } else {
                particles[(rng.next_u64() % particles.len() as u64) as usize].clone()
            }
        };
        let macro_action = self.tree.edge(edge).macro_action.clone();
        let outcome = macro_step(model, &start, &macro_action, rng)?;
        let child = self.tree.child_or_insert(edge, &outcome.obs.key);

        let visits = {
            let e = self.tree.edge_mut(edge);
            e.visits += 1;
            e.reward_mean += (outcome.discounted_reward - e.reward_mean) / e.visits as f64;
            e.visits
        };
        let child_value = if outcome.terminal {
            value_heuristic(&self.heuristic, model, &outcome.state)
        } else {
            self.simulate(model, child, outcome.state, depth + macro_action.len(), rng)?
        };
        let discounted = model.discount().powi(outcome.steps as i32) * child_value;
        let node_value = self.tree.node(node).value;
        {
            let e = self.tree.edge_mut(edge);
            e.future_mean += (discounted - e.future_mean) / visits as f64;
            if self.rule == BackupRule::PreferenceIteration {
                e.preference = e.preference - node_value + e.reward_mean + e.future_mean;
            }
        }
        if self.rule == BackupRule::UniformReference {
            self.refresh_reference_prefs(node);
        }
        Ok(self.tree.recompute_value(node, self.config.eta))
    }

    fn refresh_reference_prefs(&mut self, node: NodeId) {
        let children = self.tree.node(node).children.clone();
        let log_ref = (1.0 / children.len() as f64).ln() / self.config.eta;
        for e in children {
            let edge = self.tree.edge_mut(e);
            edge.preference = log_ref + edge.reward_mean + edge.future_mean;
        }
    }

    /// Runs simulations from the root until the budget is spent.
    pub fn search(&mut self, model: &M, rng: &mut PlanRng) -> Result<u64, PlanError> {
        let root = self.tree.root();
        if self.tree.node(root).particles.is_empty() {
            return Err(PlanError::EmptyBelief);
        }
        let started = Instant::now();
        let mut sims = 0u64;
        loop {
            let done = match self.config.budget {
                Budget::Simulations(n) => sims >= n,
                Budget::Millis(ms) => sims > 0 && started.elapsed().as_millis() as u64 >= ms,
            };
            if done {
                break;
            }
            let particles = &self.tree.node(root).particles;
            let s = particles[(rng.next_u64() % particles.len() as u64) as usize].clone();
            self.simulate(model, root, s, 0, rng)?;
            sims += 1;
        }
        if self.tree.node(root).children.is_empty() {
            let particles = &self.tree.node(root).particles;
            let s = particles[(rng.next_u64() % particles.len() as u64) as usize].clone();
            self.widen(model, root, &s, rng);
        }
        Ok(sims)
    }

    /// Root child with the largest preference; ties go to the oldest edge.
    pub fn best_root_edge(&self) -> Option<EdgeId> {
        let root = self.tree.root();
        argmax_first(&self.tree.preferences(root)).map(|i| self.tree.node(root).children[i])
    }
}

impl<M, Smp, H> OnlinePlanner<M> for PreferencePlanner<M, Smp, H>
where
    M: Pomdp,
    Smp: CandidateSampler<M>,
    H: ValueHeuristic<M>,
{
    fn label(&self) -> &str {
        self.label
    }

    fn plan(
        &mut self,
        model: &M,
        belief: &BeliefParticleSet<M::State>,
        rng: &mut PlanRng,
    ) -> Result<Decision<M::Action>, PlanError> {
        if belief.is_empty() && self.tree.node(self.tree.root()).particles.is_empty() {
            return Err(PlanError::EmptyBelief);
        }
        let root = self.tree.root();
        self.tree
            .node_mut(root)
            .particles
            .extend(belief.particles().iter().cloned());
        let simulations = self.search(model, rng)?;
        let edge = self.best_root_edge().ok_or(PlanError::NoChildren)?;
        Ok(Decision {
            macro_action: self.tree.edge(edge).macro_action.clone(),
            simulations,
            tree_size: self.tree.node_count(),
        })
    }

    fn advance(&mut self, model: &M, executed: &MacroAction<M::Action>, obs_key: &ObsKey) {
        let key = executed.key(model);
        let root = self.tree.root();
        match self.tree.node(root).keys.get(&key).copied() {
            Some(edge) => self.tree.reroot(edge, obs_key),
            None => self.reset_root(Vec::new()),
        }
    }

    fn reset(&mut self) {
        self.reset_root(Vec::new());
    }
}
