use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::envs::geometry::{equally_spaced_directions, Point};
use crate::error::PlanError;
use crate::planner::{Budget, Decision, OnlinePlanner};
use crate::pomdp::{macro_step, BeliefParticleSet, MacroAction, ObsKey, Pomdp};
use crate::rng::PlanRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PomcpConfig {
    pub budget: Budget,
    /// UCB1 exploration constant; `None` uses the model's reward bound.
    pub exploration: Option<f64>,
    /// Depth bound in primitive steps, shared by tree and rollouts.
    pub max_depth: usize,
}

impl Default for PomcpConfig {
    fn default() -> Self {
        Self {
            budget: Budget::Simulations(1000),
            exploration: None,
            max_depth: 60,
        }
    }
}

/// `count` equally spaced unit directions, each repeated `len` times.
pub fn direction_macros(count: usize, dims: usize, len: usize) -> Vec<MacroAction<Point>> {
    equally_spaced_directions(count, dims)
        .into_iter()
        .map(|d| MacroAction::new(vec![d; len.max(1)]).expect("len >= 1"))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct UctEdge {
    pub visits: u64,
    /// Mean clipped return through this edge.
    pub mean: f64,
    /// Sum of the same returns (audit only).
    pub total: f64,
    pub children: BTreeMap<ObsKey, usize>,
}

#[derive(Debug, Clone)]
pub struct UctNode {
    pub visits: u64,
    /// One edge per macro of the fixed action set, created on expansion.
    pub edges: Vec<UctEdge>,
}

/// UCT over a fixed list of macro actions with random-rollout leaves and
/// mean-return backups. A fresh tree is grown for every decision.
pub struct Pomcp<M: Pomdp> {
    config: PomcpConfig,
    actions: Vec<MacroAction<M::Action>>,
    nodes: Vec<UctNode>,
}

impl<M: Pomdp> Pomcp<M> {
    pub fn new(config: PomcpConfig, actions: Vec<MacroAction<M::Action>>) -> Result<Self, PlanError> {
        if actions.is_empty() {
            return Err(PlanError::Config("POMCP needs at least one macro action".into()));
        }
        if config.max_depth == 0 {
            return Err(PlanError::Config("max_depth must be >= 1".into()));
        }
        if let Some(c) = config.exploration {
            if !(c >= 0.0) {
                return Err(PlanError::Config(format!("exploration constant must be >= 0, got {c}")));
            }
        }
        Ok(Self {
            config,
            actions,
            nodes: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[UctNode] {
        &self.nodes
    }

    fn new_node(&mut self) -> usize {
        self.nodes.push(UctNode {
            visits: 0,
            edges: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn expand(&mut self, node: usize) {
        if self.nodes[node].edges.is_empty() {
            self.nodes[node].edges = vec![UctEdge::default(); self.actions.len()];
        }
    }

    /// UCB1 choice; unvisited edges first, lowest index first.
    fn select(&self, node: usize, c: f64) -> usize {
        let n = &self.nodes[node];
        if let Some(i) = n.edges.iter().position(|e| e.visits == 0) {
            return i;
        }
        let ln_n = (n.visits.max(1) as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in n.edges.iter().enumerate() {
            let score = e.mean + c * (ln_n / e.visits as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn rollout(&self, model: &M, mut s: M::State, depth: usize, rng: &mut PlanRng) -> Result<f64, PlanError> {
        let gamma = model.discount();
        let mut total = 0.0;
        let mut factor = 1.0;
        for _ in depth..self.config.max_depth {
            if model.is_terminal(&s) {
                break;
            }
            let a = model.random_action(rng);
            let step = model.step(&s, &a, rng)?;
            total += factor * step.reward;
            factor *= gamma;
            s = step.state;
        }
        Ok(total)
    }

    fn simulate(
        &mut self,
        model: &M,
        node: usize,
        s: M::State,
        depth: usize,
        c: f64,
        rng: &mut PlanRng,
    ) -> Result<f64, PlanError> {
        if depth >= self.config.max_depth || model.is_terminal(&s) {
            return Ok(0.0);
        }
        if self.nodes[node].edges.is_empty() {
            self.expand(node);
            self.nodes[node].visits += 1;
            return self.rollout(model, s, depth, rng);
        }
        let vmax = model.max_value();
        let i = self.select(node, c);
        let out = macro_step(model, &s, &self.actions[i], rng)?;
        let future = if out.terminal {
            0.0
        } else {
            let child = match self.nodes[node].edges[i].children.get(&out.obs.key) {
                Some(&id) => id,
                None => {
                    let id = self.new_node();
                    self.nodes[node].edges[i].children.insert(out.obs.key.clone(), id);
                    id
                }
            };
            self.simulate(model, child, out.state, depth + out.steps, c, rng)?
        };
        let ret = (out.discounted_reward + model.discount().powi(out.steps as i32) * future).clamp(-vmax, vmax);
        let n = &mut self.nodes[node];
        n.visits += 1;
        let e = &mut n.edges[i];
        e.visits += 1;
        e.total += ret;
        e.mean += (ret - e.mean) / e.visits as f64;
        Ok(ret)
    }

    /// Checks visit bookkeeping and that every mean equals its sum over visits.
    pub fn audit(&self) -> Result<(), String> {
        for (id, n) in self.nodes.iter().enumerate() {
            let through: u64 = n.edges.iter().map(|e| e.visits).sum();
            let expansion = u64::from(!n.edges.is_empty() && id != 0);
            if !n.edges.is_empty() && n.visits != through + expansion {
                return Err(format!("node {id}: {} visits, {through} through edges", n.visits));
            }
            for (i, e) in n.edges.iter().enumerate() {
                if e.visits > 0 && (e.mean - e.total / e.visits as f64).abs() > 1e-9 * (1.0 + e.mean.abs()) {
                    return Err(format!(
                        "node {id} edge {i}: mean {} vs {}",
                        e.mean,
                        e.total / e.visits as f64
                    ));
                }
            }
        }
        Ok(())
    }

    /// Grows a fresh tree from `particles` and returns the chosen macro index.
    pub fn search(&mut self, model: &M, particles: &[M::State], rng: &mut PlanRng) -> Result<(usize, u64), PlanError> {
        if particles.is_empty() {
            return Err(PlanError::EmptyBelief);
        }
        self.nodes.clear();
        let root = self.new_node();
        self.expand(root);
        let c = self.config.exploration.unwrap_or_else(|| model.reward_bound());
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
            let s = particles[(rng.next_u64() % particles.len() as u64) as usize].clone();
            self.simulate(model, root, s, 0, c, rng)?;
            sims += 1;
        }
        let edges = &self.nodes[root].edges;
        let mut best = 0;
        for (i, e) in edges.iter().enumerate() {
            if e.visits > edges[best].visits {
                best = i;
            }
        }
        Ok((best, sims))
    }
}

impl<M: Pomdp> OnlinePlanner<M> for Pomcp<M> {
    fn label(&self) -> &str {
        "pomcp"
    }

    fn plan(
        &mut self,
        model: &M,
        belief: &BeliefParticleSet<M::State>,
        rng: &mut PlanRng,
    ) -> Result<Decision<M::Action>, PlanError> {
        let (best, simulations) = self.search(model, belief.particles(), rng)?;
        Ok(Decision {
            macro_action: self.actions[best].clone(),
            simulations,
            tree_size: self.nodes.len(),
        })
    }
}
