//! Generative POMDP interface, macro actions and observations.

mod belief;

pub use belief::{belief_update, belief_update_or_prior, propagate_prior, BeliefParticleSet, UpdateOutcome};

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::tabular::TabularPomdp;
use crate::error::ModelError;

/// Discretised identity of an observation (or a sequence of them).
pub type ObsKey = Vec<i64>;
/// Discretised identity of an action, used to deduplicate macros.
pub type ActionKey = Vec<i64>;

const KEY_SEPARATOR: i64 = i64::MIN;

/// One primitive transition sampled from the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S, O> {
    pub state: S,
    pub obs: O,
    pub reward: f64,
    pub terminal: bool,
}

/// A generative POMDP.
///
/// Terminal states absorb: stepping from one returns the same state, zero
/// reward and the model's null observation.
pub trait Pomdp {
    type State: Clone + Debug + Serialize + Send + Sync;
    type Action: Clone + Debug + Serialize + Send + Sync;
    type Obs: Clone + Debug + Serialize + Send + Sync;

    fn discount(&self) -> f64;

    /// Bound on the magnitude of any primitive reward.
    fn reward_bound(&self) -> f64;

    fn max_value(&self) -> f64 {
        self.reward_bound() / (1.0 - self.discount())
    }

    fn is_terminal(&self, s: &Self::State) -> bool;

    /// Whether an episode ending in `s` accomplished its task.
    fn is_success(&self, _s: &Self::State) -> bool {
        false
    }

    fn step<R: Rng + ?Sized>(
        &self,
        s: &Self::State,
        a: &Self::Action,
        rng: &mut R,
    ) -> Result<Step<Self::State, Self::Obs>, ModelError>;

    /// Uniformly random primitive action, used by fallbacks and rollouts.
    fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Action;

    fn action_key(&self, a: &Self::Action) -> ActionKey;

    fn obs_key(&self, o: &Self::Obs) -> ObsKey;

    /// Key under which a macro observation indexes tree children.
    fn macro_obs_key(&self, obs: &[Self::Obs]) -> ObsKey {
        let mut key = Vec::new();
        for (i, o) in obs.iter().enumerate() {
            if i > 0 {
                key.push(KEY_SEPARATOR);
            }
            key.extend(self.obs_key(o));
        }
        key
    }

    /// Log-weight of a propagated particle given the observation actually
    /// received. The default accepts iff the discretisation keys match.
    fn obs_log_weight(&self, _a: &Self::Action, _next: &Self::State, simulated: &Self::Obs, actual: &Self::Obs) -> f64 {
        if self.obs_key(simulated) == self.obs_key(actual) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// The model the agent plans with at execution step `step`. Models whose
    /// rewards change on a schedule the agent cannot predict override this.
    fn planning_view(&self, _step: usize) -> Self
    where
        Self: Sized + Clone,
    {
        self.clone()
    }

    /// Compact numeric summary of a particle set for traces.
    fn belief_summary(&self, _particles: &[Self::State]) -> Vec<f64> {
        Vec::new()
    }

    /// Tabular form, when the model is discrete and enumerable.
    fn as_tabular(&self) -> Option<&TabularPomdp> {
        None
    }
}

/// Ordered sequence of primitive actions executed open loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MacroAction<A> {
    primitives: Vec<A>,
}

impl<A> MacroAction<A> {
    pub fn new(primitives: Vec<A>) -> Result<Self, ModelError> {
        if primitives.is_empty() {
            return Err(ModelError::InvalidAction(
                "macro action must have at least one primitive".into(),
            ));
        }
        Ok(Self { primitives })
    }

    pub fn single(a: A) -> Self {
        Self { primitives: vec![a] }
    }

    pub fn primitives(&self) -> &[A] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Keeps at most `max_len` primitives.
    pub fn truncated(mut self, max_len: usize) -> Self {
        self.primitives.truncate(max_len.max(1));
        self
    }

    pub fn key<M: Pomdp<Action = A>>(&self, model: &M) -> ActionKey {
        let mut key = Vec::new();
        for (i, a) in self.primitives.iter().enumerate() {
            if i > 0 {
                key.push(KEY_SEPARATOR);
            }
            key.extend(model.action_key(a));
        }
        key
    }
}

/// Observations received while executing a macro action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroObservation<O> {
    pub primitives: Vec<O>,
    pub key: ObsKey,
}

impl<O> MacroObservation<O> {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// Result of executing a macro action from one state.
#[derive(Debug, Clone)]
pub struct MacroOutcome<S, O> {
    pub state: S,
    pub obs: MacroObservation<O>,
    /// `sum_t gamma^t r_t` over the steps actually taken.
    pub discounted_reward: f64,
    pub rewards: Vec<f64>,
    pub steps: usize,
    pub terminal: bool,
}

/// Samples one primitive transition.
pub fn generative_step<M: Pomdp, R: Rng + ?Sized>(
    model: &M,
    s: &M::State,
    a: &M::Action,
    rng: &mut R,
) -> Result<Step<M::State, M::Obs>, ModelError> {
    model.step(s, a, rng)
}

/// Runs a macro action, stopping early when a terminal state is entered.
pub fn macro_step<M: Pomdp, R: Rng + ?Sized>(
    model: &M,
    s: &M::State,
    m: &MacroAction<M::Action>,
    rng: &mut R,
) -> Result<MacroOutcome<M::State, M::Obs>, ModelError> {
    let gamma = model.discount();
    let mut state = s.clone();
    let mut observations = Vec::with_capacity(m.len());
    let mut rewards = Vec::with_capacity(m.len());
    let mut discounted = 0.0;
    let mut factor = 1.0;
    let mut terminal = model.is_terminal(&state);
    for a in m.primitives() {
        let step = model.step(&state, a, rng)?;
        discounted += factor * step.reward;
        factor *= gamma;
        rewards.push(step.reward);
        observations.push(step.obs);
        state = step.state;
        terminal = step.terminal;
        if terminal {
            break;
        }
    }
    let key = model.macro_obs_key(&observations);
    Ok(MacroOutcome {
        state,
        steps: rewards.len(),
        obs: MacroObservation {
            primitives: observations,
            key,
        },
        discounted_reward: discounted,
        rewards,
        terminal,
    })
}

/// Monte-Carlo mean of the one-step reward over the particles (exact for
/// models with deterministic rewards).
pub fn expected_immediate_reward<M: Pomdp, R: Rng + ?Sized>(
    b: &BeliefParticleSet<M::State>,
    a: &M::Action,
    model: &M,
    rng: &mut R,
) -> Result<f64, ModelError> {
    if b.is_empty() {
        return Err(ModelError::InvalidState("empty belief".into()));
    }
    let mut total = 0.0;
    for s in b.particles() {
        total += model.step(s, a, rng)?.reward;
    }
    Ok(total / b.len() as f64)
}

/// `P(o | a, b)` for an enumerable model and a belief vector over its states.
pub fn observation_likelihood<M: Pomdp>(b: &[f64], a: usize, o: usize, model: &M) -> Result<f64, ModelError> {
    let tab = model.as_tabular().ok_or(ModelError::Unsupported(
        "observation likelihood needs an enumerable model",
    ))?;
    tab.obs_probability(b, a, o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular::{self, TabularPomdp};
    use crate::rng::rng_from;

    fn reward_chain(rewards: Vec<f64>, gamma: f64) -> TabularPomdp {
        // Deterministic chain 0 -> 1 -> ... with the last state terminal.
        let n = rewards.len() + 1;
        let mut t = vec![vec![vec![0.0; n]; n]; 1];
        for s in 0..n {
            t[0][s][(s + 1).min(n - 1)] = 1.0;
        }
        let z = vec![vec![vec![1.0]; n]; 1];
        let mut r = vec![vec![0.0]; n];
        for (s, v) in rewards.iter().enumerate() {
            r[s][0] = *v;
        }
        let mut b0 = vec![0.0; n];
        b0[0] = 1.0;
        TabularPomdp::new("chain", t, z, r, gamma, b0)
            .unwrap()
            .with_terminal(vec![n - 1])
    }

    #[test]
    fn macro_reward_is_discounted_sum() {
        let model = reward_chain(vec![-5.0, -5.0, 2000.0], 0.99);
        let m = MacroAction::new(vec![0, 0, 0]).unwrap();
        let mut rng = rng_from(&[3]);
        let out = macro_step(&model, &0, &m, &mut rng).unwrap();
        assert!((out.discounted_reward - 1950.25).abs() < 1e-9);
        assert_eq!(out.steps, 3);
        assert!(out.terminal);
    }

    #[test]
    fn single_primitive_macro_matches_generative_step() {
        let model = tabular::tiger();
        let m = MacroAction::single(tabular::TIGER_LISTEN);
        let out = macro_step(&model, &0, &m, &mut rng_from(&[9])).unwrap();
        let step = generative_step(&model, &0, &tabular::TIGER_LISTEN, &mut rng_from(&[9])).unwrap();
        assert_eq!(out.discounted_reward, step.reward);
        assert_eq!(out.obs.primitives, vec![step.obs]);
        assert_eq!(out.state, step.state);
    }

    #[test]
    fn terminal_entry_truncates_macro() {
        let model = reward_chain(vec![7.0], 0.9);
        let m = MacroAction::new(vec![0, 0, 0, 0]).unwrap();
        let out = macro_step(&model, &0, &m, &mut rng_from(&[1])).unwrap();
        assert_eq!(out.steps, 1);
        assert_eq!(out.obs.len(), 1);
        assert_eq!(out.discounted_reward, 7.0);
    }

    #[test]
    fn terminal_state_absorbs() {
        let model = reward_chain(vec![1.0, 1.0], 0.9);
        let step = generative_step(&model, &2, &0, &mut rng_from(&[1])).unwrap();
        assert_eq!(step.state, 2);
        assert_eq!(step.reward, 0.0);
        assert!(step.terminal);
    }

    #[test]
    fn same_seed_same_transition() {
        let model = tabular::tiger();
        for seed in 0..20 {
            let a = generative_step(&model, &1, &tabular::TIGER_LISTEN, &mut rng_from(&[seed])).unwrap();
            let b = generative_step(&model, &1, &tabular::TIGER_LISTEN, &mut rng_from(&[seed])).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tiger_listen_accuracy_frequency() {
        let model = tabular::tiger();
        let mut rng = rng_from(&[11]);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                generative_step(&model, &tabular::TIGER_LEFT, &tabular::TIGER_LISTEN, &mut rng)
                    .unwrap()
                    .obs
                    == tabular::TIGER_HEAR_LEFT
            })
            .count();
        let frac = hits as f64 / n as f64;
        // Binomial sd at n = 1e5 is ~0.0011.
        assert!((frac - 0.85).abs() < 0.005, "{frac}");
    }

    #[test]
    fn invalid_state_is_rejected() {
        let model = tabular::tiger();
        let err = generative_step(&model, &7, &0, &mut rng_from(&[1])).unwrap_err();
        assert!(matches!(err, ModelError::InvalidState(_)));
    }

    #[test]
    fn expected_reward_cases() {
        let model = tabular::two_state_reward(10.0, -10.0);
        let mut rng = rng_from(&[5]);
        let point = BeliefParticleSet::new(vec![0; 5], 5, 0);
        assert_eq!(expected_immediate_reward(&point, &0, &model, &mut rng).unwrap(), 10.0);
        let half = BeliefParticleSet::new(vec![0, 1], 2, 0);
        assert_eq!(expected_immediate_reward(&half, &0, &model, &mut rng).unwrap(), 0.0);
        let tab = tabular::two_state_reward(1.0, 2.0);
        assert!((tab.expected_reward(&[0.2, 0.8], 0) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn observation_likelihood_tiger_listen_is_half() {
        let model = tabular::tiger();
        let p = observation_likelihood(&[0.5, 0.5], tabular::TIGER_LISTEN, tabular::TIGER_HEAR_LEFT, &model).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn observation_likelihood_unsupported_on_continuous() {
        let model = crate::envs::maze::MazeModel::new(std::sync::Arc::new(
            crate::envs::maze::MazeScenario::open_box_2d(10.0, 10.0),
        ));
        let err = observation_likelihood(&[1.0], 0, 0, &model).unwrap_err();
        assert!(matches!(err, ModelError::Unsupported(_)));
    }

    #[test]
    fn empty_macro_rejected() {
        assert!(MacroAction::<usize>::new(vec![]).is_err());
    }
}
