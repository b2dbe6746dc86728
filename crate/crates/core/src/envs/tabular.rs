//! Enumerable POMDPs with explicit transition, observation and reward tables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::pomdp::{ActionKey, ObsKey, Pomdp, Step};

const ROW_TOLERANCE: f64 = 1e-12;

pub const TIGER_LEFT: usize = 0;
pub const TIGER_RIGHT: usize = 1;
pub const TIGER_LISTEN: usize = 0;
pub const TIGER_OPEN_LEFT: usize = 1;
pub const TIGER_OPEN_RIGHT: usize = 2;
pub const TIGER_HEAR_LEFT: usize = 0;
pub const TIGER_HEAR_RIGHT: usize = 1;

/// `transition[a][s][s']`, `observation[a][s'][o]`, `reward[s][a]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularPomdp {
    pub name: String,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    gamma: f64,
    initial: Vec<f64>,
    #[serde(default)]
    terminal: Vec<bool>,
}

impl TabularPomdp {
    pub fn new(
        name: &str,
        transition: Vec<Vec<Vec<f64>>>,
        observation: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n_s = initial.len();
        let n_a = transition.len();
        if n_s == 0 || n_a == 0 {
            return Err(ModelError::InvalidState("empty state or action set".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ModelError::InvalidState(format!("discount {gamma} outside (0, 1)")));
        }
        if observation.len() != n_a || reward.len() != n_s {
            return Err(ModelError::InvalidState("table dimensions disagree".into()));
        }
        let n_o = observation[0].first().map_or(0, Vec::len);
        if n_o == 0 {
            return Err(ModelError::InvalidState("empty observation set".into()));
        }
        check_stochastic(&initial, "initial belief")?;
        for a in 0..n_a {
            if transition[a].len() != n_s || observation[a].len() != n_s {
                return Err(ModelError::InvalidState(format!("action {a}: wrong row count")));
            }
            for s in 0..n_s {
                if transition[a][s].len() != n_s || observation[a][s].len() != n_o {
                    return Err(ModelError::InvalidState(format!(
                        "action {a}, state {s}: wrong row width"
                    )));
                }
                check_stochastic(&transition[a][s], &format!("T[{a}][{s}]"))?;
                check_stochastic(&observation[a][s], &format!("Z[{a}][{s}]"))?;
            }
        }
        if reward
            .iter()
            .any(|row| row.len() != n_a || row.iter().any(|r| !r.is_finite()))
        {
            return Err(ModelError::InvalidState("reward table malformed".into()));
        }
        Ok(Self {
            name: name.to_string(),
            transition,
            observation,
            reward,
            gamma,
            initial,
            terminal: vec![false; n_s],
        })
    }

    pub fn with_terminal(mut self, states: Vec<usize>) -> Self {
        for s in states {
            self.terminal[s] = true;
        }
        self
    }

    pub fn with_discount(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Adds `c` to every reward.
    pub fn with_reward_shift(mut self, c: f64) -> Self {
        for row in &mut self.reward {
            for r in row {
                *r += c;
            }
        }
        self
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn n_actions(&self) -> usize {
        self.transition.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observation[0][0].len()
    }

    pub fn initial_belief(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[a][s][next]
    }

    pub fn obs_prob(&self, next: usize, a: usize, o: usize) -> f64 {
        self.observation[a][next][o]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a]
    }

    pub fn is_terminal_state(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// `R(b, a) = sum_s R(s, a) b(s)`.
    pub fn expected_reward(&self, b: &[f64], a: usize) -> f64 {
        b.iter().enumerate().map(|(s, p)| p * self.reward[s][a]).sum()
    }

    /// Predicted next-state distribution `sum_s T(s'|a,s) b(s)`.
    pub fn predict(&self, b: &[f64], a: usize) -> Vec<f64> {
        let n = self.n_states();
        let mut next = vec![0.0; n];
        for (s, p) in b.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (sp, t) in self.transition[a][s].iter().enumerate() {
                next[sp] += p * t;
            }
        }
        next
    }

    /// `P(o | a, b)`.
    pub fn obs_probability(&self, b: &[f64], a: usize, o: usize) -> Result<f64, ModelError> {
        self.check_indices(b, a, o)?;
        Ok(self
            .predict(b, a)
            .iter()
            .enumerate()
            .map(|(sp, p)| p * self.observation[a][sp][o])
            .sum())
    }

    /// Distribution over observations after taking `a` in `b`.
    pub fn obs_distribution(&self, b: &[f64], a: usize) -> Vec<f64> {
        let next = self.predict(b, a);
        (0..self.n_obs())
            .map(|o| {
                next.iter()
                    .enumerate()
                    .map(|(sp, p)| p * self.observation[a][sp][o])
                    .sum()
            })
            .collect()
    }

    /// Bayes update `tau(b, a, o)`; errors when `P(o | a, b) = 0`.
    pub fn tau(&self, b: &[f64], a: usize, o: usize) -> Result<Vec<f64>, ModelError> {
        self.check_indices(b, a, o)?;
        let next = self.predict(b, a);
        let mut post: Vec<f64> = next
            .iter()
            .enumerate()
            .map(|(sp, p)| p * self.observation[a][sp][o])
            .collect();
        let total: f64 = post.iter().sum();
        if total <= 0.0 {
            return Err(ModelError::InvalidState(format!(
                "observation {o} has zero probability after action {a}"
            )));
        }
        for p in &mut post {
            *p /= total;
        }
        Ok(post)
    }

    fn check_indices(&self, b: &[f64], a: usize, o: usize) -> Result<(), ModelError> {
        if b.len() != self.n_states() {
            return Err(ModelError::InvalidState(format!(
                "belief has {} entries, model has {} states",
                b.len(),
                self.n_states()
            )));
        }
        if a >= self.n_actions() {
            return Err(ModelError::InvalidAction(format!("action {a} out of range")));
        }
        if o >= self.n_obs() {
            return Err(ModelError::InvalidState(format!("observation {o} out of range")));
        }
        Ok(())
    }
}

fn check_stochastic(row: &[f64], what: &str) -> Result<(), ModelError> {
    if row.iter().any(|p| !(*p >= 0.0)) {
        return Err(ModelError::InvalidState(format!("{what} has a negative or NaN entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(ModelError::InvalidState(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

impl Pomdp for TabularPomdp {
    type State = usize;
    type Action = usize;
    type Obs = usize;

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        self.reward.iter().flatten().fold(0.0, |m: f64, r| m.max(r.abs()))
    }

    fn is_terminal(&self, s: &usize) -> bool {
        self.terminal.get(*s).copied().unwrap_or(false)
    }

    fn step<R: Rng + ?Sized>(&self, s: &usize, a: &usize, rng: &mut R) -> Result<Step<usize, usize>, ModelError> {
        let (s, a) = (*s, *a);
        if s >= self.n_states() {
            return Err(ModelError::InvalidState(format!("state {s} out of range")));
        }
        if a >= self.n_actions() {
            return Err(ModelError::InvalidAction(format!("action {a} out of range")));
        }
        if self.terminal[s] {
            return Ok(Step {
                state: s,
                obs: 0,
                reward: 0.0,
                terminal: true,
            });
        }
        let next = sample_index(&self.transition[a][s], rng);
        let obs = sample_index(&self.observation[a][next], rng);
        Ok(Step {
            state: next,
            obs,
            reward: self.reward[s][a],
            terminal: self.terminal[next],
        })
    }

    fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.n_actions())
    }

    fn action_key(&self, a: &usize) -> ActionKey {
        vec![*a as i64]
    }

    fn obs_key(&self, o: &usize) -> ObsKey {
        vec![*o as i64]
    }

    fn obs_log_weight(&self, a: &usize, next: &usize, _simulated: &usize, actual: &usize) -> f64 {
        self.observation[*a][*next][*actual].ln()
    }

    fn belief_summary(&self, particles: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_states()];
        for s in particles {
            counts[*s] += 1.0;
        }
        let n = particles.len().max(1) as f64;
        counts.into_iter().map(|c| c / n).collect()
    }

    fn as_tabular(&self) -> Option<&TabularPomdp> {
        Some(self)
    }
}

/// Classic Tiger: listen -1, correct door +10, wrong door -100, listening
/// accuracy 0.85, gamma 0.95. Opening a door resets the tiger uniformly.
pub fn tiger() -> TabularPomdp {
    tiger_with(0.85, 0.95)
}

pub fn tiger_with(accuracy: f64, gamma: f64) -> TabularPomdp {
    let stay = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let reset = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let hear = vec![vec![accuracy, 1.0 - accuracy], vec![1.0 - accuracy, accuracy]];
    let blind = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let reward = vec![vec![-1.0, -100.0, 10.0], vec![-1.0, 10.0, -100.0]];
    TabularPomdp::new(
        "tiger",
        vec![stay, reset.clone(), reset],
        vec![hear, blind.clone(), blind],
        reward,
        gamma,
        vec![0.5, 0.5],
    )
    .expect("tiger tables are stochastic")
}

/// One absorbing belief, two actions with rewards `(1, 0)`, gamma 0.5.
/// `Q* = (2, 1)`.
pub fn absorbing_toy() -> TabularPomdp {
    absorbing_bandit(1.0, 0.0, 0.5)
}

pub fn absorbing_bandit(r_best: f64, r_other: f64, gamma: f64) -> TabularPomdp {
    TabularPomdp::new(
        "absorbing-toy",
        vec![vec![vec![1.0]], vec![vec![1.0]]],
        vec![vec![vec![1.0]], vec![vec![1.0]]],
        vec![vec![r_best, r_other]],
        gamma,
        vec![1.0],
    )
    .expect("toy tables are stochastic")
}

/// Two states, one action, identity dynamics, rewards `(r0, r1)`.
pub fn two_state_reward(r0: f64, r1: f64) -> TabularPomdp {
    TabularPomdp::new(
        "two-state",
        vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        vec![vec![vec![1.0], vec![1.0]]],
        vec![vec![r0], vec![r1]],
        0.9,
        vec![0.5, 0.5],
    )
    .expect("stochastic")
}

/// `n` states observed exactly, one action that leaves the state unchanged.
pub fn fully_observed_identity(n: usize) -> TabularPomdp {
    let eye: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut b0 = vec![0.0; n];
    b0[0] = 1.0;
    TabularPomdp::new("identity", vec![eye.clone()], vec![eye], vec![vec![0.0]; n], 0.9, b0).expect("stochastic")
}

/// Deterministic fully observed chain `0 -> 1 -> ... -> n-1` (the last
/// state loops) with a single action rewarding `reward` per step.
pub fn chain(n: usize, reward: f64, gamma: f64) -> TabularPomdp {
    let t: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..n)
                .map(|j| if j == (s + 1).min(n - 1) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..n).map(|o| if o == s { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut b0 = vec![0.0; n];
    b0[0] = 1.0;
    TabularPomdp::new("chain", vec![t], vec![z], vec![vec![reward]; n], gamma, b0).expect("stochastic")
}

/// Hand-built 3-state, 2-action, 2-observation problem with noisy sensing.
pub fn three_state() -> TabularPomdp {
    let drift = vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.2, 0.0, 0.8]];
    let stay = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let sense = vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]];
    TabularPomdp::new(
        "three-state",
        vec![drift, stay],
        vec![sense.clone(), sense],
        vec![vec![0.0, 1.0], vec![0.5, -0.5], vec![2.0, -1.0]],
        0.9,
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    )
    .expect("stochastic")
}

/// Looks up a suite member by id.
pub fn by_id(id: &str) -> Option<TabularPomdp> {
    match id {
        "tiger" => Some(tiger()),
        "absorbing-toy" | "toy" => Some(absorbing_toy()),
        "three-state" => Some(three_state()),
        "chain" => Some(chain(5, 1.0, 0.9)),
        _ => None,
    }
}
