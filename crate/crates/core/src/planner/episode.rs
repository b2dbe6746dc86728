use std::time::Instant;

use rand::RngCore;

use super::trace::TraceRecord;
use crate::error::PlanError;
use crate::pomdp::{belief_update_or_prior, BeliefParticleSet, MacroAction, MacroObservation, ObsKey, Pomdp};
use crate::rng::{rng_from, PlanRng};

/// What a planner decided to execute, with its planning statistics.
#[derive(Debug, Clone)]
pub struct Decision<A> {
    pub macro_action: MacroAction<A>,
    pub simulations: u64,
    pub tree_size: usize,
}

/// Planner driven by [`run_episode`].
pub trait OnlinePlanner<M: Pomdp> {
    fn label(&self) -> &str;

    fn plan(
        &mut self,
        model: &M,
        belief: &BeliefParticleSet<M::State>,
        rng: &mut PlanRng,
    ) -> Result<Decision<M::Action>, PlanError>;

    /// Moves internal state past the executed macro and its observation.
    fn advance(&mut self, _model: &M, _executed: &MacroAction<M::Action>, _obs_key: &ObsKey) {}

    fn reset(&mut self) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeConfig {
    /// Primitive-step budget for the whole episode.
    pub max_steps: usize,
    pub particle_target: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub records: Vec<TraceRecord>,
    pub undiscounted_return: f64,
    pub discounted_return: f64,
    pub steps: usize,
    pub success: bool,
    pub terminal: bool,
    pub depletions: usize,
}

/// A macro of 1..=3 copies of one random primitive.
pub fn random_macro<M: Pomdp>(model: &M, max_len: usize, rng: &mut dyn RngCore) -> MacroAction<M::Action> {
    let len = 1 + (rng.next_u32() as usize % max_len.clamp(1, 3));
    let a = model.random_action(rng);
    MacroAction::new(vec![a; len]).expect("len >= 1")
}

/// Plans, executes and updates the belief until a terminal state is reached
/// or `max_steps` primitive steps have elapsed.
///
/// Environment noise at primitive time `t` comes from a stream seeded by
/// `(env_seed, t)`, so every planner sees the same noise sequence.
pub fn run_episode<M, P>(
    env: &M,
    planner: &mut P,
    initial_belief: BeliefParticleSet<M::State>,
    initial_state: M::State,
    config: &EpisodeConfig,
    env_seed: u64,
    rng: &mut PlanRng,
) -> Result<EpisodeResult, PlanError>
where
    M: Pomdp + Clone,
    P: OnlinePlanner<M> + ?Sized,
{
    let gamma = env.discount();
    let mut belief = initial_belief;
    let mut state = initial_state;
    let mut t = 0usize;
    let mut records = Vec::new();
    let mut undiscounted = 0.0;
    let mut discounted = 0.0;
    let mut depletions = 0;
    let mut terminal = env.is_terminal(&state);
    planner.reset();

    while !terminal && t < config.max_steps {
        let model = env.planning_view(t);
        let started = Instant::now();
        let decision = planner.plan(&model, &belief, rng)?;
        let planning_ms = started.elapsed().as_secs_f64() * 1e3;

        let t_start = t;
        let mut observations = Vec::new();
        let mut rewards = Vec::new();
        let mut states = Vec::new();
        let mut macro_reward = 0.0;
        for a in decision.macro_action.primitives() {
            if t >= config.max_steps {
                break;
            }
            let mut env_rng = rng_from(&[env_seed, t as u64]);
            let step = env.step(&state, a, &mut env_rng)?;
            macro_reward += gamma.powi(rewards.len() as i32) * step.reward;
            discounted += gamma.powi(t as i32) * step.reward;
            undiscounted += step.reward;
            rewards.push(step.reward);
            states.push(serde_json::to_value(&step.state).unwrap_or(serde_json::Value::Null));
            observations.push(step.obs);
            state = step.state;
            terminal = step.terminal;
            t += 1;
            if terminal {
                break;
            }
        }
        let executed = MacroAction::new(decision.macro_action.primitives()[..rewards.len()].to_vec())?;
        let key = model.macro_obs_key(&observations);
        let mo = MacroObservation {
            primitives: observations,
            key,
        };

        let belief_particles = belief.len();
        let belief_summary = model.belief_summary(belief.particles());
        let mut depleted = false;
        if !terminal && t < config.max_steps {
            let update = belief_update_or_prior(&belief, &executed, &mo, &model, rng, config.particle_target)?;
            depleted = update.depleted;
            belief = update.belief;
            planner.advance(&model, &decision.macro_action, &mo.key);
        }
        if depleted {
            depletions += 1;
        }
        records.push(TraceRecord {
            step: records.len(),
            t_start,
            belief_particles,
            belief_summary,
            macro_action: serde_json::to_value(&executed).unwrap_or_default(),
            macro_observation: serde_json::to_value(&mo.primitives).unwrap_or_default(),
            obs_key: mo.key,
            states,
            rewards,
            reward: macro_reward,
            discounted_return: discounted,
            undiscounted_return: undiscounted,
            planning_ms,
            simulations: decision.simulations,
            tree_size: decision.tree_size,
            depleted,
        });
    }

    Ok(EpisodeResult {
        records,
        undiscounted_return: undiscounted,
        discounted_return: discounted,
        steps: t,
        success: env.is_success(&state),
        terminal,
        depletions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular;
    use crate::planner::{audit_trace, Budget, PlannerConfig, PreferencePlanner, ZeroHeuristic};

    type Toy = tabular::TabularPomdp;

    fn any_action(m: &Toy, _s: &usize, rng: &mut dyn RngCore) -> Option<MacroAction<usize>> {
        Some(MacroAction::single(m.random_action(rng)))
    }

    #[test]
    fn terminal_start_plans_nothing() {
        let env = tabular::chain(2, 1.0, 0.9).with_terminal(vec![0]);
        let mut p = PreferencePlanner::new(PlannerConfig::default(), any_action, ZeroHeuristic).unwrap();
        let belief = BeliefParticleSet::new(vec![0], 1, 0);
        let cfg = EpisodeConfig {
            max_steps: 10,
            particle_target: 1,
        };
        let out = run_episode(&env, &mut p, belief, 0, &cfg, 1, &mut rng_from(&[1])).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.undiscounted_return, 0.0);
    }

    #[test]
    fn tiger_episode_trace_audits() {
        let env = tabular::tiger();
        let config = PlannerConfig {
            budget: Budget::Simulations(200),
            max_depth: 5,
            max_macro_len: 1,
            eta: 0.1,
            ..Default::default()
        };
        let mut p = PreferencePlanner::new(config, any_action, ZeroHeuristic).unwrap();
        let belief = BeliefParticleSet::new(vec![0, 1].repeat(50), 100, 0);
        let cfg = EpisodeConfig {
            max_steps: 15,
            particle_target: 100,
        };
        let out = run_episode(&env, &mut p, belief, 1, &cfg, 7, &mut rng_from(&[2])).unwrap();
        assert_eq!(out.steps, 15);
        let report = audit_trace(&out.records, env.discount(), 1e-9).unwrap();
        assert!((report.undiscounted_return - out.undiscounted_return).abs() < 1e-9);
        assert!((report.discounted_return - out.discounted_return).abs() < 1e-9);
    }
}
