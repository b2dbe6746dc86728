use rand::RngCore;

use crate::error::PlanError;
use crate::planner::{random_macro, CandidateSampler, Decision, OnlinePlanner};
use crate::pomdp::{BeliefParticleSet, Pomdp};
use crate::rng::PlanRng;

/// Executes the sampler's macro for one sampled particle, without search.
pub struct RefPol<Smp> {
    sampler: Smp,
    max_macro_len: usize,
}

impl<Smp> RefPol<Smp> {
    pub fn new(sampler: Smp, max_macro_len: usize) -> Self {
        Self {
            sampler,
            max_macro_len: max_macro_len.max(1),
        }
    }
}

impl<M: Pomdp, Smp: CandidateSampler<M>> OnlinePlanner<M> for RefPol<Smp> {
    fn label(&self) -> &str {
        "refpol"
    }

    fn plan(
        &mut self,
        model: &M,
        belief: &BeliefParticleSet<M::State>,
        rng: &mut PlanRng,
    ) -> Result<Decision<M::Action>, PlanError> {
        let s = belief.sample(rng).ok_or(PlanError::EmptyBelief)?.clone();
        let macro_action = match self.sampler.sample(model, &s, rng) {
            Some(m) => m.truncated(self.max_macro_len),
            None => random_macro(model, self.max_macro_len, rng as &mut dyn RngCore),
        };
        Ok(Decision {
            macro_action,
            simulations: 0,
            tree_size: 0,
        })
    }
}
