use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{MacroAction, MacroObservation, Pomdp};
use crate::error::PlanError;

/// Unweighted collection of state particles.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefParticleSet<S> {
    particles: Vec<S>,
    capacity: usize,
    seed_tag: u64,
}

impl<S: Clone> BeliefParticleSet<S> {
    /// `capacity` is the replenishment target used by belief updates.
    pub fn new(particles: Vec<S>, capacity: usize, seed_tag: u64) -> Self {
        Self {
            particles,
            capacity: capacity.max(1),
            seed_tag,
        }
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<S> {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seed_tag(&self) -> u64 {
        self.seed_tag
    }

    pub fn push(&mut self, s: S) {
        self.particles.push(s);
    }

    /// Uniform draw over stored particles.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&S> {
        if self.particles.is_empty() {
            None
        } else {
            Some(&self.particles[rng.random_range(0..self.particles.len())])
        }
    }
}

/// Outcome of a belief update that may have fallen back to the prior.
#[derive(Debug, Clone)]
pub struct UpdateOutcome<S> {
    pub belief: BeliefParticleSet<S>,
    pub depleted: bool,
}

/// Propagates particles through `m` and resamples them in proportion to the
/// likelihood of the received macro observation.
///
/// Candidates are drawn in rounds of `target_count` until `target_count`
/// consistent ones exist or the retry budget of `10 * target_count` draws
/// is spent; the consistent pool is then resampled by weight back up to
/// `target_count`.
pub fn belief_update<M: Pomdp, R: Rng + ?Sized>(
    b: &BeliefParticleSet<M::State>,
    m: &MacroAction<M::Action>,
    mo: &MacroObservation<M::Obs>,
    model: &M,
    rng: &mut R,
    target_count: usize,
) -> Result<BeliefParticleSet<M::State>, PlanError> {
    if b.is_empty() {
        return Err(PlanError::EmptyBelief);
    }
    let target = target_count.max(1);
    let budget = 10 * target;
    let horizon = mo.len().min(m.len());
    let mut pool: Vec<M::State> = Vec::with_capacity(target);
    let mut log_weights: Vec<f64> = Vec::with_capacity(target);
    let mut attempts = 0;
    while attempts < budget && pool.len() < target {
        attempts += 1;
        let Some(start) = b.sample(rng) else {
            return Err(PlanError::EmptyBelief);
        };
        let mut state = start.clone();
        let mut log_w = 0.0;
        for (i, a) in m.primitives()[..horizon].iter().enumerate() {
            let step = model.step(&state, a, rng)?;
            log_w += model.obs_log_weight(a, &step.state, &step.obs, &mo.primitives[i]);
            state = step.state;
            if log_w == f64::NEG_INFINITY {
                break;
            }
            // A particle that terminates before the real macro did cannot
            // have produced the remaining observations.
            if step.terminal && i + 1 < horizon {
                log_w = f64::NEG_INFINITY;
                break;
            }
        }
        if log_w.is_finite() {
            pool.push(state);
            log_weights.push(log_w);
        }
    }
    if pool.is_empty() {
        return Err(PlanError::Depletion { attempts });
    }
    let particles = resample(&pool, &log_weights, target, rng);
    Ok(BeliefParticleSet::new(particles, target, b.seed_tag()))
}

/// Pushes particles through `m` ignoring the observation.
pub fn propagate_prior<M: Pomdp, R: Rng + ?Sized>(
    b: &BeliefParticleSet<M::State>,
    m: &MacroAction<M::Action>,
    steps: usize,
    model: &M,
    rng: &mut R,
    target_count: usize,
) -> Result<BeliefParticleSet<M::State>, PlanError> {
    let target = target_count.max(1);
    let horizon = steps.min(m.len());
    let mut particles = Vec::with_capacity(target);
    for _ in 0..target {
        let mut state = b.sample(rng).ok_or(PlanError::EmptyBelief)?.clone();
        for a in &m.primitives()[..horizon] {
            let step = model.step(&state, a, rng)?;
            state = step.state;
            if step.terminal {
                break;
            }
        }
        particles.push(state);
    }
    Ok(BeliefParticleSet::new(particles, target, b.seed_tag()))
}

/// [`belief_update`] with the depletion fallback: refill from the
/// transition prior and flag the result.
pub fn belief_update_or_prior<M: Pomdp, R: Rng + ?Sized>(
    b: &BeliefParticleSet<M::State>,
    m: &MacroAction<M::Action>,
    mo: &MacroObservation<M::Obs>,
    model: &M,
    rng: &mut R,
    target_count: usize,
) -> Result<UpdateOutcome<M::State>, PlanError> {
    match belief_update(b, m, mo, model, rng, target_count) {
        Ok(belief) => Ok(UpdateOutcome {
            belief,
            depleted: false,
        }),
        Err(PlanError::Depletion { .. }) => Ok(UpdateOutcome {
            belief: propagate_prior(b, m, mo.len(), model, rng, target_count)?,
            depleted: true,
        }),
        Err(e) => Err(e),
    }
}

fn resample<S: Clone, R: Rng + ?Sized>(pool: &[S], log_weights: &[f64], n: usize, rng: &mut R) -> Vec<S> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => (0..n).map(|_| pool[dist.sample(rng)].clone()).collect(),
        // All weights are at least exp(0) = 1 at the max, so this is unreachable
        // unless every weight is NaN; fall back to uniform.
        Err(_) => (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect(),
    }
}
