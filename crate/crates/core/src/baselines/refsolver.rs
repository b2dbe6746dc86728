use crate::error::PlanError;
use crate::planner::{BackupRule, CandidateSampler, PlannerConfig, PreferencePlanner, ValueHeuristic};
use crate::pomdp::Pomdp;

/// Tree search with the same skeleton as the preference planner, but each
/// edge's preference is recomputed against a uniform reference over the
/// node's candidates instead of the previous iterate.
pub fn refsolver<M, Smp, H>(
    config: PlannerConfig,
    sampler: Smp,
    heuristic: H,
) -> Result<PreferencePlanner<M, Smp, H>, PlanError>
where
    M: Pomdp,
    Smp: CandidateSampler<M>,
    H: ValueHeuristic<M>,
{
    Ok(PreferencePlanner::new(config, sampler, heuristic)?.with_rule(BackupRule::UniformReference, "refsolver"))
}
