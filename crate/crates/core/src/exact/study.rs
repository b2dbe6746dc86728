use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::beliefs::{build_internal_covering, enumerate_reachable_beliefs, horizon_for};
use super::bounds::{theorem1_bound, theorem2_bound, BoundParams};
use super::oracle::{default_spacing, oracle_qstar};
use super::scheme::{
    asynchronous_update, evaluate_policy_on_cover, exact_dpp_backup, policy_from_prefs, synchronous_update,
    ErrorLedger, PairSamples, PreferenceTable, ProjectedModel, SampleSchedule,
};
use super::ExactError;
use crate::envs::tabular::TabularPomdp;
use crate::pomdp::Pomdp;
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Exact,
    Synchronous,
    /// One round-robin sweep over all `(b, a)` pairs per iteration.
    Asynchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub scheme: Scheme,
    pub delta: f64,
    pub eta: f64,
    pub k_max: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Synchronous schedule `N_k = samples_per_iteration * (k + 1)`.
    pub samples_per_iteration: usize,
    /// Defaults to [`default_spacing`](super::oracle::default_spacing).
    pub oracle_spacing: Option<f64>,
    /// Defaults to `ceil(ln 0.01 / ln gamma)`.
    pub horizon: Option<usize>,
    pub enumeration_budget: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Exact,
            delta: 0.05,
            eta: 1.0,
            k_max: 100,
            seed: 0,
            alpha: 0.05,
            samples_per_iteration: 1,
            oracle_spacing: None,
            horizon: None,
            enumeration_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: usize,
    /// `max |Q*(b,a) - Q^{pi_k}(b,a)|` over the covering.
    pub error: f64,
    pub theorem1: f64,
    pub theorem2: f64,
    /// `gamma delta Vmax / (1 - gamma)`.
    pub projection: f64,
    pub cover_size: usize,
    pub wall_ms: f64,
}

/// Runs one scheme on `model` for `k = 0..=k_max` and reports the policy
/// error against the grid oracle next to both bounds.
pub fn run_convergence(model: &TabularPomdp, config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>, ExactError> {
    if !(config.eta > 0.0) {
        return Err(ExactError::Domain("eta must be positive".into()));
    }
    let start = Instant::now();
    let gamma = model.discount();
    let horizon = config.horizon.unwrap_or_else(|| horizon_for(gamma));
    let reachable = enumerate_reachable_beliefs(model, model.initial_belief(), horizon, config.enumeration_budget)?;
    let cover = build_internal_covering(&reachable, config.delta);
    let pm = ProjectedModel::build(model, &cover)?;
    let oracle = oracle_qstar(
        model,
        config
            .oracle_spacing
            .unwrap_or_else(|| default_spacing(model.n_states())),
    )?;
    let qstar = oracle.q_table(&cover);

    let params = BoundParams {
        gamma,
        eta: config.eta,
        n_actions: model.n_actions(),
        vmax: model.reward_bound() / (1.0 - gamma),
        delta: config.delta,
        n_delta: cover.len(),
        alpha: config.alpha,
    };
    let schedule = match config.scheme {
        Scheme::Exact => SampleSchedule::Exact,
        _ => SampleSchedule::Linear {
            per_iteration: config.samples_per_iteration.max(1),
        },
    };

    let mut rng = rng_from(&[config.seed]);
    let mut samples = PairSamples::empty(&pm);
    let mut table = PreferenceTable::zeros(cover.len(), model.n_actions());
    let mut ledger = ErrorLedger::new(cover.len(), model.n_actions());
    let mut rows = Vec::with_capacity(config.k_max + 1);
    for k in 0..=config.k_max {
        if k > 0 {
            let exact_next = exact_dpp_backup(&table, &pm, config.eta);
            let next = match config.scheme {
                Scheme::Exact => exact_next.clone(),
                Scheme::Synchronous => synchronous_update(
                    &table,
                    &pm,
                    model,
                    &cover,
                    config.eta,
                    &schedule,
                    &mut samples,
                    &mut rng,
                ),
                Scheme::Asynchronous => {
                    let mut t = table.clone();
                    for b in 0..cover.len() {
                        for a in 0..model.n_actions() {
                            asynchronous_update(&mut t, &pm, model, &cover, config.eta, (b, a), &mut samples, &mut rng);
                        }
                    }
                    t
                }
            };
            ledger.record(&next, &exact_next);
            table = next;
        }
        let q = evaluate_policy_on_cover(&policy_from_prefs(&table, config.eta), &pm)?;
        let error = qstar
            .iter()
            .flatten()
            .zip(q.iter().flatten())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        rows.push(ConvergenceRow {
            k,
            error,
            theorem1: theorem1_bound(&params, k, &ledger.cumulative_sup)?,
            theorem2: theorem2_bound(&params, k)?,
            projection: params.projection_term(),
            cover_size: cover.len(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
