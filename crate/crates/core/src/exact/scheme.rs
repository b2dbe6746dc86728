use rand::Rng;

use super::beliefs::{project, CoveringSet};
use super::ExactError;
use crate::envs::tabular::TabularPomdp;
use crate::softmax::{log_sum_exp, softmax};

/// Cover-level view of a tabular model: expected rewards and, per
/// `(belief, action)`, the observations of positive probability with the
/// cover index their posterior projects to.
#[derive(Debug, Clone)]
pub struct ProjectedModel {
    pub gamma: f64,
    pub n_actions: usize,
    /// `reward[b][a] = R(b, a)`.
    pub reward: Vec<Vec<f64>>,
    /// `next[b][a] = [(o, P(o | a, b), phi(b, a, o))]` in observation order.
    pub next: Vec<Vec<Vec<(usize, f64, usize)>>>,
}

impl ProjectedModel {
    pub fn build(model: &TabularPomdp, cover: &CoveringSet) -> Result<Self, ExactError> {
        let mut reward = Vec::with_capacity(cover.len());
        let mut next = Vec::with_capacity(cover.len());
        for b in &cover.beliefs {
            let mut rows = Vec::with_capacity(model.n_actions());
            let mut rewards = Vec::with_capacity(model.n_actions());
            for a in 0..model.n_actions() {
                rewards.push(model.expected_reward(b, a));
                let mut entries = Vec::new();
                for (o, &p) in model.obs_distribution(b, a).iter().enumerate() {
                    if p > 0.0 {
                        let post = model.tau(b, a, o).map_err(|_| ExactError::ZeroProbability)?;
                        entries.push((o, p, project(cover, &post)));
                    }
                }
                rows.push(entries);
            }
            reward.push(rewards);
            next.push(rows);
        }
        Ok(Self {
            gamma: crate::pomdp::Pomdp::discount(model),
            n_actions: model.n_actions(),
            reward,
            next,
        })
    }

    pub fn n_beliefs(&self) -> usize {
        self.reward.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceTable {
    /// `values[b][a]`.
    pub values: Vec<Vec<f64>>,
    /// Iteration counter.
    pub k: usize,
    /// Per-pair update counts (asynchronous scheme).
    pub visits: Vec<Vec<u64>>,
}

impl PreferenceTable {
    pub fn constant(n_beliefs: usize, n_actions: usize, value: f64) -> Self {
        Self {
            values: vec![vec![value; n_actions]; n_beliefs],
            k: 0,
            visits: vec![vec![0; n_actions]; n_beliefs],
        }
    }

    pub fn zeros(n_beliefs: usize, n_actions: usize) -> Self {
        Self::constant(n_beliefs, n_actions, 0.0)
    }

    /// `[L_eta pref](b)` for every row.
    pub fn soft_values(&self, eta: f64) -> Vec<f64> {
        self.values.iter().map(|row| log_sum_exp(row, eta)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
fn backup(pref: f64, soft_here: f64, reward: f64, gamma: f64, next: f64) -> f64 {
    pref - soft_here + reward + gamma * next
}

/// One application of the exact operator:
/// `pref'(b,a) = pref(b,a) - L(b) + R(b,a) + gamma sum_o P(o|a,b) L(phi(b,a,o))`.
pub fn exact_dpp_backup(table: &PreferenceTable, pm: &ProjectedModel, eta: f64) -> PreferenceTable {
    synchronous_update_with(
        table,
        pm,
        None,
        eta,
        &SampleSchedule::Exact,
        &mut PairSamples::empty(pm),
        &mut NoRng,
    )
}

/// How many samples the synchronous scheme holds per pair at update `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSchedule {
    /// Exact expectations in place of samples.
    Exact,
    /// `N_k = M_k = per_iteration * (k + 1)`.
    Linear { per_iteration: usize },
}

impl SampleSchedule {
    pub fn count(&self, k: usize) -> Option<usize> {
        match self {
            SampleSchedule::Exact => None,
            SampleSchedule::Linear { per_iteration } => Some(per_iteration * (k + 1)),
        }
    }
}

/// Cumulative samples per `(b, a)`: reward draws `R(s_i, a)` with
/// `s_i ~ b`, and observation draws `o_j ~ P(. | a, b)` counted per entry of
/// [`ProjectedModel::next`].
#[derive(Debug, Clone)]
pub struct PairSamples {
    reward_sum: Vec<Vec<f64>>,
    reward_n: Vec<Vec<usize>>,
    obs_counts: Vec<Vec<Vec<u64>>>,
    obs_n: Vec<Vec<usize>>,
}

impl PairSamples {
    pub fn empty(pm: &ProjectedModel) -> Self {
        let nb = pm.n_beliefs();
        let na = pm.n_actions;
        Self {
            reward_sum: vec![vec![0.0; na]; nb],
            reward_n: vec![vec![0; na]; nb],
            obs_counts: (0..nb)
                .map(|b| (0..na).map(|a| vec![0; pm.next[b][a].len()]).collect())
                .collect(),
            obs_n: vec![vec![0; na]; nb],
        }
    }

    fn top_up(
        &mut self,
        model: &TabularPomdp,
        cover: &CoveringSet,
        pm: &ProjectedModel,
        b: usize,
        a: usize,
        target: usize,
        rng: &mut dyn rand::RngCore,
    ) {
        let belief = &cover.beliefs[b];
        while self.reward_n[b][a] < target {
            let s = sample_index(belief, rng);
            self.reward_sum[b][a] += model.reward(s, a);
            self.reward_n[b][a] += 1;
        }
        while self.obs_n[b][a] < target {
            let u: f64 = rng.random();
            let entries = &pm.next[b][a];
            let mut acc = 0.0;
            let mut pick = entries.len() - 1;
            for (i, &(_, p, _)) in entries.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            self.obs_counts[b][a][pick] += 1;
            self.obs_n[b][a] += 1;
        }
    }

    fn reward_estimate(&self, pm: &ProjectedModel, b: usize, a: usize, exact: bool) -> f64 {
        if exact {
            pm.reward[b][a]
        } else {
            self.reward_sum[b][a] / self.reward_n[b][a] as f64
        }
    }

    fn next_estimate(&self, pm: &ProjectedModel, soft: &[f64], b: usize, a: usize, exact: bool) -> f64 {
        let mut total = 0.0;
        for (i, &(_, p, phi)) in pm.next[b][a].iter().enumerate() {
            let w = if exact {
                p
            } else {
                self.obs_counts[b][a][i] as f64 / self.obs_n[b][a] as f64
            };
            total += w * soft[phi];
        }
        total
    }
}

fn sample_index(weights: &[f64], rng: &mut dyn rand::RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// RNG that is never drawn from (exact expectations).
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("exact backups draw no samples")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("exact backups draw no samples")
    }
    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("exact backups draw no samples")
    }
}

/// Synchronous scheme: every pair is updated from the same table, with
/// Monte-Carlo estimates from `N_k` cumulative samples per pair (or exact
/// expectations under [`SampleSchedule::Exact`]).
#[allow(clippy::too_many_arguments)]
pub fn synchronous_update(
    table: &PreferenceTable,
    pm: &ProjectedModel,
    model: &TabularPomdp,
    cover: &CoveringSet,
    eta: f64,
    schedule: &SampleSchedule,
    samples: &mut PairSamples,
    rng: &mut dyn rand::RngCore,
) -> PreferenceTable {
    synchronous_update_with(table, pm, Some((model, cover)), eta, schedule, samples, rng)
}

/// [`synchronous_update`] drawing reward samples from `model` on `cover`.
pub(crate) fn synchronous_update_with(
    table: &PreferenceTable,
    pm: &ProjectedModel,
    source: Option<(&TabularPomdp, &CoveringSet)>,
    eta: f64,
    schedule: &SampleSchedule,
    samples: &mut PairSamples,
    rng: &mut dyn rand::RngCore,
) -> PreferenceTable {
    let soft = table.soft_values(eta);
    let target = schedule.count(table.k);
    let exact = target.is_none();
    let mut out = table.clone();
    for b in 0..pm.n_beliefs() {
        for a in 0..pm.n_actions {
            if let (Some(n), Some((model, cover))) = (target, source) {
                samples.top_up(model, cover, pm, b, a, n, rng);
            }
            let r = samples.reward_estimate(pm, b, a, exact);
            let next = samples.next_estimate(pm, &soft, b, a, exact);
            out.values[b][a] = backup(table.values[b][a], soft[b], r, pm.gamma, next);
        }
    }
    out.k = table.k + 1;
    out
}

/// Asynchronous scheme: updates only `(b, a)` in place, from its cumulative
/// `N(b, a)` samples (one new reward and observation draw per visit).
#[allow(clippy::too_many_arguments)]
pub fn asynchronous_update(
    table: &mut PreferenceTable,
    pm: &ProjectedModel,
    model: &TabularPomdp,
    cover: &CoveringSet,
    eta: f64,
    pair: (usize, usize),
    samples: &mut PairSamples,
    rng: &mut dyn rand::RngCore,
) {
    let (b, a) = pair;
    table.visits[b][a] += 1;
    let n = table.visits[b][a] as usize;
    samples.top_up(model, cover, pm, b, a, n, rng);
    let soft_here = log_sum_exp(&table.values[b], eta);
    let mut next = 0.0;
    for (i, &(_, _, phi)) in pm.next[b][a].iter().enumerate() {
        let w = samples.obs_counts[b][a][i] as f64 / samples.obs_n[b][a] as f64;
        next += w * log_sum_exp(&table.values[phi], eta);
    }
    let r = samples.reward_estimate(pm, b, a, false);
    table.values[b][a] = backup(table.values[b][a], soft_here, r, pm.gamma, next);
    table.k += 1;
}

/// Softmax rows `pi(a | b)`.
pub fn policy_from_prefs(table: &PreferenceTable, eta: f64) -> Vec<Vec<f64>> {
    table.values.iter().map(|row| softmax(row, eta)).collect()
}

/// Solves `Q(b,a) = R(b,a) + gamma sum_o P(o|a,b) sum_a' pi(a'|b') Q(b',a')`
/// with `b' = phi(b,a,o)`, by fixed-point iteration to a sup-norm residual
/// of `1e-10`.
pub fn evaluate_policy_on_cover(policy: &[Vec<f64>], pm: &ProjectedModel) -> Result<Vec<Vec<f64>>, ExactError> {
    const TOL: f64 = 1e-10;
    let max_iter = 200_000;
    let mut q = pm.reward.clone();
    for _ in 0..max_iter {
        let v: Vec<f64> = q
            .iter()
            .zip(policy)
            .map(|(row, pi)| row.iter().zip(pi).map(|(x, p)| x * p).sum())
            .collect();
        let mut residual: f64 = 0.0;
        for b in 0..pm.n_beliefs() {
            for a in 0..pm.n_actions {
                let next: f64 = pm.next[b][a].iter().map(|&(_, p, phi)| p * v[phi]).sum();
                let updated = pm.reward[b][a] + pm.gamma * next;
                residual = residual.max((updated - q[b][a]).abs());
                q[b][a] = updated;
            }
        }
        if residual < TOL {
            return Ok(q);
        }
    }
    Err(ExactError::NoConvergence(max_iter))
}

/// One application of the fixed-reference operator
/// `pref'(b,a) = (1/eta) ln ref(a|b) + R(b,a) + gamma sum_o P(o|a,b) L(pref)(phi(b,a,o))`.
pub fn reference_backup(
    table: &PreferenceTable,
    pm: &ProjectedModel,
    reference: &[Vec<f64>],
    eta: f64,
) -> PreferenceTable {
    let soft = table.soft_values(eta);
    let mut out = table.clone();
    for b in 0..pm.n_beliefs() {
        for a in 0..pm.n_actions {
            let next: f64 = pm.next[b][a].iter().map(|&(_, p, phi)| p * soft[phi]).sum();
            out.values[b][a] = reference[b][a].ln() / eta + pm.reward[b][a] + pm.gamma * next;
        }
    }
    out.k = table.k + 1;
    out
}

/// Fixed point of [`reference_backup`] for a fixed reference policy.
pub fn reference_fixed_point(
    pm: &ProjectedModel,
    reference: &[Vec<f64>],
    eta: f64,
) -> Result<PreferenceTable, ExactError> {
    let max_iter = 200_000;
    let mut table = PreferenceTable::zeros(pm.n_beliefs(), pm.n_actions);
    for _ in 0..max_iter {
        let next = reference_backup(&table, pm, reference, eta);
        let residual = next
            .values
            .iter()
            .flatten()
            .zip(table.values.iter().flatten())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        table = next;
        if residual < 1e-12 {
            return Ok(table);
        }
    }
    Err(ExactError::NoConvergence(max_iter))
}

/// Approximation errors of a preference sequence against the exact
/// operator: `eps_k = pref_k - O pref_{k-1}` and `E_k = sum_{j<=k} eps_j`.
#[derive(Debug, Clone)]
pub struct ErrorLedger {
    pub eps_sup: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
    pub cumulative_sup: Vec<f64>,
}

impl ErrorLedger {
    /// Starts with `eps_0 = 0`.
    pub fn new(n_beliefs: usize, n_actions: usize) -> Self {
        Self {
            eps_sup: vec![0.0],
            cumulative: vec![vec![0.0; n_actions]; n_beliefs],
            cumulative_sup: vec![0.0],
        }
    }

    pub fn record(&mut self, approx: &PreferenceTable, exact_of_previous: &PreferenceTable) {
        let mut eps_sup: f64 = 0.0;
        let mut cum_sup: f64 = 0.0;
        for (b, row) in approx.values.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                let eps = v - exact_of_previous.values[b][a];
                eps_sup = eps_sup.max(eps.abs());
                self.cumulative[b][a] += eps;
                cum_sup = cum_sup.max(self.cumulative[b][a].abs());
            }
        }
        self.eps_sup.push(eps_sup);
        self.cumulative_sup.push(cum_sup);
    }
}
