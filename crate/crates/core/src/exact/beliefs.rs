use std::collections::VecDeque;

use super::ExactError;
use crate::envs::tabular::TabularPomdp;

pub type Belief = Vec<f64>;

/// Beliefs closer than this in 1-norm are merged during enumeration.
const DEDUP_TOLERANCE: f64 = 1e-10;

pub fn d1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Smallest `H` with `gamma^H < 0.01`.
pub fn horizon_for(gamma: f64) -> usize {
    (0.01f64.ln() / gamma.ln()).ceil() as usize
}

/// Breadth-first enumeration of beliefs reachable from `b0` in at most
/// `horizon` updates, over every action and every observation of positive
/// probability. `budget` caps the number of belief expansions.
pub fn enumerate_reachable_beliefs(
    model: &TabularPomdp,
    b0: &[f64],
    horizon: usize,
    budget: usize,
) -> Result<Vec<Belief>, ExactError> {
    let mut found: Vec<Belief> = vec![b0.to_vec()];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut expansions = 0;
    while let Some((index, depth)) = queue.pop_front() {
        if depth >= horizon {
            continue;
        }
        expansions += 1;
        if expansions > budget {
            return Err(ExactError::BudgetExceeded(budget));
        }
        let b = found[index].clone();
        for a in 0..model.n_actions() {
            let dist = model.obs_distribution(&b, a);
            for (o, &p) in dist.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let next = model.tau(&b, a, o).map_err(|_| ExactError::ZeroProbability)?;
                if found.iter().all(|f| d1(f, &next) > DEDUP_TOLERANCE) {
                    found.push(next);
                    queue.push_back((found.len() - 1, depth + 1));
                }
            }
        }
    }
    Ok(found)
}

/// Well-ordered set of beliefs serving as an internal covering.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringSet {
    pub beliefs: Vec<Belief>,
    pub delta: f64,
}

impl CoveringSet {
    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }
}

/// Greedy packing in input order: keep a belief iff it is farther than
/// `delta` from everything kept so far. The result is both a `delta`-packing
/// and an internal `delta`-covering of the input.
pub fn build_internal_covering(beliefs: &[Belief], delta: f64) -> CoveringSet {
    let mut kept: Vec<Belief> = Vec::new();
    for b in beliefs {
        if kept.iter().all(|k| d1(k, b) > delta) {
            kept.push(b.clone());
        }
    }
    CoveringSet { beliefs: kept, delta }
}

/// Largest distance from a point of `points` to its nearest cover member.
pub fn covering_radius(cover: &CoveringSet, points: &[Belief]) -> f64 {
    points
        .iter()
        .map(|p| cover.beliefs.iter().map(|c| d1(c, p)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

pub fn min_pairwise_distance(cover: &CoveringSet) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in cover.beliefs.iter().enumerate() {
        for b in &cover.beliefs[i + 1..] {
            best = best.min(d1(a, b));
        }
    }
    best
}

/// Index of the nearest member to `b`; ties go to the lowest index.
pub fn project(cover: &CoveringSet, b: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in cover.beliefs.iter().enumerate() {
        let d = d1(c, b);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Projection of `tau(b, a, o)` onto the cover.
pub fn nearest_belief(
    cover: &CoveringSet,
    b: &[f64],
    a: usize,
    o: usize,
    model: &TabularPomdp,
) -> Result<usize, ExactError> {
    let next = model.tau(b, a, o).map_err(|_| ExactError::ZeroProbability)?;
    Ok(project(cover, &next))
}
