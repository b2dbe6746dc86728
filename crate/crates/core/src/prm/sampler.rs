use std::sync::Arc;

use rand::{Rng, RngCore};

use super::Roadmap;
use crate::envs::geometry::{segment_free, Point};
use crate::envs::{FreeSpace, NavModel};
use crate::planner::{CandidateSampler, ValueHeuristic};
use crate::pomdp::MacroAction;

/// Converts a polyline into primitive direction vectors.
///
/// Each primitive advances by arc length `v` along the path, taking the
/// chord across a corner when the chord is free and otherwise stopping at
/// the corner. The last primitive may be shorter than `v`. The result is
/// truncated at `max_len`; `None` if the path has zero length.
pub fn path_to_macro<S: FreeSpace + ?Sized>(path: &[Point], space: &S, max_len: usize) -> Option<MacroAction<Point>> {
    let v = space.speed();
    let fine = v / 16.0;
    let mut actions = Vec::new();
    let Some(&start) = path.first() else {
        return None;
    };
    let mut cur = start;
    let mut idx = 1;
    while idx < path.len() && actions.len() < max_len {
        let mut remaining = v;
        let mut q = cur;
        let mut j = idx;
        while j < path.len() {
            let seg = path[j] - q;
            let l = seg.norm();
            if l >= remaining {
                q += seg * (remaining / l);
                break;
            }
            remaining -= l;
            q = path[j];
            j += 1;
        }
        let (next, next_idx) = if j > idx && !segment_free(&cur, &q, fine, |p| space.is_free(p)) {
            (path[idx], idx + 1)
        } else {
            (q, j)
        };
        let delta = next - cur;
        if delta.norm() > 1e-12 {
            actions.push(delta / v);
        }
        cur = next;
        idx = next_idx;
    }
    MacroAction::new(actions).ok()
}

/// Proposes macros along roadmap shortest paths to targets chosen by the
/// model's rule (random landmark/goal, or random unvisited objective).
#[derive(Debug, Clone)]
pub struct PrmSampler {
    roadmap: Arc<Roadmap>,
    max_len: usize,
}

impl PrmSampler {
    pub fn new(roadmap: Arc<Roadmap>, max_len: usize) -> Self {
        Self {
            roadmap,
            max_len: max_len.max(1),
        }
    }

    pub fn roadmap(&self) -> &Roadmap {
        &self.roadmap
    }

    /// Macro from `s` towards a specific mandatory point.
    pub fn toward<M: NavModel>(&self, model: &M, s: &M::State, target: usize) -> Option<MacroAction<Point>> {
        let path = self.roadmap.path_to(model.space(), &model.position(s), target)?;
        path_to_macro(&path, model.space(), self.max_len)
    }
}

impl<M: NavModel> CandidateSampler<M> for PrmSampler {
    /// Tries a second target when the first is unreachable.
    fn sample(&self, model: &M, s: &M::State, rng: &mut dyn RngCore) -> Option<MacroAction<Point>> {
        let targets = model.sampler_targets(s);
        if targets.is_empty() {
            return None;
        }
        for _ in 0..2 {
            let target = targets[rng.random_range(0..targets.len())];
            if let Some(m) = self.toward(model, s, target) {
                return Some(m);
            }
        }
        None
    }
}

/// Leaf estimate from roadmap path lengths.
#[derive(Debug, Clone)]
pub struct PrmHeuristic {
    roadmap: Arc<Roadmap>,
}

impl PrmHeuristic {
    pub fn new(roadmap: Arc<Roadmap>) -> Self {
        Self { roadmap }
    }
}

impl<M: NavModel> ValueHeuristic<M> for PrmHeuristic {
    fn value(&self, model: &M, s: &M::State) -> f64 {
        model.heuristic_value(s, &self.roadmap)
    }
}
