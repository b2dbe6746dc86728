//! Evaluation scenarios behind the [`Pomdp`](crate::pomdp::Pomdp) interface.

pub mod config;
pub mod geometry;
pub mod maze;
pub mod rescue;
pub mod tabular;
pub mod terrain;

use geometry::{Aabb, Point};

use crate::pomdp::Pomdp;
use crate::prm::Roadmap;

/// Configuration space seen by the roadmap and the macro sampler.
pub trait FreeSpace: Send + Sync {
    fn bounds(&self) -> Aabb;
    /// 2 for planar scenes (z held at [`FreeSpace::plane_z`]), else 3.
    fn dims(&self) -> usize;
    fn plane_z(&self) -> f64;
    /// Collision-free in the model's own sense.
    fn is_free(&self, p: &Point) -> bool;
    /// Free with the roadmap's safety clearance.
    fn is_clear(&self, p: &Point) -> bool;
    /// Points the roadmap must contain (landmarks, goals, objectives).
    fn mandatory_points(&self) -> Vec<Point>;
    fn speed(&self) -> f64;
}

/// Continuous navigation models whose primitive actions are direction
/// vectors with norm at most 1, scaled by the speed.
pub trait NavModel: Pomdp<Action = Point> + Clone {
    type Space: FreeSpace;

    fn space(&self) -> &Self::Space;

    fn position(&self, s: &Self::State) -> Point;

    /// Mandatory-point indices the sampler may target from `s`.
    fn sampler_targets(&self, s: &Self::State) -> Vec<usize>;

    /// Reward-to-go along roadmap paths, ignoring uncertainty.
    fn heuristic_value(&self, s: &Self::State, roadmap: &Roadmap) -> f64;

    /// Same scenario with all noise switched off.
    fn noiseless(&self) -> Self;
}

/// `sum_{t < n} gamma^t * r`.
pub(crate) fn discounted_constant(r: f64, gamma: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    r * (1.0 - gamma.powi(n as i32)) / (1.0 - gamma)
}
