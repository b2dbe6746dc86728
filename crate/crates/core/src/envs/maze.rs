//! Navigation maze with poor localisation.
//!
//! The agent only learns its position while inside a landmark box; motion
//! slides along walls; danger zones and goals are terminal.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{arc_to_region, point, to_point, Aabb, Point};
use super::{discounted_constant, FreeSpace, NavModel};
use crate::error::ModelError;
use crate::pomdp::{ActionKey, ObsKey, Pomdp, Step};
use crate::prm::{Roadmap, RoadmapConfig};

const WALL_MARGIN: f64 = 1e-6;
const ACTION_GRID: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeRewards {
    pub goal: f64,
    pub danger: f64,
    pub step: f64,
}

impl Default for MazeRewards {
    fn default() -> Self {
        Self {
            goal: 2000.0,
            danger: -500.0,
            step: -5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeScenario {
    pub name: String,
    pub world: Aabb,
    pub dims: usize,
    pub walls: Vec<Aabb>,
    pub danger_zones: Vec<Aabb>,
    pub landmarks: Vec<Aabb>,
    pub goals: Vec<Aabb>,
    /// Spawn points, each with equal prior probability.
    pub spawns: Vec<[f64; 3]>,
    pub speed: f64,
    /// Motion noise covariance is `I * motion_noise * speed`.
    pub motion_noise: f64,
    #[serde(default)]
    pub rewards: MazeRewards,
    pub discount: f64,
    /// Rounding grid for landmark position observations.
    pub observation_grid: f64,
    /// Kernel width used when weighting particles against a position fix.
    pub localisation_kernel: f64,
    /// Roadmap clearance around walls and danger zones.
    pub clearance: f64,
    #[serde(default)]
    pub roadmap: RoadmapConfig,
}

impl MazeScenario {
    /// Empty planar box `[0, w] x [0, h]`, z fixed at 0.5.
    pub fn open_box_2d(w: f64, h: f64) -> Self {
        Self {
            name: "open-box".into(),
            world: Aabb::new([0.0, 0.0, 0.0], [w, h, 1.0]),
            dims: 2,
            walls: vec![],
            danger_zones: vec![],
            landmarks: vec![],
            goals: vec![],
            spawns: vec![[1.0, 1.0, 0.5]],
            speed: 1.0,
            motion_noise: 0.02,
            rewards: MazeRewards::default(),
            discount: 0.99,
            observation_grid: 0.5,
            localisation_kernel: 0.25,
            clearance: 0.2,
            roadmap: RoadmapConfig::default(),
        }
    }

    pub fn plane_z(&self) -> f64 {
        if self.dims == 2 {
            self.spawns
                .first()
                .map_or(0.5 * (self.world.min[2] + self.world.max[2]), |s| s[2])
        } else {
            0.5 * (self.world.min[2] + self.world.max[2])
        }
    }

    pub fn in_wall(&self, p: &Point) -> bool {
        self.walls.iter().any(|w| w.contains(p))
    }

    pub fn in_danger(&self, p: &Point) -> bool {
        self.danger_zones.iter().any(|d| d.contains(p))
    }

    pub fn in_goal(&self, p: &Point) -> bool {
        self.goals.iter().any(|g| g.contains(p))
    }

    pub fn in_landmark(&self, p: &Point) -> bool {
        self.landmarks.iter().any(|l| l.contains(p))
    }

    fn inside_world(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] > self.world.min[i] && p[i] < self.world.max[i])
    }

    /// Straight motion when the segment is clear of walls and stays in the
    /// world, otherwise [`MazeScenario::slide`].
    pub fn advance(&self, from: &Point, displacement: &Point) -> Point {
        let target = from + displacement;
        let in_world = (0..3).all(|i| target[i] > self.world.min[i] && target[i] < self.world.max[i]);
        if in_world && !self.walls.iter().any(|w| w.segment_hits(from, &target)) {
            target
        } else {
            self.slide(from, displacement)
        }
    }

    /// Moves `from` by `displacement` one axis at a time, stopping each axis
    /// move just short of any wall or the world boundary.
    pub fn slide(&self, from: &Point, displacement: &Point) -> Point {
        let mut p = *from;
        for axis in 0..3 {
            let d = displacement[axis];
            if d == 0.0 {
                continue;
            }
            let lo = self.world.min[axis] + WALL_MARGIN;
            let hi = self.world.max[axis] - WALL_MARGIN;
            let mut target = (p[axis] + d).clamp(lo, hi);
            for wall in &self.walls {
                let overlaps = (0..3)
                    .filter(|&j| j != axis)
                    .all(|j| p[j] >= wall.min[j] && p[j] <= wall.max[j]);
                if !overlaps {
                    continue;
                }
                if d > 0.0 && p[axis] < wall.min[axis] && target >= wall.min[axis] {
                    target = (wall.min[axis] - WALL_MARGIN).max(p[axis]);
                } else if d < 0.0 && p[axis] > wall.max[axis] && target <= wall.max[axis] {
                    target = (wall.max[axis] + WALL_MARGIN).min(p[axis]);
                }
            }
            p[axis] = if d > 0.0 {
                target.max(p[axis].min(hi))
            } else {
                target.min(p[axis].max(lo))
            };
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MazeStatus {
    Active,
    Goal,
    Danger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeState {
    pub pos: Point,
    pub status: MazeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MazeObs {
    Null,
    Position(Point),
}

#[derive(Debug, Clone)]
pub struct MazeModel {
    scenario: Arc<MazeScenario>,
    noisy: bool,
}

impl MazeModel {
    pub fn new(scenario: Arc<MazeScenario>) -> Self {
        Self { scenario, noisy: true }
    }

    pub fn scenario(&self) -> &MazeScenario {
        &self.scenario
    }

    pub fn state_at(&self, p: Point) -> MazeState {
        MazeState {
            pos: p,
            status: MazeStatus::Active,
        }
    }

    /// Particles split evenly over the spawn points.
    pub fn initial_particles(&self, n: usize) -> Vec<MazeState> {
        (0..n)
            .map(|i| self.state_at(to_point(&self.scenario.spawns[i % self.scenario.spawns.len()])))
            .collect()
    }

    /// Draws the true spawn uniformly.
    pub fn sample_initial_state(&self, rng: &mut dyn RngCore) -> MazeState {
        let i = rng.random_range(0..self.scenario.spawns.len());
        self.state_at(to_point(&self.scenario.spawns[i]))
    }

    /// Exact position inside a landmark, otherwise nothing.
    pub fn observe(&self, next: &Point) -> MazeObs {
        if self.scenario.in_landmark(next) {
            MazeObs::Position(*next)
        } else {
            MazeObs::Null
        }
    }

    fn grid_key(&self, p: &Point) -> ObsKey {
        let g = self.scenario.observation_grid;
        vec![
            1,
            (p.x / g).round() as i64,
            (p.y / g).round() as i64,
            (p.z / g).round() as i64,
        ]
    }
}

pub(crate) fn clamp_direction(a: &Point, dims: usize) -> Point {
    let mut d = *a;
    if dims == 2 {
        d.z = 0.0;
    }
    let n = d.norm();
    if n > 1.0 {
        d / n
    } else {
        d
    }
}

pub(crate) fn random_direction(dims: usize, rng: &mut (impl Rng + ?Sized)) -> Point {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = if dims == 2 { 0.0 } else { rng.sample(StandardNormal) };
        let v = point(x, y, z);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

pub(crate) fn direction_key(a: &Point, dims: usize) -> ActionKey {
    let d = clamp_direction(a, dims);
    (0..dims).map(|i| (d[i] / ACTION_GRID).round() as i64).collect()
}

impl Pomdp for MazeModel {
    type State = MazeState;
    type Action = Point;
    type Obs = MazeObs;

    fn discount(&self) -> f64 {
        self.scenario.discount
    }

    fn reward_bound(&self) -> f64 {
        let r = &self.scenario.rewards;
        r.goal.abs().max(r.danger.abs()).max(r.step.abs())
    }

    fn is_terminal(&self, s: &MazeState) -> bool {
        s.status != MazeStatus::Active
    }

    fn is_success(&self, s: &MazeState) -> bool {
        s.status == MazeStatus::Goal
    }

    fn step<R: Rng + ?Sized>(
        &self,
        s: &MazeState,
        a: &Point,
        rng: &mut R,
    ) -> Result<Step<MazeState, MazeObs>, ModelError> {
        if self.is_terminal(s) {
            return Ok(Step {
                state: s.clone(),
                obs: MazeObs::Null,
                reward: 0.0,
                terminal: true,
            });
        }
        if !a.iter().all(|c| c.is_finite()) {
            return Err(ModelError::InvalidAction(format!("non-finite direction {a:?}")));
        }
        if self.scenario.in_wall(&s.pos) || !self.scenario.inside_world(&s.pos) {
            return Err(ModelError::InvalidState(format!(
                "position {:?} is not in free space",
                s.pos
            )));
        }
        let sc = &self.scenario;
        let mut displacement = clamp_direction(a, sc.dims) * sc.speed;
        if self.noisy {
            let sd = (sc.motion_noise * sc.speed).sqrt();
            for i in 0..sc.dims {
                let n: f64 = rng.sample(StandardNormal);
                displacement[i] += sd * n;
            }
        }
        let pos = sc.advance(&s.pos, &displacement);
        let (status, reward) = if sc.in_danger(&pos) {
            (MazeStatus::Danger, sc.rewards.danger)
        } else if sc.in_goal(&pos) {
            (MazeStatus::Goal, sc.rewards.goal)
        } else {
            (MazeStatus::Active, sc.rewards.step)
        };
        Ok(Step {
            obs: self.observe(&pos),
            state: MazeState { pos, status },
            reward,
            terminal: status != MazeStatus::Active,
        })
    }

    fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        random_direction(self.scenario.dims, rng)
    }

    fn action_key(&self, a: &Point) -> ActionKey {
        direction_key(a, self.scenario.dims)
    }

    fn obs_key(&self, o: &MazeObs) -> ObsKey {
        match o {
            MazeObs::Null => vec![0],
            MazeObs::Position(p) => self.grid_key(p),
        }
    }

    /// Keyed by the last position fix in the macro (or none).
    fn macro_obs_key(&self, obs: &[MazeObs]) -> ObsKey {
        obs.iter()
            .rev()
            .find_map(|o| match o {
                MazeObs::Position(p) => Some(self.grid_key(p)),
                MazeObs::Null => None,
            })
            .unwrap_or_else(|| vec![0])
    }

    fn obs_log_weight(&self, _a: &Point, next: &MazeState, simulated: &MazeObs, actual: &MazeObs) -> f64 {
        match (simulated, actual) {
            (MazeObs::Null, MazeObs::Null) => 0.0,
            (MazeObs::Position(_), MazeObs::Position(o)) => {
                let h = self.scenario.localisation_kernel;
                -(next.pos - o).norm_squared() / (2.0 * h * h)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    fn belief_summary(&self, particles: &[MazeState]) -> Vec<f64> {
        if particles.is_empty() {
            return vec![];
        }
        let n = particles.len() as f64;
        let mean = particles.iter().fold(Point::zeros(), |acc, s| acc + s.pos) / n;
        let spread = (particles.iter().map(|s| (s.pos - mean).norm_squared()).sum::<f64>() / n).sqrt();
        vec![mean.x, mean.y, mean.z, spread]
    }
}

impl FreeSpace for MazeScenario {
    fn bounds(&self) -> Aabb {
        self.world
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn plane_z(&self) -> f64 {
        MazeScenario::plane_z(self)
    }

    fn is_free(&self, p: &Point) -> bool {
        self.inside_world(p) && !self.in_wall(p) && !self.in_danger(p)
    }

    fn is_clear(&self, p: &Point) -> bool {
        let c = self.clearance;
        let inside = (0..self.dims).all(|i| p[i] >= self.world.min[i] + c && p[i] <= self.world.max[i] - c);
        inside
            && self.inside_world(p)
            && !self.walls.iter().any(|w| w.inflated(c).contains(p))
            && !self.danger_zones.iter().any(|d| d.inflated(c).contains(p))
    }

    fn mandatory_points(&self) -> Vec<Point> {
        let z = MazeScenario::plane_z(self);
        self.landmarks
            .iter()
            .chain(&self.goals)
            .map(|b| {
                let mut c = b.center();
                if self.dims == 2 {
                    c.z = z;
                }
                c
            })
            .collect()
    }

    fn speed(&self) -> f64 {
        self.speed
    }
}

impl NavModel for MazeModel {
    type Space = MazeScenario;

    fn space(&self) -> &MazeScenario {
        &self.scenario
    }

    fn position(&self, s: &MazeState) -> Point {
        s.pos
    }

    /// Any landmark or goal.
    fn sampler_targets(&self, _s: &MazeState) -> Vec<usize> {
        (0..self.scenario.landmarks.len() + self.scenario.goals.len()).collect()
    }

    /// Best over goals of `sum_{t < n-1} gamma^t step + gamma^(n-1) goal`
    /// where `n` counts primitive steps along the roadmap path until it
    /// first enters the goal box.
    fn heuristic_value(&self, s: &MazeState, roadmap: &Roadmap) -> f64 {
        if self.is_terminal(s) {
            return 0.0;
        }
        let sc = &self.scenario;
        let gamma = sc.discount;
        let first_goal = sc.landmarks.len();
        let best = sc
            .goals
            .iter()
            .enumerate()
            .filter_map(|(i, goal)| {
                let path = roadmap.path_to(sc.as_ref(), &s.pos, first_goal + i)?;
                let arc = arc_to_region(&path, |a, b| goal.segment_entry(a, b))?;
                Some(((arc / sc.speed - 1e-9).ceil() as usize).max(1))
            })
            .min();
        match best {
            Some(n) => discounted_constant(sc.rewards.step, gamma, n - 1) + gamma.powi(n as i32 - 1) * sc.rewards.goal,
            None => sc.rewards.step / (1.0 - gamma),
        }
    }

    fn noiseless(&self) -> Self {
        Self {
            scenario: self.scenario.clone(),
            noisy: false,
        }
    }
}
