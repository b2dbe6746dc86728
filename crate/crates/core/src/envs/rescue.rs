//! Helicopter rescue mission over terrain with scheduled no-fly zones.
//!
//! The helicopter must visit two objective balls in any order. Terrain
//! contact is terminal. No-fly zones only cost reward, and they switch on
//! and off at steps the agent does not know in advance.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{arc_to_region, to_point, Aabb, Ball, Point};
use super::maze::{clamp_direction, direction_key, random_direction};
use super::terrain::Heightmap;
use super::{discounted_constant, FreeSpace, NavModel};
use crate::error::ModelError;
use crate::pomdp::{ActionKey, ObsKey, Pomdp, Step};
use crate::prm::{Roadmap, RoadmapConfig};

const CEILING_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescueRewards {
    pub objective: f64,
    pub complete: f64,
    pub collision: f64,
    pub nfz: f64,
    pub step: f64,
}

impl Default for RescueRewards {
    fn default() -> Self {
        Self {
            objective: 2000.0,
            complete: 20000.0,
            collision: -2000.0,
            nfz: -20.0,
            step: -5.0,
        }
    }
}

/// From `step` on, exactly `zones` are active (until the next event).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfzEvent {
    pub step: usize,
    pub zones: Vec<Aabb>,
}

/// Zones active at `step` under a schedule sorted by step.
pub fn active_zones(schedule: &[NfzEvent], step: usize) -> &[Aabb] {
    schedule
        .iter()
        .rev()
        .find(|e| e.step <= step)
        .map_or(&[], |e| e.zones.as_slice())
}

/// `penalty` if `p` lies in a zone active at `step`, else 0.
pub fn nfz_reward(p: &Point, step: usize, schedule: &[NfzEvent], penalty: f64) -> f64 {
    if active_zones(schedule, step).iter().any(|z| z.contains(p)) {
        penalty
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescueScenario {
    pub name: String,
    pub world: Aabb,
    pub terrain: Heightmap,
    pub start: [f64; 3],
    pub objectives: Vec<Ball>,
    pub nfz_schedule: Vec<NfzEvent>,
    pub speed: f64,
    /// Transition noise covariance is `I * transition_noise * speed`.
    pub transition_noise: f64,
    /// Observation noise covariance is `I * observation_noise`.
    pub observation_noise: f64,
    pub rewards: RescueRewards,
    pub discount: f64,
    pub observation_grid: f64,
    pub clearance: f64,
    pub roadmap: RoadmapConfig,
}

impl RescueScenario {
    pub fn above_terrain(&self, p: &Point) -> bool {
        p.z > self.terrain.height(p.x, p.y)
    }

    fn clamp_to_world(&self, p: &Point) -> Point {
        let mut q = *p;
        for i in 0..3 {
            q[i] = q[i].clamp(self.world.min[i], self.world.max[i] - CEILING_MARGIN);
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescueStatus {
    Active,
    Complete,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescueState {
    pub pos: Point,
    pub visited: Vec<bool>,
    /// Primitive steps since the mission started.
    pub t: usize,
    pub status: RescueStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescueObs {
    Null,
    Reading(Point),
}

/// Which no-fly zones the model charges for.
#[derive(Debug, Clone, PartialEq)]
enum NfzView {
    Schedule,
    /// Zones frozen at a planning step; the agent cannot foresee changes.
    Frozen(Vec<Aabb>),
}

#[derive(Debug, Clone)]
pub struct RescueModel {
    scenario: Arc<RescueScenario>,
    view: NfzView,
    noisy: bool,
}

impl RescueModel {
    pub fn new(scenario: Arc<RescueScenario>) -> Self {
        Self {
            scenario,
            view: NfzView::Schedule,
            noisy: true,
        }
    }

    pub fn scenario(&self) -> &RescueScenario {
        &self.scenario
    }

    pub fn initial_state(&self) -> RescueState {
        RescueState {
            pos: to_point(&self.scenario.start),
            visited: vec![false; self.scenario.objectives.len()],
            t: 0,
            status: RescueStatus::Active,
        }
    }

    /// Penalty this model charges for being at `p` during step `t`.
    pub fn nfz_penalty(&self, p: &Point, t: usize) -> f64 {
        let penalty = self.scenario.rewards.nfz;
        match &self.view {
            NfzView::Schedule => nfz_reward(p, t, &self.scenario.nfz_schedule, penalty),
            NfzView::Frozen(zones) => {
                if zones.iter().any(|z| z.contains(p)) {
                    penalty
                } else {
                    0.0
                }
            }
        }
    }

    /// Zones the model charges for at step `t`.
    pub fn zones_at(&self, t: usize) -> Vec<Aabb> {
        match &self.view {
            NfzView::Schedule => active_zones(&self.scenario.nfz_schedule, t).to_vec(),
            NfzView::Frozen(zones) => zones.clone(),
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

impl Pomdp for RescueModel {
    type State = RescueState;
    type Action = Point;
    type Obs = RescueObs;

    fn discount(&self) -> f64 {
        self.scenario.discount
    }

    fn reward_bound(&self) -> f64 {
        let r = &self.scenario.rewards;
        r.collision.abs().max(r.objective.abs() + r.complete.abs()) + r.step.abs() + r.nfz.abs()
    }

    fn is_terminal(&self, s: &RescueState) -> bool {
        s.status != RescueStatus::Active
    }

    fn is_success(&self, s: &RescueState) -> bool {
        s.status == RescueStatus::Complete
    }

    fn step<R: Rng + ?Sized>(
        &self,
        s: &RescueState,
        a: &Point,
        rng: &mut R,
    ) -> Result<Step<RescueState, RescueObs>, ModelError> {
        if self.is_terminal(s) {
            return Ok(Step {
                state: s.clone(),
                obs: RescueObs::Null,
                reward: 0.0,
                terminal: true,
            });
        }
        if !a.iter().all(|c| c.is_finite()) {
            return Err(ModelError::InvalidAction(format!("non-finite direction {a:?}")));
        }
        let sc = &self.scenario;
        if s.visited.len() != sc.objectives.len() || !sc.above_terrain(&s.pos) {
            return Err(ModelError::InvalidState(format!("invalid rescue state at {:?}", s.pos)));
        }
        let mut next = clamp_direction(a, 3) * sc.speed + s.pos;
        let mut obs_noise = Point::zeros();
        if self.noisy {
            let sd = (sc.transition_noise * sc.speed).sqrt();
            let osd = sc.observation_noise.sqrt();
            for i in 0..3 {
                let n: f64 = rng.sample(StandardNormal);
                next[i] += sd * n;
            }
            for i in 0..3 {
                let n: f64 = rng.sample(StandardNormal);
                obs_noise[i] = osd * n;
            }
        }
        let pos = sc.clamp_to_world(&next);
        let mut state = RescueState {
            pos,
            visited: s.visited.clone(),
            t: s.t + 1,
            status: RescueStatus::Active,
        };
        if !sc.above_terrain(&pos) {
            state.status = RescueStatus::Crashed;
            return Ok(Step {
                state,
                obs: RescueObs::Reading(pos + obs_noise),
                reward: sc.rewards.collision,
                terminal: true,
            });
        }
        let mut reward = sc.rewards.step + self.nfz_penalty(&pos, s.t);
        for (i, ball) in sc.objectives.iter().enumerate() {
            if !state.visited[i] && ball.contains(&pos) {
                state.visited[i] = true;
                reward += sc.rewards.objective;
            }
        }
        if state.visited.iter().all(|&v| v) {
            state.status = RescueStatus::Complete;
            reward += sc.rewards.complete;
        }
        let terminal = state.status != RescueStatus::Active;
        Ok(Step {
            state,
            obs: RescueObs::Reading(pos + obs_noise),
            reward,
            terminal,
        })
    }

    fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        random_direction(3, rng)
    }

    fn action_key(&self, a: &Point) -> ActionKey {
        direction_key(a, 3)
    }

    fn obs_key(&self, o: &RescueObs) -> ObsKey {
        match o {
            RescueObs::Null => vec![0],
            RescueObs::Reading(p) => self.grid_key(p),
        }
    }

    /// Keyed by the last reading of the macro.
    fn macro_obs_key(&self, obs: &[RescueObs]) -> ObsKey {
        obs.last().map_or_else(|| vec![0], |o| self.obs_key(o))
    }

    fn obs_log_weight(&self, _a: &Point, next: &RescueState, simulated: &RescueObs, actual: &RescueObs) -> f64 {
        match (simulated, actual) {
            (RescueObs::Null, RescueObs::Null) => 0.0,
            (RescueObs::Reading(_), RescueObs::Reading(o)) => {
                -(next.pos - o).norm_squared() / (2.0 * self.scenario.observation_noise)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Charges only for the zones active at `step`, for the whole lookahead.
    fn planning_view(&self, step: usize) -> Self {
        Self {
            scenario: self.scenario.clone(),
            view: NfzView::Frozen(active_zones(&self.scenario.nfz_schedule, step).to_vec()),
            noisy: self.noisy,
        }
    }

    fn belief_summary(&self, particles: &[RescueState]) -> Vec<f64> {
        if particles.is_empty() {
            return vec![];
        }
        let n = particles.len() as f64;
        let mean = particles.iter().fold(Point::zeros(), |acc, s| acc + s.pos) / n;
        let spread = (particles.iter().map(|s| (s.pos - mean).norm_squared()).sum::<f64>() / n).sqrt();
        vec![mean.x, mean.y, mean.z, spread]
    }
}

impl FreeSpace for RescueScenario {
    fn bounds(&self) -> Aabb {
        self.world
    }

    fn dims(&self) -> usize {
        3
    }

    fn plane_z(&self) -> f64 {
        0.0
    }

    fn is_free(&self, p: &Point) -> bool {
        self.world.contains(p) && self.above_terrain(p)
    }

    fn is_clear(&self, p: &Point) -> bool {
        let c = self.clearance;
        (0..3).all(|i| p[i] >= self.world.min[i] + c && p[i] <= self.world.max[i] - c)
            && p.z > self.terrain.height(p.x, p.y) + c
    }

    fn mandatory_points(&self) -> Vec<Point> {
        self.objectives.iter().map(Ball::center_point).collect()
    }

    fn speed(&self) -> f64 {
        self.speed
    }
}

impl NavModel for RescueModel {
    type Space = RescueScenario;

    fn space(&self) -> &RescueScenario {
        &self.scenario
    }

    fn position(&self, s: &RescueState) -> Point {
        s.pos
    }

    /// Unvisited objectives only.
    fn sampler_targets(&self, s: &RescueState) -> Vec<usize> {
        (0..self.scenario.objectives.len())
            .filter(|&i| !s.visited.get(i).copied().unwrap_or(true))
            .collect()
    }

    /// Best over visiting orders of the remaining objectives, with roadmap
    /// path lengths up to each ball converted to primitive steps. No-fly
    /// zones are ignored.
    fn heuristic_value(&self, s: &RescueState, roadmap: &Roadmap) -> f64 {
        if self.is_terminal(s) {
            return 0.0;
        }
        let sc = &self.scenario;
        let r = &sc.rewards;
        let gamma = sc.discount;
        let remaining = self.sampler_targets(s);
        let mut best: Option<f64> = None;
        let mut consider = |order: &[usize]| {
            let ball = &sc.objectives[order[0]];
            let Some(arc) = roadmap
                .path_to(sc.as_ref(), &s.pos, order[0])
                .and_then(|path| arc_to_region(&path, |a, b| ball.segment_entry(a, b)))
            else {
                return;
            };
            let mut arrivals = vec![((arc / sc.speed - 1e-9).ceil() as usize).max(1)];
            for pair in order.windows(2) {
                let Some(d) = roadmap.mandatory_distance(pair[0], pair[1]) else {
                    return;
                };
                let d = (d - sc.objectives[pair[1]].radius).max(0.0);
                let prev = *arrivals.last().unwrap();
                arrivals.push(prev + ((d / sc.speed - 1e-9).ceil() as usize).max(1));
            }
            let total = *arrivals.last().unwrap();
            let mut v = discounted_constant(r.step, gamma, total);
            for &n in &arrivals {
                v += r.objective * gamma.powi(n as i32 - 1);
            }
            v += r.complete * gamma.powi(total as i32 - 1);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        };
        match remaining.as_slice() {
            [] => return 0.0,
            [a] => consider(&[*a]),
            [a, b] => {
                consider(&[*a, *b]);
                consider(&[*b, *a]);
            }
            many => consider(many),
        }
        best.unwrap_or(r.step / (1.0 - gamma))
    }

    fn noiseless(&self) -> Self {
        Self {
            scenario: self.scenario.clone(),
            view: self.view.clone(),
            noisy: false,
        }
    }
}

/// Flat-terrain scene used in tests.
pub fn flat_test_scenario() -> RescueScenario {
    RescueScenario {
        name: "flat".into(),
        world: Aabb::new([0.0, 0.0, 0.0], [60.0, 40.0, 30.0]),
        terrain: Heightmap::new([0.0, 0.0], [60.0, 40.0], vec![vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap(),
        start: [5.0, 5.0, 10.0],
        objectives: vec![
            Ball {
                center: [20.0, 5.0, 10.0],
                radius: 2.0,
            },
            Ball {
                center: [20.0, 25.0, 10.0],
                radius: 2.0,
            },
        ],
        nfz_schedule: vec![
            NfzEvent {
                step: 3,
                zones: vec![Aabb::new([8.0, 0.0, 0.0], [12.0, 10.0, 30.0])],
            },
            NfzEvent {
                step: 10,
                zones: vec![],
            },
        ],
        speed: 2.0,
        transition_noise: 0.25,
        observation_noise: 0.2,
        rewards: RescueRewards::default(),
        discount: 0.99,
        observation_grid: 4.0,
        clearance: 1.0,
        roadmap: RoadmapConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::geometry::point;
    use crate::rng::rng_from;

    #[test]
    fn nfz_penalty_follows_schedule() {
        let sc = flat_test_scenario();
        let p = point(10.0, 5.0, 10.0);
        assert_eq!(nfz_reward(&p, 0, &sc.nfz_schedule, -20.0), 0.0);
        assert_eq!(nfz_reward(&p, 3, &sc.nfz_schedule, -20.0), -20.0);
        assert_eq!(nfz_reward(&p, 9, &sc.nfz_schedule, -20.0), -20.0);
        assert_eq!(nfz_reward(&p, 10, &sc.nfz_schedule, -20.0), 0.0);
        assert_eq!(nfz_reward(&point(30.0, 5.0, 10.0), 5, &sc.nfz_schedule, -20.0), 0.0);
    }

    #[test]
    fn planning_view_freezes_active_set() {
        let m = RescueModel::new(Arc::new(flat_test_scenario()));
        let p = point(10.0, 5.0, 10.0);
        let before = m.planning_view(0);
        assert_eq!(before.nfz_penalty(&p, 5), 0.0);
        let during = m.planning_view(4);
        assert_eq!(during.nfz_penalty(&p, 50), -20.0);
        // The executing model and the view agree at the planning step.
        for t in 0..12 {
            assert_eq!(m.planning_view(t).nfz_penalty(&p, t), m.nfz_penalty(&p, t));
        }
    }

    #[test]
    fn ideal_trace_reward() {
        let m = RescueModel::new(Arc::new(flat_test_scenario())).noiseless();
        let mut rng = rng_from(&[3]);
        let mut s = m.initial_state();
        s.pos = point(16.0, 5.0, 10.0);
        let first = m.step(&s, &point(1.0, 0.0, 0.0), &mut rng).unwrap();
        assert_eq!(first.reward, -5.0 + 2000.0);
        assert!(!first.terminal);
        let mut s = first.state;
        s.pos = point(20.0, 21.0, 10.0);
        let second = m.step(&s, &point(0.0, 1.0, 0.0), &mut rng).unwrap();
        assert_eq!(second.reward, -5.0 + 2000.0 + 20000.0);
        assert!(second.terminal && m.is_success(&second.state));
        // Objectives fire once.
        let mut s = m.initial_state();
        s.pos = point(19.0, 5.0, 10.0);
        let a = m.step(&s, &point(0.5, 0.0, 0.0), &mut rng).unwrap();
        let b = m.step(&a.state, &point(-0.5, 0.0, 0.0), &mut rng).unwrap();
        assert_eq!(a.reward, 1995.0);
        assert_eq!(b.reward, -5.0);
    }

    #[test]
    fn terrain_contact_is_terminal() {
        let m = RescueModel::new(Arc::new(flat_test_scenario())).noiseless();
        let mut s = m.initial_state();
        s.pos = point(30.0, 30.0, 3.0);
        let step = m.step(&s, &point(0.0, 0.0, -1.0), &mut rng_from(&[1])).unwrap();
        assert_eq!(step.reward, -2000.0);
        assert!(step.terminal);
        assert_eq!(step.state.status, RescueStatus::Crashed);
    }

    #[test]
    fn empirical_noise_covariances() {
        let m = RescueModel::new(Arc::new(flat_test_scenario()));
        let mut rng = rng_from(&[11]);
        let mut s = m.initial_state();
        s.pos = point(30.0, 30.0, 15.0);
        let n = 100_000;
        let mut trans = [0.0; 3];
        let mut obs = [0.0; 3];
        let mut cross = 0.0;
        for _ in 0..n {
            let step = m.step(&s, &point(0.0, 0.0, 0.0), &mut rng).unwrap();
            let d = step.state.pos - s.pos;
            let RescueObs::Reading(o) = step.obs else { panic!() };
            let e = o - step.state.pos;
            for i in 0..3 {
                trans[i] += d[i] * d[i];
                obs[i] += e[i] * e[i];
            }
            cross += e.x * e.y;
        }
        for i in 0..3 {
            assert!((trans[i] / n as f64 - 0.5).abs() / 0.5 < 0.05, "{trans:?}");
            assert!((obs[i] / n as f64 - 0.2).abs() / 0.2 < 0.05, "{obs:?}");
        }
        assert!((cross / n as f64).abs() < 0.01);
    }

    #[test]
    fn seeded_zero_noise_reads_exact_position() {
        let m = RescueModel::new(Arc::new(flat_test_scenario())).noiseless();
        let s = m.initial_state();
        let step = m.step(&s, &point(1.0, 0.0, 0.0), &mut rng_from(&[0])).unwrap();
        assert_eq!(step.obs, RescueObs::Reading(step.state.pos));
    }
}
