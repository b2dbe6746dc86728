use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::geometry::{segment_free, Point};
use crate::envs::FreeSpace;
use crate::rng::PlanRng;

pub const ROADMAP_VERSION: u32 = 1;

/// Entry candidates examined when connecting an arbitrary point.
const ENTRY_CANDIDATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadmapConfig {
    /// Free nodes sampled in addition to the mandatory ones.
    pub nodes: usize,
    pub neighbors: usize,
    pub seed: u64,
    /// Rejection-sampling attempts allowed per requested node.
    pub attempts_per_node: usize,
}

impl Default for RoadmapConfig {
    fn default() -> Self {
        Self {
            nodes: 300,
            neighbors: 10,
            seed: 0,
            attempts_per_node: 1000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PrmError {
    #[error("free-space sampling found only {found} of {wanted} nodes")]
    Sampling { found: usize, wanted: usize },
    #[error("mandatory point {0} is not in clear free space")]
    MandatoryBlocked(usize),
    #[error("mandatory points {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("roadmap cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Roadmap {
    pub version: u32,
    pub seed: u64,
    /// Identifies the scene the roadmap was built for.
    pub fingerprint: u64,
    /// Edge collision-check resolution.
    pub resolution: f64,
    pub nodes: Vec<Point>,
    /// Node index of each mandatory point.
    pub mandatory: Vec<usize>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Per mandatory point: shortest distance from every node to it.
    to_target: Vec<Vec<f64>>,
    /// Per mandatory point: next node on a shortest path towards it.
    next_hop: Vec<Vec<Option<usize>>>,
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source uniform-cost search over an undirected weighted graph.
/// Returns distances and, for each node, its predecessor towards `source`.
pub(crate) fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = adjacency.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier(0.0, source));
    while let Some(Frontier(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(u);
                heap.push(Frontier(nd, v));
            }
        }
    }
    (dist, pred)
}

fn sample_point<S: FreeSpace + ?Sized>(space: &S, rng: &mut PlanRng) -> Point {
    let b = space.bounds();
    let mut p = Point::zeros();
    for i in 0..3 {
        p[i] = if b.max[i] > b.min[i] {
            rng.random_range(b.min[i]..b.max[i])
        } else {
            b.min[i]
        };
    }
    if space.dims() == 2 {
        p.z = space.plane_z();
    }
    p
}

impl Roadmap {
    pub fn build<S: FreeSpace + ?Sized>(
        space: &S,
        config: &RoadmapConfig,
        fingerprint: u64,
        rng: &mut PlanRng,
    ) -> Result<Self, PrmError> {
        let resolution = space.speed() / 4.0;
        let mandatory_points = space.mandatory_points();
        for (i, p) in mandatory_points.iter().enumerate() {
            if !space.is_clear(p) {
                return Err(PrmError::MandatoryBlocked(i));
            }
        }
        let mut nodes = mandatory_points.clone();
        let mandatory: Vec<usize> = (0..mandatory_points.len()).collect();
        let budget = config.nodes.saturating_mul(config.attempts_per_node.max(1));
        let mut attempts = 0;
        let mut found = 0;
        while found < config.nodes && attempts < budget {
            attempts += 1;
            let p = sample_point(space, rng);
            if space.is_clear(&p) {
                nodes.push(p);
                found += 1;
            }
        }
        if found < config.nodes {
            return Err(PrmError::Sampling {
                found,
                wanted: config.nodes,
            });
        }

        let n = nodes.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((nodes[i] - nodes[j]).norm(), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(d, j) in others.iter().take(config.neighbors) {
                if adjacency[i].iter().any(|&(k, _)| k == j) {
                    continue;
                }
                if segment_free(&nodes[i], &nodes[j], resolution, |p| space.is_clear(p)) {
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }

        let mut to_target = Vec::with_capacity(mandatory.len());
        let mut next_hop = Vec::with_capacity(mandatory.len());
        for &m in &mandatory {
            let (dist, pred) = dijkstra(&adjacency, m);
            to_target.push(dist);
            next_hop.push(pred);
        }
        for a in 0..mandatory.len() {
            for b in a + 1..mandatory.len() {
                if !to_target[a][mandatory[b]].is_finite() {
                    return Err(PrmError::Disconnected(a, b));
                }
            }
        }
        Ok(Self {
            version: ROADMAP_VERSION,
            seed: config.seed,
            fingerprint,
            resolution,
            nodes,
            mandatory,
            adjacency,
            to_target,
            next_hop,
        })
    }

    /// Reuses a cached roadmap when its version, seed and fingerprint match;
    /// otherwise builds one and writes the cache.
    pub fn load_or_build<S: FreeSpace + ?Sized>(
        space: &S,
        config: &RoadmapConfig,
        fingerprint: u64,
        cache: &Path,
        force_rebuild: bool,
    ) -> Result<Self, PrmError> {
        if !force_rebuild {
            if let Ok(text) = std::fs::read_to_string(cache) {
                if let Ok(map) = serde_json::from_str::<Roadmap>(&text) {
                    if map.version == ROADMAP_VERSION && map.seed == config.seed && map.fingerprint == fingerprint {
                        return Ok(map);
                    }
                }
            }
        }
        let mut rng = crate::rng::rng_from(&[config.seed, fingerprint]);
        let map = Self::build(space, config, fingerprint, &mut rng)?;
        if let Some(dir) = cache.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PrmError::Cache(e.to_string()))?;
        }
        let text = serde_json::to_string(&map).map_err(|e| PrmError::Cache(e.to_string()))?;
        std::fs::write(cache, text).map_err(|e| PrmError::Cache(e.to_string()))?;
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Shortest roadmap distance between two mandatory points.
    pub fn mandatory_distance(&self, from: usize, to: usize) -> Option<f64> {
        let d = *self.to_target.get(to)?.get(*self.mandatory.get(from)?)?;
        d.is_finite().then_some(d)
    }

    /// Shortest distance from node `node` to mandatory point `target`.
    pub fn node_distance(&self, node: usize, target: usize) -> f64 {
        self.to_target[target][node]
    }

    /// Nearest node reachable from `p` by a straight free segment.
    pub fn entry_node<S: FreeSpace + ?Sized>(&self, space: &S, p: &Point) -> Option<usize> {
        let mut order: Vec<(f64, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, q)| ((q - p).norm(), i))
            .collect();
        let k = ENTRY_CANDIDATES.min(order.len());
        if k == 0 {
            return None;
        }
        order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(k);
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order
            .into_iter()
            .find(|&(_, i)| segment_free(p, &self.nodes[i], self.resolution, |q| space.is_free(q)))
            .map(|(_, i)| i)
    }

    /// Polyline from `p` to mandatory point `target`: `p`, the entry node,
    /// then roadmap nodes along a shortest path.
    pub fn path_to<S: FreeSpace + ?Sized>(&self, space: &S, p: &Point, target: usize) -> Option<Vec<Point>> {
        let entry = self.entry_node(space, p)?;
        if !self.to_target.get(target)?[entry].is_finite() {
            return None;
        }
        let mut path = vec![*p];
        let mut cur = entry;
        path.push(self.nodes[cur]);
        while cur != self.mandatory[target] {
            cur = self.next_hop[target][cur]?;
            path.push(self.nodes[cur]);
        }
        Some(path)
    }

    /// Length in primitive steps of the path from `p` to `target`.
    pub fn steps_to_target<S: FreeSpace + ?Sized>(&self, space: &S, p: &Point, target: usize) -> Option<usize> {
        let entry = self.entry_node(space, p)?;
        let rest = *self.to_target.get(target)?.get(entry)?;
        if !rest.is_finite() {
            return None;
        }
        let length = (self.nodes[entry] - p).norm() + rest;
        Some((length / space.speed() - 1e-9).ceil().max(0.0) as usize)
    }
}
