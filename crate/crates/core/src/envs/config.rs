//! Scenario files: JSON documents tagged by `"kind"`.
//!
//! See `docs/scenario-format.md` for the schema. Parse errors and semantic
//! validation errors both report the offending field path.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::geometry::{to_point, Aabb, Ball};
use super::maze::MazeScenario;
use super::rescue::{NfzEvent, RescueRewards, RescueScenario};
use super::terrain::{Heightmap, ProceduralTerrain};
use crate::prm::RoadmapConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Maze(MazeScenario),
    Rescue(RescueConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainSpec {
    Procedural(ProceduralTerrain),
    /// Headerless CSV grid, relative paths resolved against the scenario file.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescueConfig {
    pub name: String,
    pub world: Aabb,
    pub terrain: TerrainSpec,
    pub start: [f64; 3],
    pub objectives: Vec<Ball>,
    #[serde(default)]
    pub nfz_schedule: Vec<NfzEvent>,
    pub speed: f64,
    pub transition_noise: f64,
    pub observation_noise: f64,
    #[serde(default)]
    pub rewards: RescueRewards,
    pub discount: f64,
    pub observation_grid: f64,
    pub clearance: f64,
    #[serde(default)]
    pub roadmap: RoadmapConfig,
}

#[derive(Debug, Clone)]
pub enum Scenario {
    Maze(Arc<MazeScenario>),
    Rescue(Arc<RescueScenario>),
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Scenario::Maze(m) => &m.name,
            Scenario::Rescue(r) => &r.name,
        }
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: String, message: String },
    Invalid { path: String, message: String },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            LoadError::Parse { path, message } => write!(f, "parse error at `{path}`: {message}"),
            LoadError::Invalid { path, message } => write!(f, "invalid value at `{path}`: {message}"),
        }
    }
}

impl std::error::Error for LoadError {}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses and validates a scenario document; `base_dir` anchors relative
/// heightmap paths.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, LoadError> {
    // Tagged enums buffer their content and lose the field path, so dispatch
    // on `kind` by hand and deserialise the variant directly.
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let kind = value
        .as_object_mut()
        .and_then(|o| o.remove("kind"))
        .ok_or_else(|| LoadError::Parse {
            path: "kind".into(),
            message: "missing scenario kind".into(),
        })?;
    let config = match kind.as_str() {
        Some("maze") => ScenarioConfig::Maze(from_value(value)?),
        Some("rescue") => ScenarioConfig::Rescue(from_value(value)?),
        _ => {
            return Err(LoadError::Parse {
                path: "kind".into(),
                message: format!("unknown scenario kind {kind}"),
            });
        }
    };
    build(config, base_dir)
}

fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(value).map_err(|e| LoadError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn build(config: ScenarioConfig, base_dir: &Path) -> Result<Scenario, LoadError> {
    match config {
        ScenarioConfig::Maze(m) => {
            validate_maze(&m)?;
            Ok(Scenario::Maze(Arc::new(m)))
        }
        ScenarioConfig::Rescue(r) => Ok(Scenario::Rescue(Arc::new(build_rescue(r, base_dir)?))),
    }
}

fn check_common(world: &Aabb, speed: f64, discount: f64, grid: f64, clearance: f64) -> Result<(), LoadError> {
    if !world.is_valid() || (0..3).any(|i| world.extent(i) <= 0.0) {
        return Err(invalid("world", "world box must have positive extent"));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(invalid("speed", "speed must be positive"));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(invalid("discount", "discount must lie strictly inside (0, 1)"));
    }
    if !(grid > 0.0) {
        return Err(invalid("observation_grid", "observation grid must be positive"));
    }
    if !(clearance >= 0.0) {
        return Err(invalid("clearance", "clearance must be non-negative"));
    }
    Ok(())
}

fn check_boxes(field: &str, boxes: &[Aabb]) -> Result<(), LoadError> {
    for (i, b) in boxes.iter().enumerate() {
        if !b.is_valid() {
            return Err(invalid(
                format!("{field}[{i}]"),
                "box needs finite min <= max on every axis",
            ));
        }
    }
    Ok(())
}

fn check_roadmap(r: &RoadmapConfig) -> Result<(), LoadError> {
    if r.nodes == 0 {
        return Err(invalid("roadmap.nodes", "roadmap needs at least one free node"));
    }
    if r.neighbors == 0 {
        return Err(invalid("roadmap.neighbors", "neighbour count must be positive"));
    }
    Ok(())
}

pub fn validate_maze(m: &MazeScenario) -> Result<(), LoadError> {
    check_common(&m.world, m.speed, m.discount, m.observation_grid, m.clearance)?;
    check_roadmap(&m.roadmap)?;
    if m.dims != 2 && m.dims != 3 {
        return Err(invalid("dims", "dims must be 2 or 3"));
    }
    if !(m.motion_noise >= 0.0) {
        return Err(invalid("motion_noise", "noise variance must be non-negative"));
    }
    if !(m.localisation_kernel > 0.0) {
        return Err(invalid("localisation_kernel", "kernel width must be positive"));
    }
    check_boxes("walls", &m.walls)?;
    check_boxes("danger_zones", &m.danger_zones)?;
    check_boxes("landmarks", &m.landmarks)?;
    check_boxes("goals", &m.goals)?;
    if m.goals.is_empty() {
        return Err(invalid("goals", "at least one goal box is required"));
    }
    for (i, g) in m.goals.iter().enumerate() {
        if let Some(j) = m.danger_zones.iter().position(|d| d.intersects(g)) {
            return Err(invalid(format!("goals[{i}]"), format!("overlaps danger_zones[{j}]")));
        }
    }
    if m.spawns.is_empty() {
        return Err(invalid("spawns", "at least one spawn point is required"));
    }
    for (i, s) in m.spawns.iter().enumerate() {
        let p = to_point(s);
        let inside = (0..3).all(|k| p[k] > m.world.min[k] && p[k] < m.world.max[k]);
        if !inside || m.in_wall(&p) || m.in_danger(&p) || m.in_goal(&p) {
            return Err(invalid(
                format!("spawns[{i}]"),
                "spawn must lie in free space, strictly inside the world",
            ));
        }
        if m.dims == 2 && (p.z - m.spawns[0][2]).abs() > 0.0 {
            return Err(invalid(
                format!("spawns[{i}]"),
                "planar scenes need every spawn at the same z",
            ));
        }
    }
    Ok(())
}

fn build_rescue(r: RescueConfig, base_dir: &Path) -> Result<RescueScenario, LoadError> {
    check_common(&r.world, r.speed, r.discount, r.observation_grid, r.clearance)?;
    check_roadmap(&r.roadmap)?;
    if !(r.transition_noise >= 0.0) {
        return Err(invalid("transition_noise", "noise variance must be non-negative"));
    }
    if !(r.observation_noise > 0.0) {
        return Err(invalid(
            "observation_noise",
            "observation noise variance must be positive",
        ));
    }
    let xs = [r.world.min[0], r.world.max[0]];
    let ys = [r.world.min[1], r.world.max[1]];
    let terrain = match &r.terrain {
        TerrainSpec::Procedural(p) => Heightmap::procedural(p, xs, ys),
        TerrainSpec::Csv { path } => Heightmap::from_csv(&base_dir.join(path), xs, ys),
    }
    .map_err(|e| invalid("terrain", e.to_string()))?;
    let scenario = RescueScenario {
        name: r.name,
        world: r.world,
        terrain,
        start: r.start,
        objectives: r.objectives,
        nfz_schedule: r.nfz_schedule,
        speed: r.speed,
        transition_noise: r.transition_noise,
        observation_noise: r.observation_noise,
        rewards: r.rewards,
        discount: r.discount,
        observation_grid: r.observation_grid,
        clearance: r.clearance,
        roadmap: r.roadmap,
    };
    let start = to_point(&scenario.start);
    if !scenario.world.contains(&start) || !scenario.above_terrain(&start) {
        return Err(invalid("start", "start must be inside the world and above the terrain"));
    }
    if scenario.objectives.is_empty() {
        return Err(invalid("objectives", "at least one objective is required"));
    }
    for (i, o) in scenario.objectives.iter().enumerate() {
        let c = o.center_point();
        if !(o.radius > 0.0) {
            return Err(invalid(format!("objectives[{i}].radius"), "radius must be positive"));
        }
        if !scenario.world.contains(&c) || !scenario.above_terrain(&c) {
            return Err(invalid(
                format!("objectives[{i}].center"),
                "objective centre must be inside the world and above the terrain",
            ));
        }
    }
    for (i, e) in scenario.nfz_schedule.iter().enumerate() {
        if i > 0 && e.step <= scenario.nfz_schedule[i - 1].step {
            return Err(invalid(
                format!("nfz_schedule[{i}].step"),
                "event steps must be strictly increasing",
            ));
        }
        check_boxes(&format!("nfz_schedule[{i}].zones"), &e.zones)?;
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maze_json(extra: &str) -> String {
        format!(
            r#"{{
                "kind": "maze", "name": "t", "dims": 2,
                "world": {{"min": [0, 0, 0], "max": [10, 10, 1]}},
                "walls": [], "danger_zones": [], "landmarks": [],
                "goals": [{{"min": [8, 8, 0], "max": [9, 9, 1]}}],
                "spawns": [[1, 1, 0.5]],
                "speed": 1.0, "motion_noise": 0.02, "discount": 0.95,
                "observation_grid": 0.5, "localisation_kernel": 0.25, "clearance": 0.2
                {extra}
            }}"#
        )
    }

    #[test]
    fn empty_obstacles_load() {
        let s = parse_scenario(&maze_json(""), Path::new(".")).unwrap();
        let Scenario::Maze(m) = s else { panic!() };
        assert!(m.walls.is_empty());
        assert_eq!(m.rewards.goal, 2000.0);
    }

    #[test]
    fn parse_errors_carry_field_path() {
        let text = maze_json("").replace(r#""speed": 1.0"#, r#""speed": "fast""#);
        let err = parse_scenario(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
        let text = maze_json(r#", "rewards": {"goal": 1, "danger": -1, "step": "x"}"#);
        let err = parse_scenario(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("rewards.step"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = parse_scenario(&maze_json(r#", "colour": "red""#), Path::new(".")).unwrap_err();
        assert!(matches!(err, LoadError::Parse { .. }), "{err}");
    }

    #[test]
    fn validation_rejects_bad_values() {
        let text = maze_json("").replace(r#""speed": 1.0"#, r#""speed": 0.0"#);
        let err = parse_scenario(&text, Path::new(".")).unwrap_err();
        assert!(
            matches!(&err, LoadError::Invalid { path, .. } if path == "speed"),
            "{err}"
        );
        let text = maze_json("").replace(
            r#""danger_zones": []"#,
            r#""danger_zones": [{"min": [8.5, 8.5, 0], "max": [10, 10, 1]}]"#,
        );
        let err = parse_scenario(&text, Path::new(".")).unwrap_err();
        assert!(
            matches!(&err, LoadError::Invalid { path, .. } if path == "goals[0]"),
            "{err}"
        );
    }

    #[test]
    fn malformed_schedule_rejected() {
        let text = r#"{
            "kind": "rescue", "name": "r",
            "world": {"min": [0, 0, 0], "max": [40, 40, 20]},
            "terrain": {"procedural": {"resolution": 2, "base": 1, "ridge_height": 5, "ridge_x": 20,
                "ridge_width": 3, "saddle_y": 20, "saddle_depth": 2, "saddle_width": 4}},
            "start": [2, 2, 10],
            "objectives": [{"center": [30, 30, 10], "radius": 2}],
            "nfz_schedule": [{"step": 5, "zones": []}, {"step": 5, "zones": []}],
            "speed": 2, "transition_noise": 0.25, "observation_noise": 0.2,
            "discount": 0.99, "observation_grid": 4, "clearance": 1
        }"#;
        let err = parse_scenario(text, Path::new(".")).unwrap_err();
        assert!(
            matches!(&err, LoadError::Invalid { path, .. } if path == "nfz_schedule[1].step"),
            "{err}"
        );
    }
}
