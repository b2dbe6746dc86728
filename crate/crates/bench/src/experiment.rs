use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use prefpomdp::baselines::{direction_macros, refsolver, Pomcp, PomcpConfig, RefPol};
use prefpomdp::envs::config::{load_scenario, Scenario};
use prefpomdp::envs::maze::MazeModel;
use prefpomdp::envs::rescue::RescueModel;
use prefpomdp::envs::tabular::{self, TabularPomdp};
use prefpomdp::envs::{FreeSpace, NavModel};
use prefpomdp::planner::{
    audit_trace, read_trace, run_episode, write_trace, Budget, EpisodeConfig, EpisodeResult, OnlinePlanner,
    PlannerConfig, PreferencePlanner, ZeroHeuristic,
};
use prefpomdp::pomdp::{BeliefParticleSet, MacroAction, Pomdp};
use prefpomdp::prm::{PrmHeuristic, PrmSampler, Roadmap};
use prefpomdp::rng::{label_word, mix_seed, rng_from};

use crate::stats::mean_ci95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerId {
    Porpi,
    Refsolver,
    Pomcp,
    Refpol,
}

impl PlannerId {
    pub fn label(&self) -> &'static str {
        match self {
            PlannerId::Porpi => "porpi",
            PlannerId::Refsolver => "refsolver",
            PlannerId::Pomcp => "pomcp",
            PlannerId::Refpol => "refpol",
        }
    }
}

fn default_runs() -> usize {
    10
}

fn default_particles() -> usize {
    200
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Scenario file (relative to the spec file) or a tabular model id.
    pub scenario: String,
    pub planners: Vec<PlannerId>,
    pub budgets: Vec<Budget>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Where tables, traces and the manifest go; nothing is written if unset.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Primitive steps per episode.
    pub max_steps: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Settings shared by porpi and refsolver; the budget is overridden per cell.
    #[serde(default)]
    pub planner: PlannerConfig,
    /// POMCP settings; the budget is overridden per cell.
    #[serde(default)]
    pub pomcp: PomcpConfig,
    #[serde(default = "default_true")]
    pub write_traces: bool,
    /// Roadmap cache file; defaults to `roadmap.json` in the output directory.
    #[serde(default)]
    pub roadmap_cache: Option<PathBuf>,
    /// Ignore any cached roadmap and rebuild it.
    #[serde(skip)]
    pub rebuild_roadmap: bool,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.runs == 0 {
            bail!("runs must be >= 1");
        }
        if self.budgets.is_empty() {
            bail!("budgets must not be empty");
        }
        if self.planners.is_empty() {
            bail!("planners must not be empty");
        }
        if self.max_steps == 0 || self.particles == 0 {
            bail!("max_steps and particles must be >= 1");
        }
        self.planner.validate()?;
        Ok(())
    }
}

/// Environment seed and planner seed of one episode.
///
/// The environment stream depends only on `(base, run)` so all planners and
/// budgets face the same noise; the planner stream additionally mixes in the
/// planner label and the budget.
pub fn episode_seeds(base: u64, planner: PlannerId, budget: &Budget, run: usize) -> (u64, u64) {
    let env = mix_seed(&[base, run as u64]);
    let planner = mix_seed(&[
        base,
        label_word(planner.label()),
        label_word(&budget.label()),
        run as u64,
    ]);
    (env, planner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub planner: String,
    pub budget: String,
    pub run: usize,
    pub env_seed: u64,
    pub planner_seed: u64,
    pub success: bool,
    pub undiscounted_return: f64,
    pub discounted_return: f64,
    pub steps: usize,
    pub decisions: usize,
    pub depletions: usize,
    pub mean_planning_ms: f64,
    /// Diagnostic of a crashed episode; empty otherwise.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub planner: String,
    pub budget: String,
    pub runs: usize,
    pub crashed: usize,
    pub success_rate: f64,
    /// Mean undiscounted return over completed episodes.
    pub mean_return: f64,
    /// Half-width of the 95% Student-t interval.
    pub ci95: f64,
    pub sd_return: f64,
    pub mean_discounted: f64,
    pub ci95_discounted: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: String,
    pub planner: String,
    pub budget: String,
    pub run: usize,
    pub env_seed: u64,
    pub planner_seed: u64,
    pub discount: f64,
    pub undiscounted_return: f64,
    pub discounted_return: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub cells: Vec<CellSummary>,
    pub episodes: Vec<EpisodeRow>,
}

impl ExperimentOutput {
    /// Undiscounted returns of the completed episodes of one cell.
    pub fn returns(&self, planner: PlannerId, budget: &Budget) -> Vec<f64> {
        self.episodes
            .iter()
            .filter(|e| e.planner == planner.label() && e.budget == budget.label() && e.error.is_empty())
            .map(|e| e.undiscounted_return)
            .collect()
    }

    pub fn cell(&self, planner: PlannerId, budget: &Budget) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.planner == planner.label() && c.budget == budget.label())
    }
}

/// Per-scenario start distribution: particles for the agent and the true
/// initial state drawn from the environment stream.
trait Start: Pomdp {
    fn start(&self, particles: usize, rng: &mut dyn RngCore) -> (Vec<Self::State>, Self::State);
}

impl Start for MazeModel {
    fn start(&self, particles: usize, rng: &mut dyn RngCore) -> (Vec<Self::State>, Self::State) {
        (self.initial_particles(particles), self.sample_initial_state(rng))
    }
}

impl Start for RescueModel {
    fn start(&self, particles: usize, _rng: &mut dyn RngCore) -> (Vec<Self::State>, Self::State) {
        let s = self.initial_state();
        (vec![s.clone(); particles], s)
    }
}

impl Start for TabularPomdp {
    fn start(&self, particles: usize, rng: &mut dyn RngCore) -> (Vec<usize>, usize) {
        let draw = |rng: &mut dyn RngCore| {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let b = self.initial_belief();
            let mut acc = 0.0;
            for (s, p) in b.iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            b.iter().rposition(|p| *p > 0.0).unwrap_or(0)
        };
        let truth = draw(rng);
        let mut prng = rng_from(&[rng.next_u64()]);
        ((0..particles).map(|_| draw(&mut prng)).collect(), truth)
    }
}

type PlannerFactory<'a, M> = dyn Fn(PlannerId, &Budget) -> anyhow::Result<Box<dyn OnlinePlanner<M>>> + Sync + 'a;

fn nav_factory<M>(
    spec: &ExperimentSpec,
    roadmap: Arc<Roadmap>,
    dims: usize,
) -> impl Fn(PlannerId, &Budget) -> anyhow::Result<Box<dyn OnlinePlanner<M>>> + Sync + '_
where
    M: NavModel + 'static,
{
    move |id, budget| {
        let cfg = PlannerConfig {
            budget: *budget,
            ..spec.planner.clone()
        };
        let sampler = PrmSampler::new(roadmap.clone(), cfg.max_macro_len);
        let heuristic = PrmHeuristic::new(roadmap.clone());
        Ok(match id {
            PlannerId::Porpi => Box::new(PreferencePlanner::<M, _, _>::new(cfg, sampler, heuristic)?),
            PlannerId::Refsolver => Box::new(refsolver::<M, _, _>(cfg, sampler, heuristic)?),
            PlannerId::Refpol => Box::new(RefPol::new(sampler, cfg.max_macro_len)),
            PlannerId::Pomcp => {
                let pc = PomcpConfig {
                    budget: *budget,
                    ..spec.pomcp.clone()
                };
                Box::new(Pomcp::<M>::new(pc, direction_macros(16, dims, cfg.max_macro_len))?)
            }
        })
    }
}

fn random_single(m: &TabularPomdp, _s: &usize, rng: &mut dyn RngCore) -> Option<MacroAction<usize>> {
    Some(MacroAction::single(m.random_action(rng)))
}

fn tabular_factory(
    spec: &ExperimentSpec,
    n_actions: usize,
) -> impl Fn(PlannerId, &Budget) -> anyhow::Result<Box<dyn OnlinePlanner<TabularPomdp>>> + Sync + '_ {
    move |id, budget| {
        let cfg = PlannerConfig {
            budget: *budget,
            ..spec.planner.clone()
        };
        Ok(match id {
            PlannerId::Porpi => Box::new(PreferencePlanner::new(cfg, random_single, ZeroHeuristic)?),
            PlannerId::Refsolver => Box::new(refsolver(cfg, random_single, ZeroHeuristic)?),
            PlannerId::Refpol => Box::new(RefPol::new(random_single, 1)),
            PlannerId::Pomcp => {
                let pc = PomcpConfig {
                    budget: *budget,
                    ..spec.pomcp.clone()
                };
                Box::new(Pomcp::new(pc, (0..n_actions).map(MacroAction::single).collect())?)
            }
        })
    }
}

fn roadmap_for<S: FreeSpace + Serialize>(
    space: &S,
    config: &prefpomdp::prm::RoadmapConfig,
    cache: Option<&Path>,
    rebuild: bool,
) -> anyhow::Result<Arc<Roadmap>> {
    let fingerprint = label_word(&serde_json::to_string(space)?);
    let map = match cache {
        Some(path) => Roadmap::load_or_build(space, config, fingerprint, path, rebuild)?,
        None => Roadmap::build(space, config, fingerprint, &mut rng_from(&[config.seed, fingerprint]))?,
    };
    Ok(Arc::new(map))
}

/// Runs every `(planner, budget, run)` cell of `spec`. Relative paths in the
/// spec resolve against `base_dir`.
pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path) -> anyhow::Result<ExperimentOutput> {
    spec.validate()?;
    let out_dir = spec.output_dir.as_ref().map(|d| base_dir.join(d));
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir.join("traces"))?;
    }
    let output = if let Some(model) = tabular::by_id(&spec.scenario) {
        let factory = tabular_factory(spec, model.n_actions());
        run_cells(spec, &spec.scenario, &model, &factory, out_dir.as_deref())?
    } else {
        let path = base_dir.join(&spec.scenario);
        let cache = match (&spec.roadmap_cache, &out_dir) {
            (Some(c), _) => Some(base_dir.join(c)),
            (None, Some(dir)) => Some(dir.join("roadmap.json")),
            (None, None) => None,
        };
        match load_scenario(&path).map_err(|e| anyhow!("{e}"))? {
            Scenario::Maze(sc) => {
                let roadmap = roadmap_for(sc.as_ref(), &sc.roadmap, cache.as_deref(), spec.rebuild_roadmap)?;
                let model = MazeModel::new(sc.clone());
                let factory = nav_factory::<MazeModel>(spec, roadmap, sc.dims);
                run_cells(spec, &sc.name, &model, &factory, out_dir.as_deref())?
            }
            Scenario::Rescue(sc) => {
                let roadmap = roadmap_for(sc.as_ref(), &sc.roadmap, cache.as_deref(), spec.rebuild_roadmap)?;
                let model = RescueModel::new(sc.clone());
                let factory = nav_factory::<RescueModel>(spec, roadmap, 3);
                run_cells(spec, &sc.name, &model, &factory, out_dir.as_deref())?
            }
        }
    };
    if let Some(dir) = &out_dir {
        write_outputs(dir, spec, &output)?;
    }
    Ok(output)
}

fn run_cells<M>(
    spec: &ExperimentSpec,
    scenario: &str,
    model: &M,
    factory: &PlannerFactory<'_, M>,
    out_dir: Option<&Path>,
) -> anyhow::Result<ExperimentOutput>
where
    M: Start + Clone + Sync,
{
    let mut jobs = Vec::new();
    for &planner in &spec.planners {
        for budget in &spec.budgets {
            for run in 0..spec.runs {
                jobs.push((planner, *budget, run));
            }
        }
    }
    let episodes: Vec<EpisodeRow> = jobs
        .par_iter()
        .map(|&(planner, budget, run)| run_one(spec, scenario, model, factory, planner, &budget, run, out_dir))
        .collect::<anyhow::Result<_>>()?;

    let mut cells = Vec::new();
    for &planner in &spec.planners {
        for budget in &spec.budgets {
            let rows: Vec<&EpisodeRow> = episodes
                .iter()
                .filter(|e| e.planner == planner.label() && e.budget == budget.label())
                .collect();
            let done: Vec<&&EpisodeRow> = rows.iter().filter(|e| e.error.is_empty()).collect();
            let und: Vec<f64> = done.iter().map(|e| e.undiscounted_return).collect();
            let disc: Vec<f64> = done.iter().map(|e| e.discounted_return).collect();
            let (mean, sd, ci) = mean_ci95(&und);
            let (dmean, _, dci) = mean_ci95(&disc);
            cells.push(CellSummary {
                planner: planner.label().into(),
                budget: budget.label(),
                runs: rows.len(),
                crashed: rows.len() - done.len(),
                success_rate: rows.iter().filter(|e| e.success).count() as f64 / rows.len() as f64,
                mean_return: mean,
                ci95: ci,
                sd_return: sd,
                mean_discounted: dmean,
                ci95_discounted: dci,
            });
        }
    }
    Ok(ExperimentOutput { cells, episodes })
}

#[allow(clippy::too_many_arguments)]
fn run_one<M>(
    spec: &ExperimentSpec,
    scenario: &str,
    model: &M,
    factory: &PlannerFactory<'_, M>,
    planner_id: PlannerId,
    budget: &Budget,
    run: usize,
    out_dir: Option<&Path>,
) -> anyhow::Result<EpisodeRow>
where
    M: Start + Clone,
{
    let (env_seed, planner_seed) = episode_seeds(spec.base_seed, planner_id, budget, run);
    let mut row = EpisodeRow {
        planner: planner_id.label().into(),
        budget: budget.label(),
        run,
        env_seed,
        planner_seed,
        success: false,
        undiscounted_return: 0.0,
        discounted_return: 0.0,
        steps: 0,
        decisions: 0,
        depletions: 0,
        mean_planning_ms: 0.0,
        error: String::new(),
    };
    let (particles, truth) = model.start(spec.particles, &mut rng_from(&[env_seed, u64::MAX]));
    let belief = BeliefParticleSet::new(particles, spec.particles, planner_seed);
    let mut planner = factory(planner_id, budget)?;
    let mut rng = rng_from(&[planner_seed]);
    let cfg = EpisodeConfig {
        max_steps: spec.max_steps,
        particle_target: spec.particles,
    };
    let result: EpisodeResult = match run_episode(model, planner.as_mut(), belief, truth, &cfg, env_seed, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            row.error = e.to_string();
            return Ok(row);
        }
    };
    row.success = result.success;
    row.undiscounted_return = result.undiscounted_return;
    row.discounted_return = result.discounted_return;
    row.steps = result.steps;
    row.decisions = result.records.len();
    row.depletions = result.depletions;
    row.mean_planning_ms = if result.records.is_empty() {
        0.0
    } else {
        result.records.iter().map(|r| r.planning_ms).sum::<f64>() / result.records.len() as f64
    };
    if let (Some(dir), true) = (out_dir, spec.write_traces) {
        let header = TraceHeader {
            scenario: scenario.into(),
            planner: row.planner.clone(),
            budget: row.budget.clone(),
            run,
            env_seed,
            planner_seed,
            discount: model.discount(),
            undiscounted_return: row.undiscounted_return,
            discounted_return: row.discounted_return,
        };
        let path = dir
            .join("traces")
            .join(format!("{}_{}_{run:03}.jsonl", row.planner, row.budget));
        write_trace(&path, &header, &result.records)?;
    }
    Ok(row)
}

fn write_outputs(dir: &Path, spec: &ExperimentSpec, output: &ExperimentOutput) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    for c in &output.cells {
        w.serialize(c)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    for e in &output.episodes {
        w.serialize(e)?;
    }
    w.flush()?;
    let manifest = serde_json::json!({
        "tool": concat!("bench ", env!("CARGO_PKG_VERSION")),
        "spec": spec,
        "metrics": {
            "mean_return": "mean undiscounted episode return over completed episodes",
            "ci95": "half-width of the two-sided 95% Student-t interval",
            "success": "maze: goal reached; rescue: all objectives visited",
        },
        "seeds": {
            "environment": "mix_seed([base_seed, run])",
            "planner": "mix_seed([base_seed, fnv1a(planner), fnv1a(budget label), run])",
        },
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Recomputes a trace's returns from its per-step rewards and checks them
/// against both the records and the header.
pub fn audit_trace_file(path: &Path) -> anyhow::Result<prefpomdp::planner::AuditReport> {
    let (header, records): (TraceHeader, _) =
        read_trace(path).with_context(|| format!("reading {}", path.display()))?;
    let report = audit_trace(&records, header.discount, 1e-9)?;
    for (field, reported, recomputed) in [
        (
            "undiscounted_return",
            header.undiscounted_return,
            report.undiscounted_return,
        ),
        ("discounted_return", header.discounted_return, report.discounted_return),
    ] {
        if (reported - recomputed).abs() > 1e-9 {
            bail!("header {field} {reported} differs from recomputed {recomputed}");
        }
    }
    Ok(report)
}
