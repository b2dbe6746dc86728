//! Probabilistic roadmaps over free space and the macro sampler built on them.

mod roadmap;
mod sampler;

pub use roadmap::{PrmError, Roadmap, RoadmapConfig, ROADMAP_VERSION};
pub use sampler::{path_to_macro, PrmHeuristic, PrmSampler};
