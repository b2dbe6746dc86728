use thiserror::Error;

/// Violations of the generative model contract.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("belief has no particles")]
    EmptyBelief,
    #[error("particle depletion: no particle consistent with the observation after {attempts} attempts")]
    Depletion { attempts: usize },
    #[error("node has no children to select from")]
    NoChildren,
    #[error("invalid planner configuration: {0}")]
    Config(String),
}
