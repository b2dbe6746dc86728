//! Comparison planners: the plain sampler policy, a fixed-reference tree
//! search and UCT over a fixed macro set.

mod pomcp;
mod refpol;
mod refsolver;

pub use pomcp::{direction_macros, Pomcp, PomcpConfig, UctEdge, UctNode};
pub use refpol::RefPol;
pub use refsolver::refsolver;
