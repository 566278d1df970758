use thiserror::Error;

use crate::lattice::LatticePoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UstError {
    #[error("random walk exceeded its step budget of {budget} steps")]
    StepBudget { budget: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("path is empty")]
    EmptyPath,
    #[error("path vertices {index} and {} are not lattice neighbours", index + 1)]
    NotAdjacent { index: usize },
    #[error("vertex {0} is not in the tree")]
    NotInTree(LatticePoint),
    #[error("vertices {0} and {1} are only joined through the wired boundary")]
    JoinedThroughBoundary(LatticePoint, LatticePoint),
    #[error("explored region reaches unrevealed or wired vertex {0}; enlarge the container")]
    Truncated(LatticePoint),
    #[error("graph is not a tree: {0}")]
    NotATree(String),
    #[error("vertex sets are not connected; resistance is infinite")]
    Disconnected,
    #[error("ball has {size} vertices, above the exact-moment cap of {cap}; use Monte Carlo")]
    CapExceeded { size: usize, cap: usize },
    #[error("malformed tree file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, UstError>;
