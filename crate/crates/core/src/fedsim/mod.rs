//! Decentralized training with gradient tracking and poisoning adversaries.

mod sim;
mod task;

pub use sim::*;
pub use task::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("task has data for {task} nodes but the graph has {graph}")]
    NodeCountMismatch { task: usize, graph: usize },
}

pub type Result<T> = std::result::Result<T, SimError>;
