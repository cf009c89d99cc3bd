use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no connected instance after {attempts} attempts")]
    ConnectivityFailure { attempts: u32 },
    #[error("graph is disconnected: {unreachable} node(s) unreachable from the base station")]
    Disconnected { unreachable: usize },
    #[error("instance json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("instance io: {0}")]
    Io(#[from] std::io::Error),
}

/// A violated structural invariant of a [`crate::SpanningDag`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("edge {parent}->{child} is not a connectivity edge")]
    NotAGraphEdge { parent: NodeId, child: NodeId },
    #[error("directed cycle through {0}")]
    Cycle(NodeId),
    #[error("base station has parents")]
    BaseHasParents,
    #[error("{0} has no parent")]
    Orphan(NodeId),
    #[error("{0} is unreachable from the base station")]
    Unreachable(NodeId),
    #[error("parent/child sets disagree at {0}")]
    Inconsistent(NodeId),
    #[error("{node} has {parents} parents in a tree")]
    NotATree { node: NodeId, parents: usize },
    #[error("{node}: parent {parent} is not one hop closer to the base")]
    NotShortest { node: NodeId, parent: NodeId },
    #[error("{node}: path lengths {shortest}..{longest} exceed slack {k}")]
    PathBound {
        node: NodeId,
        shortest: u32,
        longest: u32,
        k: u32,
    },
    #[error("operation needs a {expected} but got a {actual}")]
    WrongKind {
        expected: &'static str,
        actual: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("event cap of {cap} exceeded")]
    EventCapExceeded { cap: u64 },
    #[error("{kind} from {src} to {dst}: not a single-hop link")]
    UndeliverableMessage {
        src: NodeId,
        dst: NodeId,
        kind: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol stalled: {0}")]
    Stall(#[from] KernelError),
    #[error("protocol finished without completing: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Dag(#[from] DagError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("balance factor needs at least one base-station child")]
    EmptyChildren,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuilderError {
    #[error("{0} has no qualifying sibling neighbor")]
    NotACandidate(NodeId),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Dag(#[from] DagError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Builder(#[from] BuilderError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
