//! Unit-disk connectivity graphs and seeded instance generation.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Regeneration attempts before a parameter set is declared infeasible.
pub const MAX_GENERATION_ATTEMPTS: u32 = 1000;

/// Index of a node. `NodeId::BASE` (0) is the base station, sensors are `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const BASE: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_base(self) -> bool {
        self.0 == 0
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_base() {
            write!(f, "base")
        } else {
            write!(f, "v{}", self.0)
        }
    }
}

/// Immutable undirected unit-disk graph. Position 0 is the base station.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityGraph {
    positions: Vec<[f64; 2]>,
    range: f64,
    side: f64,
    seed: u64,
    adjacency: Vec<Vec<NodeId>>,
}

impl ConnectivityGraph {
    /// Builds the unit-disk graph over `positions`: nodes `i != j` are adjacent
    /// iff their distance is at most `range`. Fails if the graph is disconnected.
    pub fn from_positions(positions: Vec<[f64; 2]>, range: f64) -> Result<Self, GraphError> {
        if positions.is_empty() {
            return Err(GraphError::InvalidParameters(
                "no base station position".into(),
            ));
        }
        if !(range > 0.0) {
            return Err(GraphError::InvalidParameters(format!(
                "range must be positive, got {range}"
            )));
        }
        let side = positions
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0f64, f64::max);
        let graph = Self::unchecked(positions, range, side, 0);
        let unreachable = graph
            .hop_distances(NodeId::BASE)
            .iter()
            .filter(|d| d.is_none())
            .count();
        if unreachable > 0 {
            return Err(GraphError::Disconnected { unreachable });
        }
        Ok(graph)
    }

    fn unchecked(positions: Vec<[f64; 2]>, range: f64, side: f64, seed: u64) -> Self {
        let count = positions.len();
        let mut adjacency = vec![Vec::new(); count];
        for i in 0..count {
            for j in (i + 1)..count {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                if (dx * dx + dy * dy).sqrt() <= range {
                    adjacency[i].push(NodeId::from(j));
                    adjacency[j].push(NodeId::from(i));
                }
            }
        }
        ConnectivityGraph {
            positions,
            range,
            side,
            seed,
            adjacency,
        }
    }

    /// Number of sensor nodes (the base station is not counted).
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    /// Number of nodes including the base station.
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn sensors(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..self.node_count()).map(NodeId::from)
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Neighbors of `v` in ascending id order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v.index()]
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .filter(move |&&b| a < b)
                .map(move |&b| (a, b))
        })
    }

    /// BFS hop distance from `source` to every node.
    pub fn hop_distances(&self, source: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        dist[source.index()] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap();
            for &w in self.neighbors(u) {
                if dist[w.index()].is_none() {
                    dist[w.index()] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Largest hop distance between any two nodes.
    pub fn diameter(&self) -> u32 {
        self.nodes()
            .map(|v| {
                self.hop_distances(v)
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_instance(&self) -> InstanceFile {
        InstanceFile {
            n: self.n(),
            side: self.side,
            range: self.range,
            seed: self.seed,
            positions: self.positions.clone(),
        }
    }
}

/// Generates a connected instance: `n` sensors and the base station placed
/// uniformly in `[0, side]^2`. Disconnected draws are regenerated from derived
/// sub-seeds, up to [`MAX_GENERATION_ATTEMPTS`] times.
pub fn generate_instance(
    n: usize,
    side: f64,
    range: f64,
    seed: u64,
) -> Result<ConnectivityGraph, GraphError> {
    if n < 1 {
        return Err(GraphError::InvalidParameters(
            "need at least one sensor".into(),
        ));
    }
    if !(side > 0.0) || !(range > 0.0) {
        return Err(GraphError::InvalidParameters(format!(
            "side and range must be positive (side={side}, range={range})"
        )));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
        let positions: Vec<[f64; 2]> = (0..=n)
            .map(|_| [rng.gen_range(0.0..=side), rng.gen_range(0.0..=side)])
            .collect();
        let graph = ConnectivityGraph::unchecked(positions, range, side, seed);
        if graph
            .hop_distances(NodeId::BASE)
            .iter()
            .all(Option::is_some)
        {
            return Ok(graph);
        }
    }
    Err(GraphError::ConnectivityFailure {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// On-disk instance: `positions[0]` is the base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub side: f64,
    pub range: f64,
    pub seed: u64,
    pub positions: Vec<[f64; 2]>,
}

impl InstanceFile {
    pub fn to_graph(&self) -> Result<ConnectivityGraph, GraphError> {
        if self.positions.len() != self.n + 1 {
            return Err(GraphError::InvalidParameters(format!(
                "instance declares n={} but has {} positions",
                self.n,
                self.positions.len()
            )));
        }
        let graph = ConnectivityGraph::from_positions(self.positions.clone(), self.range)?;
        Ok(ConnectivityGraph {
            side: self.side,
            seed: self.seed,
            ..graph
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
