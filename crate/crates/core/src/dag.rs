//! Spanning DAGs rooted at the base station: SPD, SPT and k-DAG.
//!
//! Edges are stored in both directions. "Parent" means one step closer to the
//! base: data flows child -> parent, paths are counted base -> node.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DagError;
use crate::graph::{ConnectivityGraph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DagKind {
    Spt,
    Spd,
    Kdag,
}

impl DagKind {
    pub fn name(self) -> &'static str {
        match self {
            DagKind::Spt => "SPT",
            DagKind::Spd => "SPD",
            DagKind::Kdag => "KDAG",
        }
    }
}

impl fmt::Display for DagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shortest and longest base -> node path length, in hops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRange {
    pub shortest: u32,
    pub longest: u32,
}

impl PathRange {
    pub fn slack(self) -> u32 {
        self.longest - self.shortest
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningDag {
    kind: DagKind,
    parents: Vec<BTreeSet<NodeId>>,
    children: Vec<BTreeSet<NodeId>>,
    depth: Vec<u32>,
    slack_bound: Option<u32>,
}

impl SpanningDag {
    /// Assembles a DAG from per-node parent sets. `depth` is the SPD depth
    /// (BFS hop distance) of every node.
    pub fn from_parents(kind: DagKind, parents: Vec<BTreeSet<NodeId>>, depth: Vec<u32>) -> Self {
        assert_eq!(parents.len(), depth.len());
        let mut children = vec![BTreeSet::new(); parents.len()];
        for (child, ps) in parents.iter().enumerate() {
            for p in ps {
                children[p.index()].insert(NodeId::from(child));
            }
        }
        SpanningDag {
            kind,
            parents,
            children,
            depth,
            slack_bound: None,
        }
    }

    pub fn kind(&self) -> DagKind {
        self.kind
    }

    /// Latency slack `k` the DAG was built for (k-DAGs only).
    pub fn slack_bound(&self) -> Option<u32> {
        self.slack_bound
    }

    pub(crate) fn into_kdag(mut self, k: u32) -> Self {
        self.kind = DagKind::Kdag;
        self.slack_bound = Some(k);
        self
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn n(&self) -> usize {
        self.parents.len() - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn parents(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.parents[v.index()]
    }

    pub fn children(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.children[v.index()]
    }

    /// SPD depth (minimum hop count to the base station).
    pub fn depth(&self, v: NodeId) -> u32 {
        self.depth[v.index()]
    }

    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v.index()].is_empty()
    }

    pub fn base_children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children[0].iter().copied()
    }

    /// Directed edges as `(child, parent)` pairs, ordered by child then parent.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (NodeId::from(c), p)))
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(BTreeSet::len).sum()
    }

    pub(crate) fn add_edge(&mut self, parent: NodeId, child: NodeId) -> bool {
        let fresh = self.parents[child.index()].insert(parent);
        self.children[parent.index()].insert(child);
        fresh
    }

    /// Kahn order from the base station. Fails on a cycle or an unreachable node.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, DagError> {
        let count = self.node_count();
        let mut indegree: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut queue: VecDeque<NodeId> = (0..count)
            .filter(|&i| indegree[i] == 0)
            .map(NodeId::from)
            .collect();
        let mut order = Vec::with_capacity(count);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &c in &self.children[u.index()] {
                indegree[c.index()] -= 1;
                if indegree[c.index()] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if order.len() < count {
            let stuck = (0..count)
                .find(|&i| indegree[i] > 0)
                .map(NodeId::from)
                .unwrap();
            return Err(DagError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Shortest and longest base -> v path for every node, by dynamic
    /// programming over a topological order. `None` for unreachable nodes.
    pub fn path_ranges(&self) -> Result<Vec<Option<PathRange>>, DagError> {
        let order = self.topological_order()?;
        let mut ranges: Vec<Option<PathRange>> = vec![None; self.node_count()];
        ranges[0] = Some(PathRange {
            shortest: 0,
            longest: 0,
        });
        for v in order.into_iter().filter(|v| !v.is_base()) {
            ranges[v.index()] = self.parents[v.index()]
                .iter()
                .filter_map(|p| ranges[p.index()])
                .fold(None, |acc: Option<PathRange>, r| {
                    let (s, l) = (r.shortest + 1, r.longest + 1);
                    Some(match acc {
                        None => PathRange {
                            shortest: s,
                            longest: l,
                        },
                        Some(a) => PathRange {
                            shortest: a.shortest.min(s),
                            longest: a.longest.max(l),
                        },
                    })
                });
        }
        Ok(ranges)
    }

    /// Shortest and longest directed path length from the base station to `v`.
    pub fn path_length_range(&self, v: NodeId) -> Result<PathRange, DagError> {
        self.path_ranges()?[v.index()].ok_or(DagError::Unreachable(v))
    }

    /// Longest base -> node path over all nodes.
    pub fn max_path_len(&self) -> Result<u32, DagError> {
        Ok(self
            .path_ranges()?
            .into_iter()
            .flatten()
            .map(|r| r.longest)
            .max()
            .unwrap_or(0))
    }

    /// Largest `longest - shortest` over all nodes.
    pub fn max_slack(&self) -> Result<u32, DagError> {
        Ok(self
            .path_ranges()?
            .into_iter()
            .flatten()
            .map(PathRange::slack)
            .max()
            .unwrap_or(0))
    }

    /// Membership mask of `v` and everything reachable from it along child links.
    pub fn descendants(&self, v: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![v];
        seen[v.index()] = true;
        while let Some(u) = stack.pop() {
            for &c in &self.children[u.index()] {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Checks every structural invariant for the DAG's kind against `graph`.
    pub fn validate(&self, graph: &ConnectivityGraph) -> Result<(), DagError> {
        if !self.parents[0].is_empty() {
            return Err(DagError::BaseHasParents);
        }
        for (child, parent) in self.edges() {
            if !graph.are_adjacent(child, parent) {
                return Err(DagError::NotAGraphEdge { parent, child });
            }
            if !self.children[parent.index()].contains(&child) {
                return Err(DagError::Inconsistent(child));
            }
        }
        if self.children.iter().map(BTreeSet::len).sum::<usize>() != self.edge_count() {
            return Err(DagError::Inconsistent(NodeId::BASE));
        }
        for v in self.nodes().skip(1) {
            if self.parents(v).is_empty() {
                return Err(DagError::Orphan(v));
            }
        }
        let ranges = self.path_ranges()?;
        for v in self.nodes() {
            let r = ranges[v.index()].ok_or(DagError::Unreachable(v))?;
            if r.shortest != self.depth(v) && self.kind != DagKind::Spt {
                return Err(DagError::NotShortest {
                    node: v,
                    parent: NodeId::BASE,
                });
            }
            match self.kind {
                DagKind::Spt | DagKind::Spd => {
                    if self.kind == DagKind::Spt && !v.is_base() && self.parents(v).len() != 1 {
                        return Err(DagError::NotATree {
                            node: v,
                            parents: self.parents(v).len(),
                        });
                    }
                    for &p in self.parents(v) {
                        if self.depth(p) + 1 != self.depth(v) {
                            return Err(DagError::NotShortest { node: v, parent: p });
                        }
                    }
                }
                DagKind::Kdag => {
                    if let Some(k) = self.slack_bound {
                        if r.slack() > k {
                            return Err(DagError::PathBound {
                                node: v,
                                shortest: r.shortest,
                                longest: r.longest,
                                k,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The maximal shortest-path DAG: every neighbor one hop closer to the base is a parent.
pub fn build_spd(graph: &ConnectivityGraph) -> SpanningDag {
    let depth: Vec<u32> = graph
        .hop_distances(NodeId::BASE)
        .into_iter()
        .map(|d| d.expect("connectivity graph is connected"))
        .collect();
    let parents = graph
        .nodes()
        .map(|v| {
            graph
                .neighbors(v)
                .iter()
                .copied()
                .filter(|u| depth[u.index()] + 1 == depth[v.index()])
                .collect()
        })
        .collect();
    SpanningDag::from_parents(DagKind::Spd, parents, depth)
}

/// Keeps only the smallest-id parent of every node.
pub fn extract_spt(spd: &SpanningDag) -> Result<SpanningDag, DagError> {
    if spd.kind == DagKind::Kdag {
        return Err(DagError::WrongKind {
            expected: "SPD",
            actual: spd.kind.name(),
        });
    }
    let parents = spd
        .parents
        .iter()
        .map(|ps| ps.iter().next().copied().into_iter().collect())
        .collect();
    Ok(SpanningDag::from_parents(
        DagKind::Spt,
        parents,
        spd.depth.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> ConnectivityGraph {
        ConnectivityGraph::from_positions(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 1.0).unwrap()
    }

    /// base(0)-A(1), base-C(3), A-B(2), C-B; B opposite the base.
    fn four_cycle() -> ConnectivityGraph {
        ConnectivityGraph::from_positions(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 1.0)
            .unwrap()
    }

    #[test]
    fn spd_of_path() {
        let spd = build_spd(&path_graph());
        assert_eq!(
            spd.parents(NodeId(1)).iter().copied().collect::<Vec<_>>(),
            vec![NodeId(0)]
        );
        assert_eq!(
            spd.parents(NodeId(2)).iter().copied().collect::<Vec<_>>(),
            vec![NodeId(1)]
        );
        assert_eq!(spd.depths(), &[0, 1, 2]);
        spd.validate(&path_graph()).unwrap();
    }

    #[test]
    fn spd_of_four_cycle_has_two_parents() {
        let g = four_cycle();
        let spd = build_spd(&g);
        assert_eq!(spd.depth(NodeId(2)), 2);
        assert_eq!(
            spd.parents(NodeId(2)).iter().copied().collect::<Vec<_>>(),
            vec![NodeId(1), NodeId(3)]
        );
        spd.validate(&g).unwrap();
    }

    #[test]
    fn spt_keeps_smallest_parent() {
        let g = four_cycle();
        let spt = extract_spt(&build_spd(&g)).unwrap();
        assert_eq!(
            spt.parents(NodeId(2)).iter().copied().collect::<Vec<_>>(),
            vec![NodeId(1)]
        );
        assert_eq!(spt.edge_count(), g.n());
        spt.validate(&g).unwrap();
        assert_eq!(extract_spt(&spt).unwrap().parents, spt.parents);
    }

    #[test]
    fn spt_of_path_is_the_path() {
        let spd = build_spd(&path_graph());
        let spt = extract_spt(&spd).unwrap();
        assert_eq!(spt.parents, spd.parents);
    }

    #[test]
    fn spd_path_ranges_are_degenerate() {
        let g = four_cycle();
        let spd = build_spd(&g);
        for v in spd.nodes() {
            let r = spd.path_length_range(v).unwrap();
            assert_eq!((r.shortest, r.longest), (spd.depth(v), spd.depth(v)));
        }
    }

    #[test]
    fn sibling_edge_lengthens_longest_path_by_one() {
        // base(0) - 1 - 3, base - 2 - 4, 3 and 4 are same-depth neighbors.
        let g = ConnectivityGraph::from_positions(
            vec![
                [0.0, 0.0],
                [-0.55, 0.8],
                [0.5, 0.8],
                [-0.5, 1.75],
                [0.4, 1.75],
            ],
            1.0,
        )
        .unwrap();
        let mut dag = build_spd(&g);
        assert!(dag.add_edge(NodeId(4), NodeId(3)));
        let dag = dag.into_kdag(1);
        assert_eq!(
            dag.path_length_range(NodeId(3)).unwrap(),
            PathRange {
                shortest: 2,
                longest: 3
            }
        );
        dag.validate(&g).unwrap();
        assert_eq!(dag.max_path_len().unwrap(), 3);
    }

    #[test]
    fn cycle_is_detected() {
        let g = four_cycle();
        let mut dag = build_spd(&g);
        dag.add_edge(NodeId(2), NodeId(1));
        assert!(matches!(dag.topological_order(), Err(DagError::Cycle(_))));
        assert!(dag.validate(&g).is_err());
    }

    #[test]
    fn kdag_cannot_be_reduced_to_spt() {
        let dag = build_spd(&path_graph()).into_kdag(0);
        assert!(matches!(extract_spt(&dag), Err(DagError::WrongKind { .. })));
    }
}
