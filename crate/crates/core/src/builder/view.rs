//! The base station's global view of the DAG under construction and the
//! admission test for a single sibling edge.

use crate::dag::SpanningDag;
use crate::graph::{ConnectivityGraph, NodeId};
use crate::load::{compute_load_oracle, LoadMap};

pub(crate) struct View<'g> {
    pub graph: &'g ConnectivityGraph,
    pub dag: SpanningDag,
    pub k: u32,
    /// Oracle loads of `dag`.
    pub loads: LoadMap<f64>,
}

/// Sum of squared base-child loads. With the total fixed at `n`, a smaller
/// value means a larger balance factor.
pub(crate) fn base_sum_sq(loads: &LoadMap<f64>) -> f64 {
    loads.base_child_loads().values().map(|l| l * l).sum()
}

impl<'g> View<'g> {
    pub fn new(graph: &'g ConnectivityGraph, dag: SpanningDag, k: u32) -> Self {
        let loads = compute_load_oracle(&dag).expect("input DAG is acyclic");
        View {
            graph,
            dag,
            k,
            loads,
        }
    }

    /// Structural part of the test: a same-depth connectivity edge below the
    /// base-station children that is not yet in the DAG and closes no cycle.
    pub fn is_sibling_pair(&self, parent: NodeId, child: NodeId) -> bool {
        let d = self.dag.depth(child);
        d >= 2
            && self.dag.depth(parent) == d
            && self.graph.are_adjacent(parent, child)
            && !self.dag.parents(child).contains(&parent)
    }

    /// Tentatively adds `parent -> child` and returns the new loads if the
    /// edge keeps the DAG acyclic, keeps every node within `k` hops of slack,
    /// leaves every node it loads more (the light child included) lighter than
    /// the heavy child was, and strictly improves the base-station balance.
    pub fn admit(
        &self,
        parent: NodeId,
        child: NodeId,
        heavy: NodeId,
        light: NodeId,
    ) -> Option<(SpanningDag, LoadMap<f64>)> {
        if !self.is_sibling_pair(parent, child) || self.dag.descendants(child)[parent.index()] {
            return None;
        }
        let mut tentative = self.dag.clone();
        tentative.add_edge(parent, child);
        let ranges = tentative.path_ranges().ok()?;
        if ranges.iter().flatten().any(|r| r.slack() > self.k) {
            return None;
        }
        let loads: LoadMap<f64> = compute_load_oracle(&tentative).ok()?;
        let cap = *self.loads.load(heavy);
        let raised_too_far = self
            .graph
            .sensors()
            .any(|u| loads.load(u) > self.loads.load(u) && !(*loads.load(u) < cap));
        if raised_too_far || !(*loads.load(light) < cap) {
            return None;
        }
        let before = base_sum_sq(&self.loads);
        if !(base_sum_sq(&loads) < before * (1.0 - 1e-12)) {
            return None;
        }
        Some((tentative, loads))
    }

    pub fn commit(&mut self, dag: SpanningDag, loads: LoadMap<f64>) {
        self.dag = dag;
        self.loads = loads;
    }
}
