//! Bottom-up load calculation and the base-station balance factor.
//!
//! Every sensor generates one unit per time unit; a node's load is its own
//! unit plus everything its children push to it, and it splits that load
//! evenly over all of its parents.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dag::SpanningDag;
use crate::error::{DagError, LoadError, ProtocolError};
use crate::graph::{ConnectivityGraph, NodeId};
use crate::scalar::Scalar;
use crate::sim::{run, Context, KernelConfig, Message, Protocol, Trace};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadMap<S> {
    load: Vec<S>,
    edge_share: BTreeMap<(NodeId, NodeId), S>,
    base_child_loads: BTreeMap<NodeId, S>,
}

impl<S: Scalar> LoadMap<S> {
    pub fn load(&self, v: NodeId) -> &S {
        &self.load[v.index()]
    }

    pub fn loads(&self) -> &[S] {
        &self.load
    }

    /// Load flowing over the DAG edge `child -> parent`.
    pub fn edge_share(&self, child: NodeId, parent: NodeId) -> Option<&S> {
        self.edge_share.get(&(child, parent))
    }

    pub fn edge_shares(&self) -> &BTreeMap<(NodeId, NodeId), S> {
        &self.edge_share
    }

    /// Load each base-station child delivers to the base station.
    pub fn base_child_loads(&self) -> &BTreeMap<NodeId, S> {
        &self.base_child_loads
    }

    /// Total load reaching the base station; equals `n` by conservation.
    pub fn delivered(&self) -> S {
        self.base_child_loads
            .values()
            .cloned()
            .fold(S::zero(), |a, b| a + b)
    }

    pub fn theta(&self) -> Result<BalanceFactor<S>, LoadError> {
        let loads: Vec<S> = self.base_child_loads.values().cloned().collect();
        balance_factor(&loads)
    }

    pub fn to_f64(&self) -> LoadMap<f64> {
        LoadMap {
            load: self.load.iter().map(Scalar::to_f64).collect(),
            edge_share: self
                .edge_share
                .iter()
                .map(|(&k, v)| (k, v.to_f64()))
                .collect(),
            base_child_loads: self
                .base_child_loads
                .iter()
                .map(|(&k, v)| (k, v.to_f64()))
                .collect(),
        }
    }
}

impl LoadMap<f64> {
    /// Largest per-node absolute load difference.
    pub fn max_abs_diff(&self, other: &LoadMap<f64>) -> f64 {
        assert_eq!(self.load.len(), other.load.len());
        self.load
            .iter()
            .zip(&other.load)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Chebyshev-sum balance factor of the base-station children's loads.
#[derive(Clone, Debug, PartialEq, PartialOrd, Serialize)]
pub struct BalanceFactor<S> {
    pub theta: S,
}

/// `(sum ld)^2 / (m * sum ld^2)`; 1 when all `m` loads are equal.
pub fn balance_factor<S: Scalar>(loads: &[S]) -> Result<BalanceFactor<S>, LoadError> {
    if loads.is_empty() {
        return Err(LoadError::EmptyChildren);
    }
    let sum = loads.iter().cloned().fold(S::zero(), |a, b| a + b);
    let sum_sq = loads
        .iter()
        .cloned()
        .fold(S::zero(), |a, b| a + b.clone() * b);
    let m = S::from_count(loads.len());
    Ok(BalanceFactor {
        theta: sum.clone() * sum / (m * sum_sq),
    })
}

/// Centralized evaluation of the load recurrence in reverse topological order.
pub fn compute_load_oracle<S: Scalar>(dag: &SpanningDag) -> Result<LoadMap<S>, DagError> {
    let order = dag.topological_order()?;
    let mut load = vec![S::zero(); dag.node_count()];
    let mut edge_share = BTreeMap::new();
    let mut base_child_loads = BTreeMap::new();
    for &v in order.iter().rev() {
        let inflow = dag
            .children(v)
            .iter()
            .map(|&c| {
                edge_share
                    .get(&(c, v))
                    .cloned()
                    .expect("children are evaluated first")
            })
            .fold(S::zero(), |a: S, b| a + b);
        if v.is_base() {
            for &c in dag.children(v) {
                base_child_loads.insert(c, edge_share[&(c, v)].clone());
            }
            continue;
        }
        let total = S::one() + inflow;
        let share = total.clone() / S::from_count(dag.parents(v).len());
        for &p in dag.parents(v) {
            edge_share.insert((v, p), share.clone());
        }
        load[v.index()] = total;
    }
    Ok(LoadMap {
        load,
        edge_share,
        base_child_loads,
    })
}

struct LoadNode {
    parents: Vec<NodeId>,
    expected: usize,
    inflow: BTreeMap<NodeId, f64>,
    load: Option<f64>,
}

struct LoadCalc {
    nodes: Vec<LoadNode>,
}

impl LoadCalc {
    fn finish(&mut self, node: NodeId, ctx: &mut Context<'_, Message>) {
        let st = &mut self.nodes[node.index()];
        if node.is_base() {
            st.load = Some(0.0);
            return;
        }
        let total = 1.0 + st.inflow.values().sum::<f64>();
        st.load = Some(total);
        let share = total / st.parents.len() as f64;
        for &p in &st.parents {
            ctx.send(p, Message::Lc { node, load: share });
        }
    }
}

impl Protocol for LoadCalc {
    type Msg = Message;

    fn on_start(&mut self, node: NodeId, ctx: &mut Context<'_, Message>) {
        if self.nodes[node.index()].expected == 0 {
            self.finish(node, ctx);
        }
    }

    fn on_message(
        &mut self,
        node: NodeId,
        from: NodeId,
        msg: Message,
        ctx: &mut Context<'_, Message>,
    ) {
        let Message::Lc { load, .. } = msg else {
            return;
        };
        let st = &mut self.nodes[node.index()];
        st.inflow.insert(from, load);
        if st.inflow.len() == st.expected {
            self.finish(node, ctx);
        }
    }
}

/// Distributed load calculation over `dag` (LC messages, leaves first).
pub fn run_load_calc(
    graph: &ConnectivityGraph,
    dag: &SpanningDag,
    config: &KernelConfig,
) -> Result<(LoadMap<f64>, Trace), ProtocolError> {
    let nodes = dag
        .nodes()
        .map(|v| LoadNode {
            parents: dag.parents(v).iter().copied().collect(),
            expected: dag.children(v).len(),
            inflow: BTreeMap::new(),
            load: None,
        })
        .collect();
    let out = run(graph, LoadCalc { nodes }, config)?;
    let mut load = Vec::with_capacity(dag.node_count());
    let mut edge_share = BTreeMap::new();
    let mut base_child_loads = BTreeMap::new();
    for (i, st) in out.protocol.nodes.into_iter().enumerate() {
        let v = NodeId::from(i);
        load.push(
            st.load
                .ok_or_else(|| ProtocolError::Incomplete(format!("{v} never computed its load")))?,
        );
        for (c, share) in st.inflow {
            edge_share.insert((c, v), share);
            if v.is_base() {
                base_child_loads.insert(c, share);
            }
        }
    }
    Ok((
        LoadMap {
            load,
            edge_share,
            base_child_loads,
        },
        out.trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::build_spd;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        <BigRational as Scalar>::from_ratio(n, d)
    }

    #[test]
    fn theta_examples() {
        assert_eq!(balance_factor(&[5.0, 5.0, 5.0]).unwrap().theta, 1.0);
        assert_eq!(balance_factor(&[q(3, 1), q(1, 1)]).unwrap().theta, q(4, 5));
        assert_eq!(balance_factor(&[7.25]).unwrap().theta, 1.0);
        assert_eq!(
            balance_factor::<f64>(&[]).unwrap_err(),
            LoadError::EmptyChildren
        );
    }

    #[test]
    fn chain_loads() {
        let g = ConnectivityGraph::from_positions(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]],
            1.0,
        )
        .unwrap();
        let loads: LoadMap<BigRational> = compute_load_oracle(&build_spd(&g)).unwrap();
        assert_eq!(loads.loads(), &[q(0, 1), q(3, 1), q(2, 1), q(1, 1)]);
        assert_eq!(loads.delivered(), q(3, 1));
    }

    #[test]
    fn diamond_splits_evenly() {
        // base - 1, base - 2, 1 - 3, 2 - 3: node 3 has two parents.
        let g = ConnectivityGraph::from_positions(
            vec![[0.0, 0.0], [-0.6, 0.7], [0.6, 0.7], [0.0, 1.4]],
            1.0,
        )
        .unwrap();
        let loads: LoadMap<BigRational> = compute_load_oracle(&build_spd(&g)).unwrap();
        assert_eq!(loads.edge_share(NodeId(3), NodeId(1)), Some(&q(1, 2)));
        assert_eq!(loads.edge_share(NodeId(3), NodeId(2)), Some(&q(1, 2)));
        assert_eq!(loads.load(NodeId(1)), &q(3, 2));
        assert_eq!(loads.theta().unwrap().theta, q(1, 1));
    }

    #[test]
    fn distributed_matches_oracle() {
        let g = crate::graph::generate_instance(30, 150.0, 50.0, 17).unwrap();
        let spd = build_spd(&g);
        let oracle: LoadMap<f64> = compute_load_oracle(&spd).unwrap();
        for seed in 0..3 {
            let (dist, trace) = run_load_calc(&g, &spd, &KernelConfig::with_seed(seed)).unwrap();
            assert!(dist.max_abs_diff(&oracle) <= 1e-9);
            assert!((dist.delivered() - 30.0).abs() <= 1e-9);
            assert_eq!(trace.count("LC"), spd.edge_count());
        }
    }
}
