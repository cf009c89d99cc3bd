//! Asynchronous hop-count relaxation that builds the SPD on the kernel.
//!
//! The base announces depth 0. A node hearing `d` from a neighbor adopts
//! `d + 1` if it improves its depth (resetting its parents and re-announcing),
//! or adds the sender as another parent if it ties. At quiescence every node
//! holds its BFS depth and all neighbors one hop closer: the maximal SPD.

use std::collections::BTreeSet;

use super::{run, Context, KernelConfig, Message, Protocol, Trace};
use crate::dag::{DagKind, SpanningDag};
use crate::error::ProtocolError;
use crate::graph::{ConnectivityGraph, NodeId};

struct DepthFlood {
    depth: Vec<Option<u32>>,
    parents: Vec<BTreeSet<NodeId>>,
}

impl Protocol for DepthFlood {
    type Msg = Message;

    fn on_start(&mut self, node: NodeId, ctx: &mut Context<'_, Message>) {
        if node.is_base() {
            self.depth[0] = Some(0);
            for &nb in ctx.neighbors() {
                ctx.send(nb, Message::Depth { hops: 0 });
            }
        }
    }

    fn on_message(
        &mut self,
        node: NodeId,
        from: NodeId,
        msg: Message,
        ctx: &mut Context<'_, Message>,
    ) {
        let Message::Depth { hops } = msg else { return };
        if node.is_base() {
            return;
        }
        let offered = hops + 1;
        let i = node.index();
        match self.depth[i] {
            Some(d) if offered > d => {}
            Some(d) if offered == d => {
                self.parents[i].insert(from);
            }
            _ => {
                self.depth[i] = Some(offered);
                self.parents[i] = BTreeSet::from([from]);
                for &nb in ctx.neighbors() {
                    ctx.send(nb, Message::Depth { hops: offered });
                }
            }
        }
    }
}

/// Builds the SPD by message passing. Equivalent to [`crate::build_spd`].
pub fn run_distributed_spd(
    graph: &ConnectivityGraph,
    config: &KernelConfig,
) -> Result<(SpanningDag, Trace), ProtocolError> {
    let count = graph.node_count();
    let proto = DepthFlood {
        depth: vec![None; count],
        parents: vec![BTreeSet::new(); count],
    };
    let out = run(graph, proto, config)?;
    let DepthFlood { depth, parents } = out.protocol;
    let depth = depth
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            d.ok_or_else(|| ProtocolError::Incomplete(format!("node {i} never learned its depth")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        SpanningDag::from_parents(DagKind::Spd, parents, depth),
        out.trace,
    ))
}
