//! Three-phase naming over the SPT and ID-range point-to-point routing.
//!
//! Phase one floods CALCULATE_SUBTREE_SIZE down the tree, phase two
//! aggregates SUBTREE_SIZE from the leaves up, phase three hands each child a
//! contiguous ID block with ASSIGN_ID: a node keeps the first ID of its block
//! and splits the rest among its children in ascending NodeId order. The
//! resulting ID is the node's rank in a preorder walk of the SPT.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dag::{DagKind, SpanningDag};
use crate::error::{DagError, ProtocolError};
use crate::graph::{ConnectivityGraph, NodeId};
use crate::sim::{run, Context, KernelConfig, Message, Protocol, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NameTable {
    id: Vec<u32>,
    subtree_size: Vec<u32>,
    id_range: Vec<(u32, u32)>,
    owner: Vec<NodeId>,
}

impl NameTable {
    /// ID of `v`; the base station is 0, sensors get `1..=n`.
    pub fn id(&self, v: NodeId) -> u32 {
        self.id[v.index()]
    }

    /// Size of `v`'s SPT subtree. The base station counts as 0.
    pub fn subtree_size(&self, v: NodeId) -> u32 {
        self.subtree_size[v.index()]
    }

    /// Inclusive ID range of `v`'s subtree. For the base station this is `(0, n)`.
    pub fn id_range(&self, v: NodeId) -> (u32, u32) {
        self.id_range[v.index()]
    }

    pub fn owner(&self, id: u32) -> Option<NodeId> {
        self.owner.get(id as usize).copied()
    }

    pub fn ids(&self) -> &[u32] {
        &self.id
    }

    fn contains(&self, v: NodeId, id: u32) -> bool {
        let (lo, hi) = self.id_range(v);
        lo <= id && id <= hi
    }
}

/// Next hop from `at` toward the node named `target_id`: the child whose range
/// holds the ID, otherwise the SPT parent. `None` once `at` owns the ID.
pub fn next_hop(
    table: &NameTable,
    spt: &SpanningDag,
    at: NodeId,
    target_id: u32,
) -> Option<NodeId> {
    if table.id(at) == target_id {
        return None;
    }
    spt.children(at)
        .iter()
        .copied()
        .find(|&c| table.contains(c, target_id))
        .or_else(|| spt.parents(at).iter().next().copied())
}

/// Hop sequence from `from` to the owner of `target_id`, excluding `from`.
pub fn route_to(table: &NameTable, spt: &SpanningDag, from: NodeId, target_id: u32) -> Vec<NodeId> {
    let mut hops = Vec::new();
    let mut at = from;
    while let Some(next) = next_hop(table, spt, at, target_id) {
        hops.push(next);
        at = next;
        assert!(
            hops.len() <= 2 * spt.node_count(),
            "routing loop toward id {target_id}"
        );
    }
    hops
}

#[derive(Default)]
struct NamingNode {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    reported: BTreeMap<NodeId, u32>,
    size: u32,
    id: Option<u32>,
    range: Option<(u32, u32)>,
}

struct Naming {
    nodes: Vec<NamingNode>,
}

impl Naming {
    fn assign_children(&self, node: NodeId, mut next: u32, ctx: &mut Context<'_, Message>) {
        let st = &self.nodes[node.index()];
        for &c in &st.children {
            let size = st.reported[&c];
            ctx.send(
                c,
                Message::AssignId {
                    node: c,
                    min_id: next,
                    max_id: next + size - 1,
                },
            );
            next += size;
        }
    }
}

impl Protocol for Naming {
    type Msg = Message;

    fn on_start(&mut self, node: NodeId, ctx: &mut Context<'_, Message>) {
        if node.is_base() {
            self.nodes[0].size = 0;
            for &c in &self.nodes[0].children {
                ctx.send(c, Message::CalculateSubtreeSize);
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
        let i = node.index();
        match msg {
            Message::CalculateSubtreeSize => {
                let st = &mut self.nodes[i];
                st.size = 1;
                if st.children.is_empty() {
                    ctx.send(from, Message::SubtreeSize { node, size: 1 });
                } else {
                    for &c in &st.children {
                        ctx.send(c, Message::CalculateSubtreeSize);
                    }
                }
            }
            Message::SubtreeSize { size, .. } => {
                let st = &mut self.nodes[i];
                st.reported.insert(from, size);
                if st.reported.len() < st.children.len() {
                    return;
                }
                if node.is_base() {
                    st.id = Some(0);
                    self.assign_children(node, 1, ctx);
                } else {
                    st.size = 1 + st.reported.values().sum::<u32>();
                    let parent = st.parent.expect("sensor has an SPT parent");
                    ctx.send(
                        parent,
                        Message::SubtreeSize {
                            node,
                            size: st.size,
                        },
                    );
                }
            }
            Message::AssignId { min_id, max_id, .. } => {
                let st = &mut self.nodes[i];
                debug_assert_eq!(max_id - min_id + 1, st.size);
                st.id = Some(min_id);
                st.range = Some((min_id, max_id));
                self.assign_children(node, min_id + 1, ctx);
            }
            _ => {}
        }
    }
}

/// Runs the naming protocol on `spt`.
pub fn run_naming(
    graph: &ConnectivityGraph,
    spt: &SpanningDag,
    config: &KernelConfig,
) -> Result<(NameTable, Trace), ProtocolError> {
    if spt.kind() != DagKind::Spt {
        return Err(DagError::WrongKind {
            expected: "SPT",
            actual: spt.kind().name(),
        }
        .into());
    }
    let nodes = spt
        .nodes()
        .map(|v| NamingNode {
            parent: spt.parents(v).iter().next().copied(),
            children: spt.children(v).iter().copied().collect(),
            ..NamingNode::default()
        })
        .collect();
    let out = run(graph, Naming { nodes }, config)?;
    let n = spt.n() as u32;
    let count = spt.node_count();
    let mut table = NameTable {
        id: vec![0; count],
        subtree_size: vec![0; count],
        id_range: vec![(0, n); count],
        owner: vec![NodeId::BASE; count],
    };
    for (i, st) in out.protocol.nodes.into_iter().enumerate() {
        if i == 0 {
            continue;
        }
        let id = st
            .id
            .ok_or_else(|| ProtocolError::Incomplete(format!("node {i} received no ID")))?;
        table.id[i] = id;
        table.subtree_size[i] = st.size;
        table.id_range[i] = st.range.expect("range assigned with id");
        table.owner[id as usize] = NodeId::from(i);
    }
    Ok((table, out.trace))
}
