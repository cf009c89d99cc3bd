use serde::Serialize;

use super::Payload;
use crate::graph::NodeId;

/// Every message exchanged by the construction protocols.
///
/// `SfC` and `SfAck` are relayed hop by hop toward the base station over SPT
/// parent links; `SfS` is relayed away from it by naming-ID ranges. All other
/// kinds are strictly single-hop.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    /// Hop-count relaxation used to build the SPD.
    Depth {
        hops: u32,
    },
    CalculateSubtreeSize,
    SubtreeSize {
        node: NodeId,
        size: u32,
    },
    AssignId {
        node: NodeId,
        min_id: u32,
        max_id: u32,
    },
    /// Load flowing from `node` to the receiving parent.
    Lc {
        node: NodeId,
        load: f64,
    },
    Sf {
        heavy: NodeId,
        light: NodeId,
        ld_bl: f64,
    },
    #[serde(rename = "SF_C")]
    SfC {
        candidate: NodeId,
        heavy: NodeId,
        light: NodeId,
        ldc: f64,
    },
    #[serde(rename = "SF_S")]
    SfS {
        target: NodeId,
        target_id: u32,
        heavy: NodeId,
        light: NodeId,
        ld_re: f64,
        sl: u32,
    },
    AddSibling {
        ld_re: f64,
        sl: u32,
    },
    SfAck {
        origin: NodeId,
        heavy: NodeId,
        light: NodeId,
        ld_re: f64,
        sl: u32,
    },
    Recalc,
}

impl Payload for Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Depth { .. } => "DEPTH",
            Message::CalculateSubtreeSize => "CALCULATE_SUBTREE_SIZE",
            Message::SubtreeSize { .. } => "SUBTREE_SIZE",
            Message::AssignId { .. } => "ASSIGN_ID",
            Message::Lc { .. } => "LC",
            Message::Sf { .. } => "SF",
            Message::SfC { .. } => "SF_C",
            Message::SfS { .. } => "SF_S",
            Message::AddSibling { .. } => "ADD_SIBLING",
            Message::SfAck { .. } => "SF_ACK",
            Message::Recalc => "RECALC",
        }
    }
}
