//! One round of sibling-edge search on the kernel.
//!
//! The base floods SF over the heavy child's DAG and arms T1. Nodes of the
//! heavy side that border the light side at equal depth report SF_C with the
//! load they would divert. When T1 fires the base picks the best admissible
//! candidate and sends it SF_S. The candidate adopts its light-side sibling as
//! a new parent, then the cascade continues with ADD_SIBLING: sideways to a
//! same-depth sibling while the hop budget and the remaining load allow it,
//! otherwise one level down. The node that can go no further answers SF_ACK,
//! and the base floods RECALC.

use serde::Serialize;

use super::view::View;
use super::{diverted_share, LdcRule, SiblingEdge};
use crate::dag::SpanningDag;
use crate::graph::NodeId;
use crate::load::LoadMap;
use crate::naming::{next_hop, NameTable};
use crate::sim::{Context, Message, Protocol, Tick, TimerHandle};

const T1: u32 = 1;

/// What the cascade did, in order.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum CascadeStep {
    AddEdge { from: NodeId, to: NodeId },
    ToSibling { from: NodeId, to: NodeId },
    ToChild { from: NodeId, to: NodeId },
    Ack { node: NodeId },
}

pub(crate) struct SearchRound<'a, 'g> {
    pub view: &'a mut View<'g>,
    pub spt: &'a SpanningDag,
    pub names: &'a NameTable,
    pub round: u32,
    pub heavy: NodeId,
    pub light: NodeId,
    pub ld_bl: f64,
    pub t1: Tick,
    pub rule: LdcRule,
    pub energy: Option<&'a [f64]>,
    /// Loads as reported by the last LC pass; what nodes know locally.
    pub known: &'a LoadMap<f64>,
    pub heavy_side: Vec<bool>,
    pub light_side_start: Vec<bool>,
    pub light_side: Vec<bool>,

    pub sf_seen: Vec<bool>,
    pub recalc_seen: Vec<bool>,
    pub candidates: Vec<(NodeId, f64)>,
    pub late_candidates: usize,
    pub t1_fired: bool,
    pub selected: Option<NodeId>,
    pub edges: Vec<SiblingEdge>,
    pub cascade: Vec<CascadeStep>,
    pub ack_from: Option<NodeId>,
}

impl<'a, 'g> SearchRound<'a, 'g> {
    fn spt_parent(&self, v: NodeId) -> NodeId {
        *self
            .spt
            .parents(v)
            .iter()
            .next()
            .expect("sensor has an SPT parent")
    }

    fn ldc(&self, v: NodeId) -> f64 {
        diverted_share(
            *self.known.load(v),
            self.view.dag.parents(v).len(),
            self.rule,
        )
    }

    /// Light-side neighbors `v` could adopt as a parent across the boundary.
    fn cross_partners(&self, v: NodeId) -> Vec<NodeId> {
        if !self.heavy_side[v.index()] || self.light_side_start[v.index()] {
            return Vec::new();
        }
        self.view
            .graph
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&t| self.light_side_start[t.index()])
            .filter(|&t| self.view.is_sibling_pair(t, v))
            .collect()
    }

    fn first_admissible_partner(&self, v: NodeId) -> Option<NodeId> {
        self.cross_partners(v)
            .into_iter()
            .find(|&t| self.view.admit(t, v, self.heavy, self.light).is_some())
    }

    fn energy_of(&self, v: NodeId) -> f64 {
        self.energy.map_or(0.0, |e| e[v.index()])
    }

    /// Tries to add `parent -> child`; logs and returns the diverted load.
    fn add(&mut self, parent: NodeId, child: NodeId) -> Option<f64> {
        let ldc = self.ldc(child);
        let (dag, loads) = self.view.admit(parent, child, self.heavy, self.light)?;
        self.view.commit(dag, loads);
        self.light_side = self.view.dag.descendants(self.light);
        self.edges.push(SiblingEdge {
            round: self.round,
            from: child,
            to: parent,
            level: self.view.dag.depth(child),
            ldc,
        });
        self.cascade.push(CascadeStep::AddEdge {
            from: child,
            to: parent,
        });
        Some(ldc)
    }

    fn continue_cascade(
        &mut self,
        node: NodeId,
        ld_re: f64,
        sl: u32,
        just_added: bool,
        ctx: &mut Context<'_, Message>,
    ) {
        let budget_left = sl < self.view.k && ld_re > 0.0;
        if budget_left && self.light_side[node.index()] {
            let depth = self.view.dag.depth(node);
            let mut targets: Vec<(NodeId, f64)> = self
                .view
                .graph
                .neighbors(node)
                .iter()
                .copied()
                .filter(|&q| {
                    self.view.dag.depth(q) == depth
                        && self.heavy_side[q.index()]
                        && !self.light_side[q.index()]
                })
                .map(|q| (q, self.ldc(q)))
                .filter(|&(_, ldc)| ldc <= ld_re)
                .collect();
            targets.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            if let Some(&(q, _)) = targets
                .iter()
                .find(|(q, _)| self.view.admit(node, *q, self.heavy, self.light).is_some())
            {
                self.cascade
                    .push(CascadeStep::ToSibling { from: node, to: q });
                ctx.send(q, Message::AddSibling { ld_re, sl });
                return;
            }
        }
        let depth = self.view.dag.depth(node);
        let next_level = self
            .view
            .dag
            .children(node)
            .iter()
            .copied()
            .filter(|&c| self.view.dag.depth(c) == depth + 1)
            .fold(None, |best: Option<NodeId>, c| match best {
                Some(b) if self.known.load(b) >= self.known.load(c) => Some(b),
                _ => Some(c),
            });
        if let Some(child) = next_level.filter(|_| just_added || budget_left) {
            self.cascade.push(CascadeStep::ToChild {
                from: node,
                to: child,
            });
            ctx.send(child, Message::AddSibling { ld_re, sl });
            return;
        }
        self.cascade.push(CascadeStep::Ack { node });
        let ack = Message::SfAck {
            origin: node,
            heavy: self.heavy,
            light: self.light,
            ld_re,
            sl,
        };
        ctx.send(self.spt_parent(node), ack);
    }

    fn on_t1(&mut self, ctx: &mut Context<'_, Message>) {
        self.t1_fired = true;
        let mut ranked = self.candidates.clone();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(self.energy_of(b.0).total_cmp(&self.energy_of(a.0)))
                .then(a.0.cmp(&b.0))
        });
        let Some(&(target, _)) = ranked
            .iter()
            .find(|(v, _)| self.first_admissible_partner(*v).is_some())
        else {
            return;
        };
        self.selected = Some(target);
        let target_id = self.names.id(target);
        let hop =
            next_hop(self.names, self.spt, NodeId::BASE, target_id).expect("target is a sensor");
        let msg = Message::SfS {
            target,
            target_id,
            heavy: self.heavy,
            light: self.light,
            ld_re: self.ld_bl,
            sl: 0,
        };
        ctx.send(hop, msg);
    }
}

impl Protocol for SearchRound<'_, '_> {
    type Msg = Message;

    fn on_start(&mut self, node: NodeId, ctx: &mut Context<'_, Message>) {
        if node.is_base() {
            ctx.send(
                self.heavy,
                Message::Sf {
                    heavy: self.heavy,
                    light: self.light,
                    ld_bl: self.ld_bl,
                },
            );
            ctx.set_timer(self.t1, T1);
        }
    }

    fn on_timer(&mut self, node: NodeId, timer: TimerHandle, ctx: &mut Context<'_, Message>) {
        if node.is_base() && timer.tag == T1 {
            self.on_t1(ctx);
        }
    }

    fn on_message(
        &mut self,
        node: NodeId,
        from: NodeId,
        msg: Message,
        ctx: &mut Context<'_, Message>,
    ) {
        match msg {
            Message::Sf {
                heavy,
                light,
                ld_bl,
            } => {
                if std::mem::replace(&mut self.sf_seen[node.index()], true) {
                    return;
                }
                for &c in self.view.dag.children(node) {
                    ctx.send(
                        c,
                        Message::Sf {
                            heavy,
                            light,
                            ld_bl,
                        },
                    );
                }
                if !self.cross_partners(node).is_empty() {
                    let ldc = self.ldc(node);
                    if ldc < ld_bl {
                        ctx.send(
                            self.spt_parent(node),
                            Message::SfC {
                                candidate: node,
                                heavy,
                                light,
                                ldc,
                            },
                        );
                    }
                }
            }
            Message::SfC { candidate, ldc, .. } if node.is_base() => {
                if self.t1_fired {
                    self.late_candidates += 1;
                } else {
                    self.candidates.push((candidate, ldc));
                }
            }
            msg @ (Message::SfC { .. } | Message::SfAck { .. }) if !node.is_base() => {
                ctx.send(self.spt_parent(node), msg);
            }
            Message::SfS {
                target,
                target_id,
                ld_re,
                sl,
                ..
            } => {
                if target != node {
                    let hop = next_hop(self.names, self.spt, node, target_id)
                        .expect("route toward target");
                    ctx.send(hop, msg);
                    return;
                }
                match self
                    .first_admissible_partner(node)
                    .and_then(|t| self.add(t, node))
                {
                    Some(ldc) => self.continue_cascade(node, ld_re - ldc, sl + 1, true, ctx),
                    None => self.continue_cascade(node, ld_re, sl, false, ctx),
                }
            }
            Message::AddSibling { ld_re, sl } => {
                let from_sibling = self.view.dag.depth(from) == self.view.dag.depth(node);
                match from_sibling.then(|| self.add(from, node)).flatten() {
                    Some(ldc) => self.continue_cascade(node, ld_re - ldc, sl + 1, true, ctx),
                    None => self.continue_cascade(node, ld_re, sl, false, ctx),
                }
            }
            Message::SfAck { origin, .. } => {
                self.ack_from = Some(origin);
                self.recalc_seen[0] = true;
                for &c in self.view.dag.children(node) {
                    ctx.send(c, Message::Recalc);
                }
            }
            Message::Recalc if !std::mem::replace(&mut self.recalc_seen[node.index()], true) => {
                for &c in self.view.dag.children(node) {
                    ctx.send(c, Message::Recalc);
                }
            }
            _ => {}
        }
    }
}
