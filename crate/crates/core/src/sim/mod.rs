//! Deterministic discrete-event message-passing kernel.
//!
//! Every node runs the same [`Protocol`] handlers. Messages travel over single
//! connectivity links with a random delay in `[1, max_delay]` ticks drawn from
//! a seeded RNG; links are FIFO; simultaneous events are ordered by global
//! send sequence. A run is a pure function of `(graph, protocol, seed)`.

pub mod flood;
pub mod message;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Debug;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::KernelError;
use crate::graph::{ConnectivityGraph, NodeId};

pub use message::Message;

pub type Tick = u64;

/// Anything a protocol can put on the wire.
pub trait Payload: Clone + Debug + Serialize {
    fn kind(&self) -> &'static str;
}

#[derive(Clone, Debug)]
pub struct KernelConfig {
    pub max_delay: Tick,
    pub max_events: u64,
    pub seed: u64,
    /// Keep serialized payloads in the trace, not just the message kind.
    pub capture_payloads: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            max_delay: 5,
            max_events: 5_000_000,
            seed: 0,
            capture_payloads: false,
        }
    }
}

impl KernelConfig {
    pub fn with_seed(seed: u64) -> Self {
        KernelConfig {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimerHandle {
    pub owner: NodeId,
    pub expiry: Tick,
    pub tag: u32,
    id: u64,
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub tick: Tick,
    pub kind: &'static str,
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Newline-delimited JSON, one record per line.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub trait Protocol {
    type Msg: Payload;

    fn on_start(&mut self, node: NodeId, ctx: &mut Context<'_, Self::Msg>);

    fn on_message(
        &mut self,
        node: NodeId,
        from: NodeId,
        msg: Self::Msg,
        ctx: &mut Context<'_, Self::Msg>,
    );

    fn on_timer(&mut self, _node: NodeId, _timer: TimerHandle, _ctx: &mut Context<'_, Self::Msg>) {}
}

enum Action<M> {
    Send { dst: NodeId, msg: M },
    SetTimer { handle: TimerHandle },
    Cancel { id: u64 },
}

/// Handler-side view of the kernel for one node.
pub struct Context<'a, M> {
    me: NodeId,
    now: Tick,
    graph: &'a ConnectivityGraph,
    next_timer: &'a mut u64,
    actions: Vec<Action<M>>,
}

impl<'a, M> Context<'a, M> {
    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// One-hop neighbors of this node.
    pub fn neighbors(&self) -> &'a [NodeId] {
        self.graph.neighbors(self.me)
    }

    pub fn send(&mut self, dst: NodeId, msg: M) {
        self.actions.push(Action::Send { dst, msg });
    }

    pub fn set_timer(&mut self, delay: Tick, tag: u32) -> TimerHandle {
        *self.next_timer += 1;
        let handle = TimerHandle {
            owner: self.me,
            expiry: self.now + delay,
            tag,
            id: *self.next_timer,
        };
        self.actions.push(Action::SetTimer { handle });
        handle
    }

    pub fn cancel_timer(&mut self, timer: TimerHandle) {
        self.actions.push(Action::Cancel { id: timer.id });
    }
}

enum Event<M> {
    Deliver { src: NodeId, dst: NodeId, msg: M },
    Timer(TimerHandle),
}

/// Final protocol state plus what happened on the wire.
#[derive(Debug)]
pub struct Outcome<P> {
    pub protocol: P,
    pub trace: Trace,
    pub final_tick: Tick,
    pub events: u64,
}

/// Runs `protocol` on every node of `graph` until no message or timer is pending.
pub fn run<P: Protocol>(
    graph: &ConnectivityGraph,
    mut protocol: P,
    config: &KernelConfig,
) -> Result<Outcome<P>, KernelError> {
    assert!(config.max_delay >= 1, "max_delay must be at least one tick");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut queue: BinaryHeap<Reverse<(Tick, u64)>> = BinaryHeap::new();
    let mut pending: HashMap<u64, Event<P::Msg>> = HashMap::new();
    let mut link_clock: HashMap<(NodeId, NodeId), Tick> = HashMap::new();
    let mut cancelled: HashSet<u64> = HashSet::new();
    let mut timer_seq: HashMap<u64, u64> = HashMap::new();
    let mut seq: u64 = 0;
    let mut next_timer: u64 = 0;
    let mut trace = Trace::default();
    let mut now: Tick = 0;
    let mut events: u64 = 0;

    macro_rules! apply {
        ($me:expr, $actions:expr) => {
            for action in $actions {
                match action {
                    Action::Send { dst, msg } => {
                        if !graph.are_adjacent($me, dst) {
                            return Err(KernelError::UndeliverableMessage {
                                src: $me,
                                dst,
                                kind: msg.kind(),
                            });
                        }
                        let earliest = now + rng.gen_range(1..=config.max_delay);
                        let slot = link_clock.entry(($me, dst)).or_insert(0);
                        let at = earliest.max(*slot);
                        *slot = at;
                        seq += 1;
                        pending.insert(seq, Event::Deliver { src: $me, dst, msg });
                        queue.push(Reverse((at, seq)));
                    }
                    Action::SetTimer { handle } => {
                        seq += 1;
                        timer_seq.insert(handle.id, seq);
                        pending.insert(seq, Event::Timer(handle));
                        queue.push(Reverse((handle.expiry, seq)));
                    }
                    Action::Cancel { id } => {
                        if let Some(s) = timer_seq.remove(&id) {
                            if pending.remove(&s).is_some() {
                                cancelled.insert(s);
                            }
                        }
                    }
                }
            }
        };
    }

    for node in graph.nodes() {
        let mut ctx = Context {
            me: node,
            now,
            graph,
            next_timer: &mut next_timer,
            actions: Vec::new(),
        };
        protocol.on_start(node, &mut ctx);
        let actions = ctx.actions;
        apply!(node, actions);
    }

    while let Some(Reverse((at, s))) = queue.pop() {
        if cancelled.remove(&s) {
            continue;
        }
        let Some(event) = pending.remove(&s) else {
            continue;
        };
        events += 1;
        if events > config.max_events {
            return Err(KernelError::EventCapExceeded {
                cap: config.max_events,
            });
        }
        now = at;
        match event {
            Event::Deliver { src, dst, msg } => {
                trace.records.push(TraceRecord {
                    tick: now,
                    kind: msg.kind(),
                    src,
                    dst,
                    payload: config
                        .capture_payloads
                        .then(|| serde_json::to_value(&msg).unwrap_or_default()),
                });
                let mut ctx = Context {
                    me: dst,
                    now,
                    graph,
                    next_timer: &mut next_timer,
                    actions: Vec::new(),
                };
                protocol.on_message(dst, src, msg, &mut ctx);
                let actions = ctx.actions;
                apply!(dst, actions);
            }
            Event::Timer(handle) => {
                timer_seq.remove(&handle.id);
                let owner = handle.owner;
                let mut ctx = Context {
                    me: owner,
                    now,
                    graph,
                    next_timer: &mut next_timer,
                    actions: Vec::new(),
                };
                protocol.on_timer(owner, handle, &mut ctx);
                let actions = ctx.actions;
                apply!(owner, actions);
            }
        }
    }

    Ok(Outcome {
        protocol,
        trace,
        final_tick: now,
        events,
    })
}
