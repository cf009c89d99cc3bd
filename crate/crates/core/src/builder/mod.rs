//! Sibling-edge insertion that turns the SPD into a k-DAG.
//!
//! The base station works in rounds. Each round pairs its heaviest eligible
//! child with the lightest child adjacent to it and tries to move half of
//! their load difference across the boundary between the two subtrees by
//! giving heavy-side nodes an extra parent at the same depth on the light side.

mod round;
mod view;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use round::CascadeStep;
use round::SearchRound;
use view::View;

use crate::dag::{extract_spt, DagKind, SpanningDag};
use crate::error::{BuilderError, DagError, ProtocolError};
use crate::graph::{derive_seed, ConnectivityGraph, NodeId};
use crate::load::{run_load_calc, LoadMap};
use crate::naming::run_naming;
use crate::scalar::{max_by_partial, Scalar};
use crate::sim::{run, KernelConfig, Trace};

/// One accepted edge: `from` gains `to` as an additional parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiblingEdge {
    pub round: u32,
    pub from: NodeId,
    pub to: NodeId,
    pub level: u32,
    pub ldc: f64,
}

/// Parent count used as the divisor of the diverted load.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdcRule {
    /// Parents after the new edge is in place.
    #[default]
    PostAdd,
    /// Parents before the new edge.
    PreAdd,
}

pub(crate) fn diverted_share<S: Scalar>(load: S, parents: usize, rule: LdcRule) -> S {
    let p = match rule {
        LdcRule::PostAdd => parents + 1,
        LdcRule::PreAdd => parents.max(1),
    };
    load / S::from_count(p)
}

/// Load `v_s` would hand to a new sibling parent on the `light` side.
///
/// Fails with [`BuilderError::NotACandidate`] unless `v_s` lies outside the
/// light child's DAG and has a same-depth neighbor inside it that is not yet
/// one of its parents.
pub fn candidate_diverted_load<S: Scalar>(
    graph: &ConnectivityGraph,
    dag: &SpanningDag,
    loads: &LoadMap<S>,
    v_s: NodeId,
    light: NodeId,
) -> Result<S, BuilderError> {
    let light_side = dag.descendants(light);
    let depth = dag.depth(v_s);
    let qualifies = depth >= 2
        && !light_side[v_s.index()]
        && graph.neighbors(v_s).iter().any(|&t| {
            light_side[t.index()] && dag.depth(t) == depth && !dag.parents(v_s).contains(&t)
        });
    if !qualifies {
        return Err(BuilderError::NotACandidate(v_s));
    }
    Ok(diverted_share(
        loads.load(v_s).clone(),
        dag.parents(v_s).len(),
        LdcRule::PostAdd,
    ))
}

/// Which base-station children may serve as the light partner of a round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightScope {
    /// Only children within radio range of the heavy child.
    #[default]
    Neighbors,
    AllChildren,
}

#[derive(Clone, Debug)]
pub struct BuilderConfig {
    pub k: u32,
    pub kernel: KernelConfig,
    pub ldc_rule: LdcRule,
    pub light_scope: LightScope,
    /// Residual energy per node for candidate tie-breaks; all equal if absent.
    pub residual_energy: Option<Vec<f64>>,
    /// Keep the delivered-message trace of every kernel run.
    pub keep_trace: bool,
}

impl BuilderConfig {
    pub fn new(k: u32) -> Self {
        BuilderConfig {
            k,
            kernel: KernelConfig::default(),
            ldc_rule: LdcRule::default(),
            light_scope: LightScope::default(),
            residual_energy: None,
            keep_trace: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.kernel.seed = seed;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundReport {
    pub round: u32,
    pub heavy: NodeId,
    pub light: NodeId,
    pub ld_bl: f64,
    pub candidates: usize,
    pub selected: Option<NodeId>,
    pub edges_added: usize,
    pub cascade: Vec<CascadeStep>,
    pub theta_after: f64,
}

#[derive(Clone, Debug)]
pub struct KdagBuild {
    pub dag: SpanningDag,
    pub edges: Vec<SiblingEdge>,
    pub rounds: Vec<RoundReport>,
    /// Delivered messages of all kernel runs, in run order. Empty unless
    /// [`BuilderConfig::keep_trace`] is set.
    pub trace: Trace,
}

impl KdagBuild {
    pub fn edge_log_json(&self) -> String {
        serde_json::to_string_pretty(&self.edges).expect("edge log serializes")
    }
}

fn kernel_for(config: &BuilderConfig, stream: u64) -> KernelConfig {
    KernelConfig {
        seed: derive_seed(config.kernel.seed, stream),
        ..config.kernel.clone()
    }
}

fn heaviest<'a>(loads: &LoadMap<f64>, nodes: impl Iterator<Item = &'a NodeId>) -> Option<NodeId> {
    max_by_partial(nodes.map(|&v| (v, *loads.load(v)))).map(|(v, _)| v)
}

/// Grows `spd` into a k-DAG by running search rounds on the kernel until no
/// base-station child remains eligible.
pub fn build_kdag(
    graph: &ConnectivityGraph,
    spd: &SpanningDag,
    config: &BuilderConfig,
) -> Result<KdagBuild, BuilderError> {
    if spd.kind() != DagKind::Spd {
        return Err(DagError::WrongKind {
            expected: "SPD",
            actual: spd.kind().name(),
        }
        .into());
    }
    let k = config.k;
    let mut view = View::new(graph, spd.clone().into_kdag(k), k);
    let mut trace = Trace::default();
    let mut edges = Vec::new();
    let mut rounds = Vec::new();
    if k == 0 || spd.n() < 2 {
        return Ok(KdagBuild {
            dag: view.dag,
            edges,
            rounds,
            trace,
        });
    }

    let spt = extract_spt(spd)?;
    let (names, naming_trace) = run_naming(graph, &spt, &kernel_for(config, 0))?;
    let (mut known, lc_trace) = run_load_calc(graph, &view.dag, &kernel_for(config, 1))?;
    if config.keep_trace {
        trace.records.extend(naming_trace.records);
        trace.records.extend(lc_trace.records);
    }

    let t1 = config.kernel.max_delay
        * (2 * u64::from(graph.diameter()) + u64::from(k.min(spd.n() as u32)))
        + 1;
    let mut eligible: BTreeMap<NodeId, bool> =
        view.dag.base_children().map(|c| (c, true)).collect();
    let mut round = 0u32;
    loop {
        let flagged: Vec<NodeId> = eligible
            .iter()
            .filter(|(_, &f)| f)
            .map(|(&c, _)| c)
            .collect();
        let Some(heavy) = heaviest(&known, flagged.iter()) else {
            break;
        };
        // Lighter neighbors of the heavy child, lightest first; the first one
        // that yields a sibling edge is the round's partner.
        let mut lights: Vec<NodeId> = view
            .dag
            .base_children()
            .filter(|&c| known.load(c) < known.load(heavy))
            .filter(|&c| {
                config.light_scope == LightScope::AllChildren || graph.are_adjacent(c, heavy)
            })
            .collect();
        lights.sort_by(|a, b| known.load(*a).total_cmp(known.load(*b)).then(a.cmp(b)));
        let mut progressed = false;
        for light in lights {
            round += 1;
            let ld_bl = (known.load(heavy) - known.load(light)) / 2.0;
            let heavy_side = view.dag.descendants(heavy);
            let light_side = view.dag.descendants(light);
            let protocol = SearchRound {
                view: &mut view,
                spt: &spt,
                names: &names,
                round,
                heavy,
                light,
                ld_bl,
                t1,
                rule: config.ldc_rule,
                energy: config.residual_energy.as_deref(),
                known: &known,
                heavy_side,
                light_side_start: light_side.clone(),
                light_side,
                sf_seen: vec![false; graph.node_count()],
                recalc_seen: vec![false; graph.node_count()],
                candidates: Vec::new(),
                late_candidates: 0,
                t1_fired: false,
                selected: None,
                edges: Vec::new(),
                cascade: Vec::new(),
                ack_from: None,
            };
            let out = run(graph, protocol, &kernel_for(config, 2 * u64::from(round)))
                .map_err(ProtocolError::from)?;
            let p = out.protocol;
            if p.late_candidates > 0 {
                return Err(ProtocolError::Incomplete(format!(
                    "round {round}: {} candidate(s) arrived after T1",
                    p.late_candidates
                ))
                .into());
            }
            if p.selected.is_some() && p.ack_from.is_none() {
                return Err(ProtocolError::Incomplete(format!(
                    "round {round}: cascade ended without SF_ACK"
                ))
                .into());
            }
            let (candidates, selected, cascade) = (p.candidates.len(), p.selected, p.cascade);
            let added = p.edges;
            if config.keep_trace {
                trace.records.extend(out.trace.records);
            }
            progressed = !added.is_empty();
            if progressed {
                let (fresh, lc_trace) = run_load_calc(
                    graph,
                    &view.dag,
                    &kernel_for(config, 2 * u64::from(round) + 1),
                )?;
                known = fresh;
                if config.keep_trace {
                    trace.records.extend(lc_trace.records);
                }
            }
            rounds.push(RoundReport {
                round,
                heavy,
                light,
                ld_bl,
                candidates,
                selected,
                edges_added: added.len(),
                cascade,
                theta_after: view.loads.theta().map(|b| b.theta).unwrap_or(1.0),
            });
            edges.extend(added);
            if progressed {
                break;
            }
        }
        eligible.insert(heavy, progressed);
    }
    Ok(KdagBuild {
        dag: view.dag,
        edges,
        rounds,
        trace,
    })
}

/// Smallest `k` past which the builder admits nothing new, with its build.
///
/// Builds with an unbounded slack and reads off the largest slack the result
/// actually uses; rebuilding at that `k` reproduces the same DAG.
pub fn saturation(
    graph: &ConnectivityGraph,
    spd: &SpanningDag,
    config: &BuilderConfig,
) -> Result<(u32, KdagBuild), BuilderError> {
    let unbounded = BuilderConfig {
        k: spd.n().max(1) as u32,
        ..config.clone()
    };
    let mut build = build_kdag(graph, spd, &unbounded)?;
    let k_sat = build.dag.max_slack()?;
    build.dag = build.dag.into_kdag(k_sat);
    Ok((k_sat, build))
}
