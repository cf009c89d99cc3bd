//! Round-based data routing over a fixed DAG and first-death lifetime.
//!
//! One round is one hour: every sensor produces `rate` bits, bits move child
//! to parent according to the routing policy, a node pays `e_rx` per bit it
//! receives and `e_tx` per bit it sends (its own bits included). The base
//! station has unlimited energy. Lifetime is the number of rounds completed
//! before some sensor cannot afford the next one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dag::{DagKind, SpanningDag};
use crate::graph::NodeId;
use crate::load::{compute_load_oracle, LoadMap};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyModel<S> {
    /// Joules per received bit.
    pub e_rx: S,
    /// Joules per transmitted bit.
    pub e_tx: S,
    /// Bits generated per sensor per hour.
    pub rate: S,
    /// Initial battery, joules.
    pub e_init: S,
}

impl<S: Scalar> EnergyModel<S> {
    /// 50 nJ/bit receive, 250 nJ/bit transmit, 40 bits/hour, 0.05 J.
    pub fn standard() -> Self {
        EnergyModel {
            e_rx: S::from_ratio(50, 1_000_000_000),
            e_tx: S::from_ratio(250, 1_000_000_000),
            rate: S::from_count(40),
            e_init: S::from_ratio(5, 100),
        }
    }

    pub fn is_valid(&self) -> bool {
        [&self.e_rx, &self.e_tx, &self.rate, &self.e_init]
            .iter()
            .all(|x| **x > S::zero())
    }
}

impl<S: Scalar> Default for EnergyModel<S> {
    fn default() -> Self {
        Self::standard()
    }
}

/// How a node spreads its outgoing bits over its parents.
///
/// `Mpe` and `Pe` are reconstructions: max-min path energy sends everything to
/// the parent whose best path to the base has the largest minimum residual;
/// the proportional policy splits bits by parent residual energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Pe,
    Mpe,
    Even,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Pe => "pe",
            PolicyKind::Mpe => "mpe",
            PolicyKind::Even => "even",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pe" => Ok(PolicyKind::Pe),
            "mpe" => Ok(PolicyKind::Mpe),
            "even" | "even_split" => Ok(PolicyKind::Even),
            other => Err(format!(
                "unknown policy `{other}` (expected pe, mpe or even)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RoutingPolicy {
    pub kind: PolicyKind,
    /// Rounds between recomputations of MPE path metrics.
    pub recompute_period: u32,
}

impl RoutingPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        RoutingPolicy {
            kind,
            recompute_period: 1,
        }
    }
}

impl From<PolicyKind> for RoutingPolicy {
    fn from(kind: PolicyKind) -> Self {
        RoutingPolicy::new(kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeReport<S> {
    /// Fully completed rounds.
    pub lifetime_hours: u64,
    /// Smallest-id sensor that could not afford the round after the last one.
    pub bottleneck: Option<NodeId>,
    /// Residual energy after the last completed round.
    pub residual: Vec<S>,
    /// `(round, residuals)` snapshots, when requested.
    pub trace: Vec<(u64, Vec<S>)>,
}

/// Per-round traffic of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTraffic<S> {
    pub received: Vec<S>,
    pub sent: Vec<S>,
}

struct Router<'a> {
    dag: &'a SpanningDag,
    order: Vec<NodeId>,
    policy: RoutingPolicy,
    mpe_choice: Vec<Option<NodeId>>,
}

impl<'a> Router<'a> {
    fn new(dag: &'a SpanningDag, policy: RoutingPolicy) -> Self {
        let order = dag
            .topological_order()
            .expect("routing over an acyclic DAG");
        Router {
            dag,
            order,
            policy,
            mpe_choice: vec![None; dag.node_count()],
        }
    }

    /// Max-min path residual: each node picks the parent with the best
    /// bottleneck, ties to the smallest id.
    fn refresh_mpe<S: Scalar>(&mut self, residual: &[S]) {
        let mut score: Vec<Option<S>> = vec![None; self.dag.node_count()];
        for &v in &self.order {
            if v.is_base() {
                continue;
            }
            let mut best: Option<(NodeId, Option<S>)> = None;
            for &p in self.dag.parents(v) {
                let s = if p.is_base() {
                    None
                } else {
                    score[p.index()].clone()
                };
                let better = match &best {
                    None => true,
                    Some((_, b)) => match (b, &s) {
                        (None, _) => false,
                        (Some(_), None) => true,
                        (Some(b), Some(s)) => s > b,
                    },
                };
                if better {
                    best = Some((p, s));
                }
            }
            let (parent, path) = best.expect("sensor has a parent");
            self.mpe_choice[v.index()] = Some(parent);
            let own = residual[v.index()].clone();
            score[v.index()] = Some(match path {
                Some(p) if p < own => p,
                _ => own,
            });
        }
    }

    fn route<S: Scalar>(
        &mut self,
        round: u64,
        model: &EnergyModel<S>,
        residual: &[S],
    ) -> RoundTraffic<S> {
        if self.policy.kind == PolicyKind::Mpe
            && round.is_multiple_of(u64::from(self.policy.recompute_period.max(1)))
        {
            self.refresh_mpe(residual);
        }
        let count = self.dag.node_count();
        let mut received = vec![S::zero(); count];
        let mut sent = vec![S::zero(); count];
        for &v in self.order.iter().rev() {
            if v.is_base() {
                continue;
            }
            let out = received[v.index()].clone() + model.rate.clone();
            let parents = self.dag.parents(v);
            match self.policy.kind {
                PolicyKind::Even => {
                    let share = out.clone() / S::from_count(parents.len());
                    for &p in parents {
                        received[p.index()] = received[p.index()].clone() + share.clone();
                    }
                }
                PolicyKind::Mpe => {
                    let p = self.mpe_choice[v.index()].expect("MPE choice computed");
                    received[p.index()] = received[p.index()].clone() + out.clone();
                }
                PolicyKind::Pe => {
                    let weight = |p: NodeId| {
                        if p.is_base() {
                            model.e_init.clone()
                        } else {
                            residual[p.index()].clone()
                        }
                    };
                    let total = parents
                        .iter()
                        .map(|&p| weight(p))
                        .fold(S::zero(), |a, b| a + b);
                    for &p in parents {
                        let share = if total > S::zero() {
                            out.clone() * weight(p) / total.clone()
                        } else {
                            out.clone() / S::from_count(parents.len())
                        };
                        received[p.index()] = received[p.index()].clone() + share;
                    }
                }
            }
            sent[v.index()] = out;
        }
        RoundTraffic { received, sent }
    }
}

/// Energy each node spends for one round of `traffic`. The base station pays nothing.
pub fn round_cost<S: Scalar>(model: &EnergyModel<S>, traffic: &RoundTraffic<S>) -> Vec<S> {
    traffic
        .received
        .iter()
        .zip(&traffic.sent)
        .enumerate()
        .map(|(i, (rx, tx))| {
            if i == 0 {
                S::zero()
            } else {
                model.e_rx.clone() * rx.clone() + model.e_tx.clone() * tx.clone()
            }
        })
        .collect()
}

/// Runs rounds until some sensor cannot pay for the next one.
pub fn simulate_lifetime<S: Scalar>(
    dag: &SpanningDag,
    model: &EnergyModel<S>,
    policy: RoutingPolicy,
) -> LifetimeReport<S> {
    simulate_lifetime_traced(dag, model, policy, None)
}

/// [`simulate_lifetime`], snapshotting residuals every `trace_every` rounds.
pub fn simulate_lifetime_traced<S: Scalar>(
    dag: &SpanningDag,
    model: &EnergyModel<S>,
    policy: RoutingPolicy,
    trace_every: Option<u64>,
) -> LifetimeReport<S> {
    assert!(model.is_valid(), "energy constants must be positive");
    let mut router = Router::new(dag, policy);
    let mut residual = vec![model.e_init.clone(); dag.node_count()];
    let mut trace = Vec::new();
    let slack = S::one() - S::rel_tolerance();
    let mut round = 0u64;
    loop {
        if let Some(every) = trace_every {
            if every > 0 && round.is_multiple_of(every) {
                trace.push((round, residual.clone()));
            }
        }
        let traffic = router.route(round, model, &residual);
        let cost = round_cost(model, &traffic);
        let broke = (1..dag.node_count()).find(|&i| residual[i] < cost[i].clone() * slack.clone());
        if let Some(i) = broke {
            return LifetimeReport {
                lifetime_hours: round,
                bottleneck: Some(NodeId::from(i)),
                residual,
                trace,
            };
        }
        for (r, c) in residual.iter_mut().zip(cost) {
            let left = r.clone() - c;
            *r = if left < S::zero() { S::zero() } else { left };
        }
        round += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowLifetime<S> {
    pub hours: S,
    pub bottleneck: NodeId,
}

/// Closed-form lifetime when every node splits its load evenly:
/// `min_v e_init / (rate * (e_rx * (load - 1) + e_tx * load))`.
pub fn flow_lifetime<S: Scalar>(model: &EnergyModel<S>, loads: &LoadMap<S>) -> FlowLifetime<S> {
    let mut best: Option<(NodeId, S)> = None;
    for (i, load) in loads.loads().iter().enumerate().skip(1) {
        let power = model.rate.clone()
            * (model.e_rx.clone() * (load.clone() - S::one()) + model.e_tx.clone() * load.clone());
        let hours = model.e_init.clone() / power;
        if best.as_ref().is_none_or(|(_, h)| hours < *h) {
            best = Some((NodeId::from(i), hours));
        }
    }
    let (bottleneck, hours) = best.expect("at least one sensor");
    FlowLifetime { hours, bottleneck }
}

/// One simulated run as written by `kdag-sim simulate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub lifetime_hours: u64,
    pub lifetime_flow: f64,
    pub bottleneck_node: Option<NodeId>,
    pub policy: PolicyKind,
    pub dag_kind: DagKind,
    pub theta: f64,
}

pub fn evaluate_run(
    dag: &SpanningDag,
    model: &EnergyModel<f64>,
    policy: RoutingPolicy,
) -> RunResult {
    let loads: LoadMap<f64> = compute_load_oracle(dag).expect("acyclic DAG");
    let report = simulate_lifetime(dag, model, policy);
    RunResult {
        lifetime_hours: report.lifetime_hours,
        lifetime_flow: flow_lifetime(model, &loads).hours,
        bottleneck_node: report.bottleneck,
        policy: policy.kind,
        dag_kind: dag.kind(),
        theta: loads.theta().map(|b| b.theta).unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::build_spd;
    use crate::graph::ConnectivityGraph;
    use crate::Exact;

    fn chain(len: usize) -> SpanningDag {
        let g =
            ConnectivityGraph::from_positions((0..=len).map(|i| [i as f64, 0.0]).collect(), 1.0)
                .unwrap();
        build_spd(&g)
    }

    #[test]
    fn single_hop_lives_5000_hours() {
        for kind in [PolicyKind::Even, PolicyKind::Mpe, PolicyKind::Pe] {
            let r = simulate_lifetime(&chain(1), &EnergyModel::<f64>::standard(), kind.into());
            assert_eq!(r.lifetime_hours, 5000, "{kind}");
            let exact =
                simulate_lifetime(&chain(1), &EnergyModel::<Exact>::standard(), kind.into());
            assert_eq!(exact.lifetime_hours, 5000);
        }
    }

    #[test]
    fn two_node_chain_relay() {
        let dag = chain(2);
        let r = simulate_lifetime(
            &dag,
            &EnergyModel::<f64>::standard(),
            PolicyKind::Mpe.into(),
        );
        assert_eq!(r.lifetime_hours, 2272);
        assert_eq!(r.bottleneck, Some(NodeId(1)));
        let loads: LoadMap<Exact> = compute_load_oracle(&dag).unwrap();
        let flow = flow_lifetime(&EnergyModel::<Exact>::standard(), &loads);
        assert_eq!(flow.hours, <Exact as Scalar>::from_ratio(25000, 11));
    }

    #[test]
    fn per_round_energy_is_bits_times_cost() {
        let g = crate::graph::generate_instance(20, 100.0, 50.0, 3).unwrap();
        let dag = build_spd(&g);
        let model = EnergyModel::<Exact>::standard();
        for kind in [PolicyKind::Even, PolicyKind::Mpe, PolicyKind::Pe] {
            let mut router = Router::new(&dag, kind.into());
            let residual = vec![model.e_init.clone(); dag.node_count()];
            let traffic = router.route(0, &model, &residual);
            let spent: Exact = round_cost(&model, &traffic).into_iter().sum();
            let tx: Exact = traffic.sent.iter().cloned().sum();
            let rx: Exact = traffic.received.iter().skip(1).cloned().sum();
            assert_eq!(
                spent,
                tx.clone() * model.e_tx.clone() + rx * model.e_rx.clone()
            );
            // everything generated reaches the base
            assert_eq!(
                traffic.received[0],
                model.rate.clone() * <Exact as Scalar>::from_count(20)
            );
        }
    }

    #[test]
    fn mpe_ties_go_to_smallest_parent() {
        let g = ConnectivityGraph::from_positions(
            vec![[0.0, 0.0], [-0.6, 0.7], [0.6, 0.7], [0.0, 1.4]],
            1.0,
        )
        .unwrap();
        let dag = build_spd(&g);
        let mut router = Router::new(&dag, PolicyKind::Mpe.into());
        router.refresh_mpe(&[0.05f64; 4]);
        assert_eq!(router.mpe_choice[3], Some(NodeId(1)));
        let mut residual = vec![0.05f64; 4];
        residual[1] = 0.01;
        router.refresh_mpe(&residual);
        assert_eq!(router.mpe_choice[3], Some(NodeId(2)));
    }

    #[test]
    fn policy_names_parse() {
        for kind in [PolicyKind::Even, PolicyKind::Mpe, PolicyKind::Pe] {
            assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("wpe".parse::<PolicyKind>().is_err());
    }
}
