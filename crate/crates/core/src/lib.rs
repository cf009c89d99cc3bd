//! Lifetime-aware data-collection topologies for wireless sensor networks.
//!
//! Starting from a unit-disk [`ConnectivityGraph`], the crate builds the
//! shortest-path DAG (SPD) toward a single base station, names the nodes over
//! a shortest-path tree, computes per-node loads, and grows a k-DAG by adding
//! sibling edges between equal-depth nodes so that traffic drains from the
//! heaviest base-station child toward a lighter one. Every path to the base
//! in a k-DAG is at most `k` hops longer than the shortest one.
//!
//! The distributed pieces (SPD flood, naming, load calculation, sibling-edge
//! search) run as per-node state machines on the deterministic kernel in
//! [`sim`]. Lifetimes are evaluated in [`energy`], and [`experiments`] runs the
//! scenario grid comparing SPD against k-DAG.
//!
//! Load and energy arithmetic is generic over [`Scalar`]; `f64` is the
//! working type and `BigRational` gives exact answers for small instances.

// `!(x < y)` on floats is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builder;
pub mod dag;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod load;
pub mod naming;
pub mod scalar;
pub mod sim;

pub use builder::{
    build_kdag, candidate_diverted_load, saturation, BuilderConfig, KdagBuild, LdcRule, LightScope,
    SiblingEdge,
};
pub use dag::{build_spd, extract_spt, DagKind, PathRange, SpanningDag};
pub use energy::{
    flow_lifetime, simulate_lifetime, EnergyModel, LifetimeReport, PolicyKind, RoutingPolicy,
};
pub use error::{
    BuilderError, DagError, ExperimentError, GraphError, KernelError, LoadError, ProtocolError,
};
pub use graph::{generate_instance, ConnectivityGraph, InstanceFile, NodeId};
pub use load::{balance_factor, compute_load_oracle, run_load_calc, BalanceFactor, LoadMap};
pub use naming::{route_to, run_naming, NameTable};
pub use scalar::Scalar;
pub use sim::flood::run_distributed_spd;
pub use sim::KernelConfig;

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type LoadMapF64 = LoadMap<f64>;
pub type ExactLoadMap = LoadMap<Exact>;
pub type EnergyModelF64 = EnergyModel<f64>;
pub type ExactEnergyModel = EnergyModel<Exact>;
pub type LifetimeReportF64 = LifetimeReport<f64>;
