//! Scenario grid comparing SPD and k-DAG, and the k sweep.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::builder::{build_kdag, saturation, BuilderConfig, KdagBuild};
use crate::dag::{build_spd, SpanningDag};
use crate::energy::{simulate_lifetime, EnergyModel, PolicyKind, RoutingPolicy};
use crate::error::ExperimentError;
use crate::graph::{derive_seed, generate_instance, ConnectivityGraph};
use crate::load::{compute_load_oracle, LoadMap};

pub const CSV_HEADER: [&str; 11] = [
    "n",
    "side",
    "seed",
    "k",
    "policy",
    "theta_spd",
    "theta_kdag",
    "life_spd",
    "life_kdag",
    "edges_added",
    "max_p",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub n: usize,
    pub side: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioGrid {
    pub scenarios: Vec<Scenario>,
    pub range: f64,
    pub instances_per_scenario: usize,
    pub base_seed: u64,
}

impl ScenarioGrid {
    /// Six scenarios, 50 nodes on a 100 x 100 field up to 100 nodes on
    /// 350 x 350, ten instances each, transmission range 50.
    pub fn standard(base_seed: u64) -> Self {
        let scenarios = [
            (50, 100.0),
            (60, 150.0),
            (70, 200.0),
            (80, 250.0),
            (90, 300.0),
            (100, 350.0),
        ]
        .into_iter()
        .map(|(n, side)| Scenario { n, side })
        .collect();
        ScenarioGrid {
            scenarios,
            range: 50.0,
            instances_per_scenario: 10,
            base_seed,
        }
    }

    /// `(scenario index, instance index, seed)` for every instance, in row order.
    pub fn instances(&self) -> Vec<(usize, usize, u64)> {
        (0..self.scenarios.len())
            .flat_map(|s| (0..self.instances_per_scenario).map(move |i| (s, i)))
            .map(|(s, i)| (s, i, derive_seed(self.base_seed, (s * 1_000 + i) as u64)))
            .collect()
    }
}

/// Latency slack for the k-DAG side of a comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KChoice {
    Fixed(u32),
    /// Whatever slack the builder ends up using when left unbounded.
    Saturation,
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Fixed(k) => write!(f, "{k}"),
            KChoice::Saturation => f.write_str("max"),
        }
    }
}

impl std::str::FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" | "sat" | "saturation" => Ok(KChoice::Saturation),
            _ => s
                .parse()
                .map(KChoice::Fixed)
                .map_err(|_| format!("k must be a number or \"max\", got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRow {
    pub n: usize,
    pub side: f64,
    pub seed: u64,
    pub k: u32,
    pub policy: PolicyKind,
    pub theta_spd: f64,
    pub theta_kdag: f64,
    pub life_spd: u64,
    pub life_kdag: u64,
    pub edges_added: usize,
    pub max_p: u32,
    pub load_sum_spd: f64,
    pub load_sum_kdag: f64,
}

impl InstanceRow {
    pub fn csv_record(&self) -> [String; 11] {
        [
            self.n.to_string(),
            self.side.to_string(),
            self.seed.to_string(),
            self.k.to_string(),
            self.policy.name().to_string(),
            self.theta_spd.to_string(),
            self.theta_kdag.to_string(),
            self.life_spd.to_string(),
            self.life_kdag.to_string(),
            self.edges_added.to_string(),
            self.max_p.to_string(),
        ]
    }

    pub fn lifetime_gain(&self) -> f64 {
        self.life_kdag as f64 / self.life_spd as f64 - 1.0
    }

    pub fn theta_gain(&self) -> f64 {
        self.theta_kdag / self.theta_spd - 1.0
    }
}

/// Avg/max/min of one metric over one scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub side: f64,
    pub metric: &'static str,
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<InstanceRow>,
    pub aggregates: Vec<Aggregate>,
}

type Metric = (&'static str, fn(&InstanceRow) -> f64);

const METRICS: [Metric; 6] = [
    ("theta_spd", |r| r.theta_spd),
    ("theta_kdag", |r| r.theta_kdag),
    ("life_spd", |r| r.life_spd as f64),
    ("life_kdag", |r| r.life_kdag as f64),
    ("edges_added", |r| r.edges_added as f64),
    ("max_p", |r| r.max_p as f64),
];

/// Per-scenario aggregates, scenarios in order of first appearance.
pub fn aggregate(rows: &[InstanceRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.n, r.side)) {
            keys.push((r.n, r.side));
        }
    }
    let mut out = Vec::new();
    for (n, side) in keys {
        let group: Vec<&InstanceRow> = rows.iter().filter(|r| r.n == n && r.side == side).collect();
        for (metric, get) in METRICS {
            let values: Vec<f64> = group.iter().map(|r| get(r)).collect();
            out.push(Aggregate {
                n,
                side,
                metric,
                avg: values.iter().sum::<f64>() / values.len() as f64,
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
    }
    out
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: one line per scenario and metric.
    pub fn write_aggregates_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "side", "metric", "avg", "max", "min"])?;
        for a in &self.aggregates {
            w.write_record([
                a.n.to_string(),
                a.side.to_string(),
                a.metric.to_string(),
                a.avg.to_string(),
                a.max.to_string(),
                a.min.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// k-DAG for `graph` at the requested slack, with the slack actually used.
/// `config.k` is replaced by `k`.
pub fn build_for(
    graph: &ConnectivityGraph,
    spd: &SpanningDag,
    k: KChoice,
    config: BuilderConfig,
) -> Result<(u32, KdagBuild), ExperimentError> {
    Ok(match k {
        KChoice::Fixed(k) => (k, build_kdag(graph, spd, &BuilderConfig { k, ..config })?),
        KChoice::Saturation => saturation(graph, spd, &config)?,
    })
}

fn default_config(graph: &ConnectivityGraph) -> BuilderConfig {
    BuilderConfig::new(0).with_seed(graph.seed())
}

/// Compares SPD and k-DAG on one instance.
pub fn compare(
    graph: &ConnectivityGraph,
    k: KChoice,
    policy: PolicyKind,
) -> Result<InstanceRow, ExperimentError> {
    let model = EnergyModel::<f64>::standard();
    let spd = build_spd(graph);
    let (k, build) = build_for(graph, &spd, k, default_config(graph))?;
    let spd_loads: LoadMap<f64> =
        compute_load_oracle(&spd).map_err(crate::error::BuilderError::from)?;
    let kdag_loads: LoadMap<f64> =
        compute_load_oracle(&build.dag).map_err(crate::error::BuilderError::from)?;
    let policy = RoutingPolicy::new(policy);
    Ok(InstanceRow {
        n: graph.n(),
        side: graph.side(),
        seed: graph.seed(),
        k,
        policy: policy.kind,
        theta_spd: spd_loads.theta()?.theta,
        theta_kdag: kdag_loads.theta()?.theta,
        life_spd: simulate_lifetime(&spd, &model, policy).lifetime_hours,
        life_kdag: simulate_lifetime(&build.dag, &model, policy).lifetime_hours,
        edges_added: build.edges.len(),
        max_p: build
            .dag
            .max_path_len()
            .map_err(crate::error::BuilderError::from)?,
        load_sum_spd: spd_loads.delivered(),
        load_sum_kdag: kdag_loads.delivered(),
    })
}

/// Runs every instance of `grid` in parallel; rows come back in grid order.
pub fn run_grid(
    grid: &ScenarioGrid,
    k: KChoice,
    policy: PolicyKind,
) -> Result<ExperimentResult, ExperimentError> {
    let rows = grid
        .instances()
        .into_par_iter()
        .map(|(s, _, seed)| {
            let sc = &grid.scenarios[s];
            let graph = generate_instance(sc.n, sc.side, grid.range, seed)?;
            compare(&graph, k, policy)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aggregates = aggregate(&rows);
    Ok(ExperimentResult { rows, aggregates })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub k: u32,
    pub lifetime: u64,
    /// Lifetime relative to the lifetime at the saturation slack.
    pub ratio: f64,
    pub edges_added: usize,
    pub max_p: u32,
}

/// Lifetime for every `k` from 0 to the saturation slack.
pub fn k_sweep(
    graph: &ConnectivityGraph,
    policy: PolicyKind,
) -> Result<Vec<SweepPoint>, ExperimentError> {
    let model = EnergyModel::<f64>::standard();
    let policy = RoutingPolicy::new(policy);
    let spd = build_spd(graph);
    let (k_sat, _) = build_for(graph, &spd, KChoice::Saturation, default_config(graph))?;
    let mut points = (0..=k_sat)
        .into_par_iter()
        .map(|k| {
            let (_, build) = build_for(graph, &spd, KChoice::Fixed(k), default_config(graph))?;
            Ok(SweepPoint {
                k,
                lifetime: simulate_lifetime(&build.dag, &model, policy).lifetime_hours,
                ratio: 0.0,
                edges_added: build.edges.len(),
                max_p: build
                    .dag
                    .max_path_len()
                    .map_err(crate::error::BuilderError::from)?,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let life_max = points.last().expect("k = 0 is always swept").lifetime as f64;
    for p in &mut points {
        p.ratio = p.lifetime as f64 / life_max;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_shape() {
        let g = ScenarioGrid::standard(7);
        assert_eq!(g.instances().len(), 60);
        assert_eq!(
            g.scenarios[5],
            Scenario {
                n: 100,
                side: 350.0
            }
        );
        let seeds: std::collections::BTreeSet<u64> = g.instances().iter().map(|i| i.2).collect();
        assert_eq!(seeds.len(), 60);
    }

    #[test]
    fn k_choice_parsing() {
        assert_eq!("max".parse::<KChoice>(), Ok(KChoice::Saturation));
        assert_eq!("3".parse::<KChoice>(), Ok(KChoice::Fixed(3)));
        assert!("x".parse::<KChoice>().is_err());
    }

    #[test]
    fn k_zero_row_is_neutral() {
        let grid = ScenarioGrid {
            instances_per_scenario: 1,
            scenarios: vec![Scenario { n: 30, side: 100.0 }],
            ..ScenarioGrid::standard(3)
        };
        let res = run_grid(&grid, KChoice::Fixed(0), PolicyKind::Mpe).unwrap();
        let r = &res.rows[0];
        assert_eq!(
            (r.theta_spd, r.life_spd, r.edges_added),
            (r.theta_kdag, r.life_kdag, 0)
        );
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let grid = ScenarioGrid {
            instances_per_scenario: 2,
            scenarios: vec![Scenario { n: 20, side: 80.0 }],
            ..ScenarioGrid::standard(5)
        };
        let res = run_grid(&grid, KChoice::Fixed(2), PolicyKind::Even).unwrap();
        assert_eq!(res.aggregates, aggregate(&res.rows));
        let life = res
            .aggregates
            .iter()
            .find(|a| a.metric == "life_kdag")
            .unwrap();
        let hi = res.rows.iter().map(|r| r.life_kdag).max().unwrap() as f64;
        assert_eq!(life.max, hi);
        let header = res.csv_string().lines().next().unwrap().to_string();
        assert_eq!(header, CSV_HEADER.join(","));
    }
}
