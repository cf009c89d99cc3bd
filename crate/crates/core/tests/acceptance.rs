//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use kdag::builder::CascadeStep;
use kdag::experiments::{
    build_for, compare, k_sweep, run_grid, ExperimentResult, KChoice, ScenarioGrid,
};
use kdag::{
    build_kdag, build_spd, extract_spt, flow_lifetime, generate_instance, run_distributed_spd,
    run_load_calc, run_naming, simulate_lifetime, BuilderConfig, ConnectivityGraph, EnergyModel,
    Exact, KernelConfig, LoadMap, NodeId, PolicyKind, RoutingPolicy,
};
use rayon::prelude::*;

const BASE_SEED: u64 = 2024;
const LOAD_TOL: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut bad = Vec::new();
    for seed in 0..100u64 {
        let n = 5 + (seed as usize % 36);
        let graph = instance(n, seed);
        let config = KernelConfig::with_seed(seed);
        let (spd, _) = run_distributed_spd(&graph, &config).unwrap();
        if spd.depths() != &bfs(&graph)[..] {
            bad.push(format!("depth@{seed}"));
        }
        let spt = extract_spt(&spd).unwrap();
        let (names, _) = run_naming(&graph, &spt, &config).unwrap();
        if names.ids() != &preorder(&spt)[..] {
            bad.push(format!("naming@{seed}"));
        }
        let kdag = build_kdag(&graph, &spd, &BuilderConfig::new(2).with_seed(seed))
            .unwrap()
            .dag;
        for dag in [&spd, &kdag] {
            let (loads, _) = run_load_calc(&graph, dag, &config).unwrap();
            let expected = load_fixpoint(dag);
            if graph
                .nodes()
                .any(|v| (loads.load(v) - expected[v.index()]).abs() > LOAD_TOL)
            {
                bad.push(format!("load@{seed}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "100 instances, mismatches {:?}, {:.2}s",
            bad,
            elapsed.as_secs_f64()
        ),
    )
}

fn grid_instances(grid: &ScenarioGrid) -> Vec<ConnectivityGraph> {
    grid.instances()
        .into_iter()
        .map(|(s, _, seed)| {
            generate_instance(
                grid.scenarios[s].n,
                grid.scenarios[s].side,
                grid.range,
                seed,
            )
            .unwrap()
        })
        .collect()
}

fn criterion_2(grid: &ScenarioGrid) -> Verdict {
    let mut violations = 0;
    let mut checked = 0;
    for seed in 0..100u64 {
        let graph = generate_instance(4 + (seed as usize % 7), 90.0, 50.0, seed).unwrap();
        let spd = build_spd(&graph);
        let dist = bfs(&graph);
        for k in 0..4 {
            let dag = build_kdag(&graph, &spd, &BuilderConfig::new(k).with_seed(seed))
                .unwrap()
                .dag;
            checked += 1;
            for v in graph.sensors() {
                let lengths = all_path_lengths(&dag, v);
                let (min, max) = (
                    *lengths.iter().min().unwrap(),
                    *lengths.iter().max().unwrap(),
                );
                if min != dist[v.index()] || max - min > k {
                    violations += 1;
                }
            }
        }
    }
    for graph in grid_instances(grid) {
        let spd = build_spd(&graph);
        let dist = bfs(&graph);
        for choice in [KChoice::Fixed(1), KChoice::Fixed(3), KChoice::Saturation] {
            let (k, build) = build_for(
                &graph,
                &spd,
                choice,
                BuilderConfig::new(0).with_seed(graph.seed()),
            )
            .unwrap();
            checked += 1;
            let Ok(ranges) = build.dag.path_ranges() else {
                violations += 1;
                continue;
            };
            for v in graph.sensors() {
                let r = ranges[v.index()].unwrap();
                if r.shortest != dist[v.index()] || r.slack() > k {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        violations == 0,
        format!("{checked} k-DAGs, {violations} violations"),
    )
}

fn criterion_3() -> Verdict {
    let graph = two_subtrees();
    let spd = build_spd(&graph);
    let config = BuilderConfig {
        keep_trace: true,
        ..BuilderConfig::new(2)
    };
    let build = build_kdag(&graph, &spd, &config).unwrap();
    let edges: Vec<(u32, u32, u32)> = build
        .edges
        .iter()
        .map(|e| (e.from.0, e.to.0, e.level))
        .collect();
    let n = NodeId;
    let expected_cascade = vec![
        CascadeStep::AddEdge {
            from: n(3),
            to: n(4),
        },
        CascadeStep::ToSibling {
            from: n(3),
            to: n(5),
        },
        CascadeStep::AddEdge {
            from: n(5),
            to: n(3),
        },
        CascadeStep::ToChild {
            from: n(5),
            to: n(6),
        },
        CascadeStep::Ack { node: n(6) },
    ];
    let cascade = build
        .rounds
        .first()
        .map(|r| r.cascade.clone())
        .unwrap_or_default();
    let search: Vec<(&str, u32, u32)> = build
        .trace
        .records
        .iter()
        .filter(|r| matches!(r.kind, "SF_S" | "ADD_SIBLING" | "SF_ACK"))
        .map(|r| (r.kind, r.src.0, r.dst.0))
        .collect();
    let first_ack = search.iter().position(|m| m.0 == "SF_ACK");
    let siblings: Vec<_> = search[..first_ack.unwrap_or(search.len())]
        .iter()
        .filter(|m| m.0 == "ADD_SIBLING")
        .collect();
    let pass = edges == [(3, 4, 2), (5, 3, 2)]
        && cascade == expected_cascade
        && siblings.iter().map(|m| (m.1, m.2)).eq([(3, 5), (5, 6)])
        && first_ack.is_some_and(|i| search[i].1 == 6);
    verdict(pass, format!("edges {edges:?}, cascade {cascade:?}"))
}

fn criterion_4(result: &ExperimentResult) -> Verdict {
    let off = result
        .rows
        .iter()
        .filter(|r| {
            (r.load_sum_spd - r.n as f64).abs() > LOAD_TOL
                || (r.load_sum_kdag - r.n as f64).abs() > LOAD_TOL
        })
        .count();
    verdict(
        off == 0,
        format!(
            "{} instances x 2 topologies, {off} off by more than {LOAD_TOL:e}",
            result.rows.len()
        ),
    )
}

fn criterion_5() -> Verdict {
    let single = ConnectivityGraph::from_positions(vec![[0.0, 0.0], [0.5, 0.0]], 1.0).unwrap();
    let chain =
        ConnectivityGraph::from_positions(vec![[0.0, 0.0], [0.9, 0.0], [1.8, 0.0]], 1.0).unwrap();
    let mut got = Vec::new();
    for (graph, expected) in [(&single, 5000u64), (&chain, 2272)] {
        let dag = build_spd(graph);
        for policy in [PolicyKind::Mpe, PolicyKind::Pe, PolicyKind::Even] {
            let policy = RoutingPolicy::new(policy);
            let float =
                simulate_lifetime(&dag, &EnergyModel::<f64>::standard(), policy).lifetime_hours;
            let exact =
                simulate_lifetime(&dag, &EnergyModel::<Exact>::standard(), policy).lifetime_hours;
            got.push((expected, float, exact));
        }
    }
    let loads: LoadMap<Exact> = kdag::compute_load_oracle(&build_spd(&chain)).unwrap();
    let closed = flow_lifetime(&EnergyModel::<Exact>::standard(), &loads).hours;
    let pass = got.iter().all(|&(e, f, x)| e == f && e == x)
        && closed == Exact::new(25_000.into(), 11.into());
    verdict(
        pass,
        format!("(expected, f64, exact) {got:?}; chain closed form {closed}"),
    )
}

fn criterion_6(result: &ExperimentResult, elapsed: Duration) -> Verdict {
    let rows = &result.rows;
    let theta_worse = rows.iter().filter(|r| r.theta_kdag < r.theta_spd).count();
    let life_worse = rows.iter().filter(|r| r.life_kdag < r.life_spd).count();
    let strict = rows.iter().filter(|r| r.life_kdag > r.life_spd).count();
    let pass = theta_worse == 0
        && life_worse == 0
        && strict * 10 >= rows.len() * 9
        && elapsed < Duration::from_secs(300);
    let worse: Vec<String> = rows
        .iter()
        .filter(|r| r.life_kdag < r.life_spd)
        .map(|r| format!("n{}/{}:{}->{}", r.n, r.seed, r.life_spd, r.life_kdag))
        .collect();
    verdict(
        pass,
        format!(
            "{} rows: theta worse {theta_worse}, lifetime worse {life_worse} {worse:?}, strictly better {strict}, {:.1}s",
            rows.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let rows: Vec<_> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let graph = generate_instance(50, 100.0, 50.0, seed).unwrap();
            compare(&graph, KChoice::Saturation, PolicyKind::Mpe).unwrap()
        })
        .collect();
    let hit = rows
        .iter()
        .find(|r| r.lifetime_gain() >= 0.5 && r.theta_gain() >= 0.5);
    let best_life = rows
        .iter()
        .max_by(|a, b| a.lifetime_gain().total_cmp(&b.lifetime_gain()))
        .unwrap();
    let best_theta = rows
        .iter()
        .max_by(|a, b| a.theta_gain().total_cmp(&b.theta_gain()))
        .unwrap();
    let detail = match hit {
        Some(r) => format!("seed {}: lifetime +{:.1}%, theta +{:.1}%", r.seed, 100.0 * r.lifetime_gain(), 100.0 * r.theta_gain()),
        None => format!(
            "no seed in 0..200; best lifetime seed {} (+{:.1}%, theta +{:.1}%), best theta seed {} (+{:.1}%)",
            best_life.seed,
            100.0 * best_life.lifetime_gain(),
            100.0 * best_life.theta_gain(),
            best_theta.seed,
            100.0 * best_theta.theta_gain()
        ),
    };
    verdict(hit.is_some(), detail)
}

fn criterion_8(first: &ExperimentResult, grid: &ScenarioGrid) -> Verdict {
    let second = run_grid(grid, KChoice::Saturation, PolicyKind::Mpe).unwrap();
    let (a, b) = (first.csv_string(), second.csv_string());
    verdict(a == b, format!("{} bytes per run", a.len()))
}

fn criterion_9(grid: &ScenarioGrid) -> Verdict {
    let model = EnergyModel::<f64>::standard();
    let policy = RoutingPolicy::new(PolicyKind::Mpe);
    let mut bad = Vec::new();
    let graphs = grid_instances(grid);
    for graph in graphs.iter().step_by(grid.instances_per_scenario) {
        let sweep = k_sweep(graph, PolicyKind::Mpe).unwrap();
        let spd = build_spd(graph);
        let (_, sat) =
            kdag::saturation(graph, &spd, &BuilderConfig::new(0).with_seed(graph.seed())).unwrap();
        let life_spd = simulate_lifetime(&spd, &model, policy).lifetime_hours as f64;
        let life_max = simulate_lifetime(&sat.dag, &model, policy).lifetime_hours as f64;
        let (first, last) = (sweep.first().unwrap(), sweep.last().unwrap());
        if first.ratio != life_spd / life_max || last.ratio != 1.0 {
            bad.push((graph.n(), first.ratio, last.ratio));
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{} sweeps, mismatches {bad:?}",
            graphs.len() / grid.instances_per_scenario
        ),
    )
}

fn main() -> ExitCode {
    let grid = ScenarioGrid::standard(BASE_SEED);
    let start = Instant::now();
    let result = run_grid(&grid, KChoice::Saturation, PolicyKind::Mpe).unwrap();
    let grid_time = start.elapsed();

    let verdicts = [
        criterion_1(),
        criterion_2(&grid),
        criterion_3(),
        criterion_4(&result),
        criterion_5(),
        criterion_6(&result, grid_time),
        criterion_7(),
        criterion_8(&result, &grid),
        criterion_9(&grid),
    ];
    for (i, v) in verdicts.iter().enumerate() {
        println!(
            "criterion {}: {} - {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
