#![allow(dead_code)]

use std::collections::VecDeque;

use kdag::{generate_instance, ConnectivityGraph, NameTable, NodeId, SpanningDag};

/// Two base-station children. The left one (1) carries a chain 3 -> 5 -> 6 -> 7
/// plus three direct leaves; the right one (2) has the single child 4, which
/// sees 3 across the subtree boundary at depth 2.
pub fn two_subtrees() -> ConnectivityGraph {
    ConnectivityGraph::from_positions(
        vec![
            [0.0, 0.0],
            [-0.45, 0.8],
            [0.5, 0.8],
            [-0.6, 1.75],
            [0.35, 1.75],
            [-1.25, 1.3],
            [-1.9, 2.0],
            [-2.5, 2.7],
            [-1.2, 0.45],
            [-1.05, 0.2],
            [-1.3, 0.75],
        ],
        1.0,
    )
    .unwrap()
}

/// Side length giving roughly eight neighbors per node at range 50.
pub fn side_for(n: usize) -> f64 {
    (n as f64 * std::f64::consts::PI * 2500.0 / 8.0).sqrt()
}

pub fn instance(n: usize, seed: u64) -> ConnectivityGraph {
    generate_instance(n, side_for(n), 50.0, seed).unwrap()
}

pub fn bfs(graph: &ConnectivityGraph) -> Vec<u32> {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut queue = VecDeque::from([NodeId(0)]);
    dist[0] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in graph.neighbors(u) {
            if dist[v.index()] == u32::MAX {
                dist[v.index()] = dist[u.index()] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Preorder rank over the tree, children visited in ascending id.
pub fn preorder(spt: &SpanningDag) -> Vec<u32> {
    fn walk(spt: &SpanningDag, v: NodeId, next: &mut u32, out: &mut [u32]) {
        out[v.index()] = *next;
        *next += 1;
        for &c in spt.children(v) {
            walk(spt, c, next, out);
        }
    }
    let mut out = vec![0; spt.node_count()];
    walk(spt, NodeId(0), &mut 0, &mut out);
    out
}

/// Loads by repeated relaxation until nothing changes; no ordering assumed.
pub fn load_fixpoint(dag: &SpanningDag) -> Vec<f64> {
    let mut load = vec![0.0; dag.node_count()];
    for _ in 0..=dag.node_count() {
        let next: Vec<f64> = dag
            .nodes()
            .map(|v| {
                if v.is_base() {
                    return 0.0;
                }
                1.0 + dag
                    .children(v)
                    .iter()
                    .map(|&c| load[c.index()] / dag.parents(c).len() as f64)
                    .sum::<f64>()
            })
            .collect();
        if next == load {
            break;
        }
        load = next;
    }
    load
}

/// Every base-to-`v` path length, by brute-force enumeration.
pub fn all_path_lengths(dag: &SpanningDag, v: NodeId) -> Vec<u32> {
    fn up(dag: &SpanningDag, v: NodeId, len: u32, out: &mut Vec<u32>) {
        if v.is_base() {
            out.push(len);
            return;
        }
        for &p in dag.parents(v) {
            up(dag, p, len + 1, out);
        }
    }
    let mut out = Vec::new();
    up(dag, v, 0, &mut out);
    out
}

/// Hops between two nodes along the tree.
pub fn tree_distance(spt: &SpanningDag, mut a: NodeId, mut b: NodeId) -> usize {
    let parent = |v: NodeId| *spt.parents(v).iter().next().unwrap();
    let mut hops = 0;
    while a != b {
        if spt.depth(a) >= spt.depth(b) {
            a = parent(a);
        } else {
            b = parent(b);
        }
        hops += 1;
    }
    hops
}

pub fn owner_matches(table: &NameTable, graph: &ConnectivityGraph) -> bool {
    graph.nodes().all(|v| table.owner(table.id(v)) == Some(v))
}
