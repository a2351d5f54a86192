mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vanet_core::optim::{BarrierOptions, SolveStatus};
use vanet_core::traffic::{allocate, build_problem, dijkstra, Method, TrafficProblem};
use vanet_core::VanetGraph;

use common::*;

/// Random graph with small integer weights so equal-cost ties are common and
/// path sums are exact.
fn random_weighted(rng: &mut ChaCha8Rng, n: usize, density: f64) -> (VanetGraph, Vec<Vec<Option<f64>>>) {
    let mut w = vec![vec![None; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let weight = f64::from(rng.random_range(1u8..=3));
                w[i][j] = Some(weight);
                w[j][i] = Some(weight);
                edges.push((i, j, weight));
            }
        }
    }
    (VanetGraph::from_weighted_edges(n, &edges).unwrap(), w)
}

/// Best simple path under (cost, hops, node sequence) by exhaustive DFS.
fn best_path_oracle(w: &[Vec<Option<f64>>], s: usize, t: usize) -> Option<(Vec<usize>, f64)> {
    fn dfs(w: &[Vec<Option<f64>>], t: usize, path: &mut Vec<usize>, cost: f64, best: &mut Option<(Vec<usize>, f64)>) {
        let u = *path.last().unwrap();
        if u == t {
            let better = match best {
                None => true,
                Some((bp, bc)) => (cost, path.len(), &*path) < (*bc, bp.len(), &*bp),
            };
            if better {
                *best = Some((path.clone(), cost));
            }
            return;
        }
        for v in 0..w.len() {
            if let Some(weight) = w[u][v] {
                if !path.contains(&v) {
                    path.push(v);
                    dfs(w, t, path, cost + weight, best);
                    path.pop();
                }
            }
        }
    }
    let mut best = None;
    dfs(w, t, &mut vec![s], 0.0, &mut best);
    best
}

fn incidence_oracle(p: &TrafficProblem) -> (Vec<(usize, usize)>, Vec<Vec<f64>>) {
    let used: BTreeSet<(usize, usize)> =
        p.paths.iter().flat_map(|path| path.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1])))).collect();
    let edges: Vec<_> = used.into_iter().collect();
    let incidence = edges
        .iter()
        .map(|&(u, v)| {
            p.paths
                .iter()
                .map(|path| {
                    let hit = path.windows(2).any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u));
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (edges, incidence)
}

/// The allocation LP in `A x ≤ b` form including sign rows.
fn lp_rows(p: &TrafficProblem) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = p.commodities();
    let mut a = vec![vec![-1.0; n]];
    let mut b = vec![-p.demand];
    for (row, &c) in p.incidence.iter().zip(&p.capacity) {
        a.push(row.clone());
        b.push(c);
    }
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    (a, b)
}

#[test]
fn dijkstra_matches_exhaustive_search() {
    let mut rng = rng(303);
    for case in 0..300 {
        let n = rng.random_range(2..=12);
        let density = rng.random_range(0.2..0.7);
        let (g, w) = random_weighted(&mut rng, n, density);
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        match (dijkstra(&g, s, t), best_path_oracle(&w, s, t)) {
            (Ok((path, cost)), Some((want, want_cost))) => {
                assert_eq!(path, want, "case {case}");
                assert_eq!(cost, want_cost, "case {case}");
            }
            (Err(_), None) => {}
            (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
        }
    }
}

/// A random connected instance with a few sources routed to one destination.
fn random_instance(rng: &mut ChaCha8Rng) -> Option<(VanetGraph, TrafficProblem)> {
    let n = rng.random_range(4..=10);
    let (g, _) = random_weighted(rng, n, 0.45);
    let dest = rng.random_range(0..n);
    let k = rng.random_range(1..=4.min(n - 1));
    let mut sources: Vec<usize> = (0..n).filter(|&v| v != dest).collect();
    for i in (1..sources.len()).rev() {
        sources.swap(i, rng.random_range(0..=i));
    }
    sources.truncate(k);
    let demand = rng.random_range(1.0..20.0);
    let c = rng.random_range(3.0..15.0);
    build_problem(&g, &sources, dest, demand, c).ok().map(|p| (g, p))
}

#[test]
fn problem_assembly_matches_path_scan() {
    let mut rng = rng(404);
    let mut built = 0;
    for case in 0..200 {
        let Some((g, p)) = random_instance(&mut rng) else {
            continue;
        };
        built += 1;
        let (edges, incidence) = incidence_oracle(&p);
        assert_eq!(p.edges, edges, "case {case}");
        assert_eq!(p.incidence, incidence, "case {case}");
        for (i, path) in p.paths.iter().enumerate() {
            assert_eq!(path.first(), Some(&p.sources[i]));
            assert_eq!(path.last(), Some(&p.dest));
            let cost: f64 = path.windows(2).map(|w| g.weight(w[0], w[1]).unwrap()).sum();
            assert_eq!(p.cost[i], cost, "case {case}");
        }
    }
    assert!(built > 100, "{built}");
}

#[test]
fn allocation_matches_vertex_enumeration() {
    let mut rng = rng(505);
    let opts = BarrierOptions::default();
    let mut optimal = 0;
    for case in 0..200 {
        let Some((_, p)) = random_instance(&mut rng) else {
            continue;
        };
        let (a, b) = lp_rows(&p);
        let simplex = allocate(&p, Method::Simplex, &opts).unwrap();
        let barrier = allocate(&p, Method::Barrier, &opts).unwrap();
        match vertex_enumeration(&p.cost, &a, &b) {
            None => {
                assert_eq!(simplex.report.status, SolveStatus::Infeasible, "case {case}");
                assert_eq!(barrier.report.status, SolveStatus::Infeasible, "case {case}");
            }
            Some((obj, _)) => {
                assert!(simplex.is_optimal(), "case {case}");
                assert!((simplex.cost - obj).abs() <= 1e-8 * obj.abs().max(1.0), "case {case}");
                let total: f64 = simplex.x.iter().sum();
                assert!((total - p.demand).abs() <= 1e-8, "case {case}: Σx = {total}");
                for (load, c) in simplex.loads.iter().zip(&p.capacity) {
                    assert!(*load <= c + 1e-8, "case {case}");
                }
                if barrier.report.status == SolveStatus::Infeasible {
                    // only when the feasible set has no interior
                    assert!(p.to_barrier().strictly_feasible_point().unwrap().is_none(), "case {case}");
                    continue;
                }
                assert!(barrier.is_optimal(), "case {case}: {:?}", barrier.report.status);
                let diff = barrier.cost - obj;
                assert!(diff >= -1e-6 && diff <= barrier.report.gap_bound + 1e-6, "case {case}: {diff}");
                for (load, c) in barrier.loads.iter().zip(&p.capacity) {
                    assert!(load < c, "case {case}");
                }
                optimal += 1;
            }
        }
    }
    assert!(optimal > 50, "{optimal}");
}

proptest! {
    #[test]
    fn scaling_demand_and_capacity_scales_flows(seed in 0u64..5_000, k in 0.1f64..10.0) {
        let mut rng = rng(seed);
        let instance = random_instance(&mut rng);
        prop_assume!(instance.is_some());
        let (_, p) = instance.unwrap();
        let base = allocate(&p, Method::Simplex, &BarrierOptions::default()).unwrap();
        prop_assume!(base.is_optimal());
        let scaled = TrafficProblem {
            demand: p.demand * k,
            capacity: p.capacity.iter().map(|c| c * k).collect(),
            ..p.clone()
        };
        let rep = allocate(&scaled, Method::Simplex, &BarrierOptions::default()).unwrap();
        prop_assert!(rep.is_optimal());
        prop_assert!((rep.cost - k * base.cost).abs() <= 1e-8 * (k * base.cost).abs().max(1.0));
    }

    #[test]
    fn optimal_flow_meets_demand_exactly(seed in 0u64..5_000) {
        let mut rng = rng(seed);
        let instance = random_instance(&mut rng);
        prop_assume!(instance.is_some());
        let (_, p) = instance.unwrap();
        let rep = allocate(&p, Method::Barrier, &BarrierOptions::default()).unwrap();
        prop_assume!(rep.is_optimal());
        let total: f64 = rep.x.iter().sum();
        // positive costs push the demand row to be tight up to the gap
        let min_cost = p.cost.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(total > p.demand);
        prop_assert!(total - p.demand <= rep.report.gap_bound / min_cost + 1e-6);
        for (load, c) in rep.loads.iter().zip(&p.capacity) {
            prop_assert!(load < c);
        }
    }
}
