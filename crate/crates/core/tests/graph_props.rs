mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use vanet_core::graph::{
    build_graph, build_weighted_graph, cell_side, geometric_graph, handover_count, path_loss, throughput,
};
use vanet_core::{ImpedanceParams, ThroughputParams, VanetGraph, VehicleSnapshot};

use common::*;

/// Counts grid lines `m·side` strictly inside `(min(a, b), max(a, b))` by
/// walking every candidate multiple.
fn crossings_oracle(a: f64, b: f64, side: f64) -> u32 {
    let (lo, hi) = (a.min(b), a.max(b));
    let first = (lo / side).floor() as i64 - 1;
    let last = (hi / side).ceil() as i64 + 1;
    (first..=last).filter(|&m| lo < m as f64 * side && (m as f64 * side) < hi).count() as u32
}

fn handover_oracle(p: (f64, f64), q: (f64, f64), r_c: f64) -> u32 {
    let side = cell_side(r_c);
    crossings_oracle(p.0, q.0, side) + crossings_oracle(p.1, q.1, side)
}

fn snapshot_of(points: &[(f64, f64)]) -> VehicleSnapshot {
    let positions: BTreeMap<String, (f64, f64)> =
        points.iter().enumerate().map(|(i, &p)| (format!("v{i:04}"), p)).collect();
    VehicleSnapshot { instant: 0.0, origin: (116.25, 39.8), positions }
}

fn brute_edges(points: &[(f64, f64)], r: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            if dx * dx + dy * dy <= r * r {
                out.insert((i, j));
            }
        }
    }
    out
}

#[test]
fn path_loss_reference_values() {
    assert!((path_loss(1.0, 1.0).unwrap() - 42.6).abs() <= 1e-12);
    assert!((path_loss(1.0, 2000.0).unwrap() - 108.6206).abs() <= 1e-6);
    assert!(path_loss(0.0, 2000.0).is_err());
    assert!(path_loss(1.0, -5.0).is_err());
}

#[test]
fn handover_examples() {
    let s = cell_side(300.0);
    assert_eq!(handover_count((0.1 * s, 0.5 * s), (2.5 * s, 0.5 * s), 300.0), 2);
    assert_eq!(handover_count((123.0, 456.0), (123.0, 456.0), 300.0), 0);
}

#[test]
fn throughput_examples() {
    let lossless = ThroughputParams { tau: 0.0, varsigma: 0.0, ..Default::default() };
    assert_eq!(lossless.rate_from_sinr(1.0).unwrap(), 1.0);
    let split = ThroughputParams { tau: 0.2, varsigma: 0.3, ..Default::default() };
    assert!((split.rate_from_sinr(3.0).unwrap() - 1.0).abs() <= 1e-15);
    assert_eq!(lossless.rate_from_sinr(0.0).unwrap(), 0.0);
    let bad = ThroughputParams { tau: 0.6, varsigma: 0.4, ..Default::default() };
    assert!(throughput(&bad, 1.0, 2000.0).is_err());
}

#[test]
fn vehicle_impedance_fixture() {
    let params = ImpedanceParams { alpha: 1.0, upsilon: 2.0, beta: 2.0, psi: 1.0, ..Default::default() };
    assert!((params.vehicle_impedance_terms(0.5, 1.5) - 3.25).abs() <= 1e-15);
    let rate_only = ImpedanceParams { alpha: 0.0, beta: 1.0, psi: 1.0, ..Default::default() };
    assert_eq!(rate_only.vehicle_impedance_terms(0.7, 2.5), 2.5);
    // isolated vehicle: k_i = 0
    assert_eq!(params.vehicle_impedance_terms(0.0, 1.5), 3.0);
}

#[test]
fn grid_edges_match_all_pairs_on_500_points() {
    let mut rng = rng(3);
    let points = random_points(&mut rng, 500, 5000.0);
    let g = geometric_graph(&points, 400.0);
    let got: BTreeSet<_> = g.edges().collect();
    assert_eq!(got, brute_edges(&points, 400.0));
}

#[test]
fn weighted_graph_invariants() {
    let mut rng = rng(9);
    let points = random_points(&mut rng, 150, 3000.0);
    let params = ImpedanceParams { mu: 5.0, theta: 400.0, ..Default::default() };
    let g = build_weighted_graph(&snapshot_of(&points), &params).unwrap();
    for (i, j) in g.edges() {
        let w = g.weight(i, j).unwrap();
        assert_eq!(w, g.weight(j, i).unwrap());
        assert!(w >= params.floor_r);
        assert_eq!(g.handovers(i, j, params.r_c), handover_oracle(g.position(i), g.position(j), params.r_c));
    }
}

#[test]
fn distance_only_impedance_orders_like_distance() {
    let mut rng = rng(21);
    let points = random_points(&mut rng, 120, 3000.0);
    let params = ImpedanceParams { alpha: 0.0, mu: 0.0, zeta: 0.0, beta: 1.0, ..Default::default() };
    let g = build_weighted_graph(&snapshot_of(&points), &params).unwrap();
    let mut edges: Vec<_> = g.edges().map(|(i, j)| (g.distance(i, j), g.weight(i, j).unwrap())).collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in edges.windows(2) {
        assert!(w[0].1 <= w[1].1);
    }
}

#[test]
fn graph_exports_round_trip() {
    let mut rng = rng(4);
    let points = random_points(&mut rng, 40, 1500.0);
    let g = build_weighted_graph(&snapshot_of(&points), &ImpedanceParams::default()).unwrap();
    assert_eq!(VanetGraph::from_json(&g.to_json().unwrap()).unwrap(), g);

    let mut buf = Vec::new();
    g.write_edge_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(reader.headers().unwrap(), vec!["i", "j", "d_ij", "n_s", "R_ij"]);
    let mut rows = 0;
    for (rec, (i, j)) in reader.records().zip(g.edges()) {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<usize>().unwrap(), i);
        assert_eq!(rec[1].parse::<usize>().unwrap(), j);
        assert_eq!(rec[2].parse::<f64>().unwrap(), g.distance(i, j));
        assert_eq!(rec[4].parse::<f64>().unwrap(), g.weight(i, j).unwrap());
        rows += 1;
    }
    assert_eq!(rows, g.edge_count());
}

#[test]
fn empty_snapshot_is_rejected() {
    assert!(build_graph(&snapshot_of(&[]), &ImpedanceParams::default()).is_err());
}

proptest! {
    #[test]
    fn path_loss_strictly_increasing(d in 0.001f64..50.0, f in 1.0f64..6000.0, bump in 1.0001f64..3.0) {
        let base = path_loss(d, f).unwrap();
        prop_assert!(path_loss(d * bump, f).unwrap() > base);
        prop_assert!(path_loss(d, f * bump).unwrap() > base);
    }

    #[test]
    fn handover_matches_crossing_enumeration(
        ax in -5000.0f64..5000.0, ay in -5000.0f64..5000.0,
        bx in -5000.0f64..5000.0, by in -5000.0f64..5000.0,
        r_c in 10.0f64..2000.0,
    ) {
        prop_assert_eq!(handover_count((ax, ay), (bx, by), r_c), handover_oracle((ax, ay), (bx, by), r_c));
        prop_assert_eq!(handover_count((ax, ay), (bx, by), r_c), handover_count((bx, by), (ax, ay), r_c));
    }

    #[test]
    fn doubling_cell_radius_never_adds_handovers(
        ax in 0.0f64..8000.0, ay in 0.0f64..8000.0, bx in 0.0f64..8000.0, by in 0.0f64..8000.0, r_c in 10.0f64..1500.0,
    ) {
        prop_assert!(handover_count((ax, ay), (bx, by), 2.0 * r_c) <= handover_count((ax, ay), (bx, by), r_c));
    }

    #[test]
    fn handovers_are_periodic_under_cell_shifts(
        ax in 0.0f64..3000.0, ay in 0.0f64..3000.0, bx in 0.0f64..3000.0, by in 0.0f64..3000.0,
        mx in -4i32..4, my in -4i32..4,
    ) {
        // r_c = 1/√π makes the cell side exactly 1, so shifts are exact
        let r_c = 1.0 / std::f64::consts::PI.sqrt();
        let side = cell_side(r_c);
        prop_assume!((side - 1.0).abs() < 1e-15);
        let scale = 1.0 / 256.0;
        let (ax, ay, bx, by) = (ax * scale, ay * scale, bx * scale, by * scale);
        let (sx, sy) = (f64::from(mx) * side, f64::from(my) * side);
        prop_assert_eq!(
            handover_count((ax, ay), (bx, by), r_c),
            handover_count((ax + sx, ay + sy), (bx + sx, by + sy), r_c)
        );
    }

    #[test]
    fn grid_edges_match_all_pairs(seed in 0u64..100_000, n in 0usize..200, r in 1.0f64..800.0) {
        let mut rng = rng(seed);
        let points = random_points(&mut rng, n, 2000.0);
        let g = geometric_graph(&points, r);
        let got: BTreeSet<_> = g.edges().collect();
        prop_assert_eq!(got, brute_edges(&points, r));
        prop_assert!((0..n).all(|i| !g.neighbors(i).contains(&i)));
    }
}
