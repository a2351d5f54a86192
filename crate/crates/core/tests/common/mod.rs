//! Brute-force oracles shared by the integration tests. None of these reuse
//! library code beyond graph construction.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vanet_core::graph::geometric_graph;
use vanet_core::VanetGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in a `side × side` square.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side))).collect()
}

pub fn random_geometric(rng: &mut ChaCha8Rng, n: usize, side: f64, r: f64) -> VanetGraph {
    geometric_graph(&random_points(rng, n, side), r)
}

pub fn adjacency(g: &VanetGraph) -> Vec<Vec<bool>> {
    let n = g.n();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for &j in g.neighbors(i) {
            adj[i][j] = true;
        }
    }
    adj
}

/// All-pairs hop distances; `usize::MAX` for disconnected pairs.
pub fn floyd_warshall(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if adj[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for row in &mut d {
        for v in row.iter_mut() {
            if *v >= inf {
                *v = usize::MAX;
            }
        }
    }
    d
}

/// Every hop-shortest path from `s` to `t`, listed explicitly.
pub fn shortest_paths(adj: &[Vec<bool>], dist: &[Vec<usize>], s: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if dist[s][t] == usize::MAX {
        return out;
    }
    let mut path = vec![s];
    extend(adj, dist, t, &mut path, &mut out);
    out
}

fn extend(adj: &[Vec<bool>], dist: &[Vec<usize>], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let u = *path.last().unwrap();
    if u == t {
        out.push(path.clone());
        return;
    }
    for w in 0..adj.len() {
        if adj[u][w] && dist[w][t] != usize::MAX && dist[w][t] + 1 == dist[u][t] {
            path.push(w);
            extend(adj, dist, t, path, out);
            path.pop();
        }
    }
}

/// `pass[i][s][t] = n_st^i / g_st` for ordered pairs, from explicit path lists.
pub fn pass_fractions(g: &VanetGraph) -> Vec<Vec<Vec<f64>>> {
    let n = g.n();
    let adj = adjacency(g);
    let dist = floyd_warshall(&adj);
    let mut frac = vec![vec![vec![0.0; n]; n]; n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let paths = shortest_paths(&adj, &dist, s, t);
            if paths.is_empty() {
                continue;
            }
            let total = paths.len() as f64;
            for p in &paths {
                for &i in &p[1..p.len() - 1] {
                    frac[i][s][t] += 1.0 / total;
                }
            }
        }
    }
    frac
}

/// Normalized betweenness from explicit path enumeration over unordered pairs.
pub fn betweenness_oracle(g: &VanetGraph) -> Vec<f64> {
    let n = g.n();
    if n < 3 {
        return vec![0.0; n];
    }
    let frac = pass_fractions(g);
    let norm = 2.0 / ((n - 1) * (n - 2)) as f64;
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            for s in 0..n {
                for t in s + 1..n {
                    if s != i && t != i {
                        sum += frac[i][s][t];
                    }
                }
            }
            norm * sum
        })
        .collect()
}

/// Triple-loop triangle count through each node.
pub fn clustering_oracle(g: &VanetGraph) -> Vec<f64> {
    let adj = adjacency(g);
    let n = g.n();
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
            let k = nbrs.len();
            if k <= 1 {
                return 0.0;
            }
            let mut links = 0;
            for a in 0..k {
                for b in a + 1..k {
                    if adj[nbrs[a]][nbrs[b]] {
                        links += 1;
                    }
                }
            }
            links as f64 / (k * (k - 1) / 2) as f64
        })
        .collect()
}

/// Pair scan over the set of nodes at hop distance 1 or 2.
pub fn two_neighbor_oracle(g: &VanetGraph) -> Vec<f64> {
    let adj = adjacency(g);
    let dist = floyd_warshall(&adj);
    let n = g.n();
    (0..n)
        .map(|i| {
            let ball: Vec<usize> = (0..n).filter(|&j| dist[i][j] == 1 || dist[i][j] == 2).collect();
            let m = ball.len();
            if m <= 1 {
                return 0.0;
            }
            let mut links = 0;
            for a in 0..m {
                for b in a + 1..m {
                    if adj[ball[a]][ball[b]] {
                        links += 1;
                    }
                }
            }
            links as f64 / (m * (m - 1) / 2) as f64
        })
        .collect()
}

/// Node sets of connected components, via the distance matrix.
pub fn largest_component_oracle(g: &VanetGraph) -> Vec<usize> {
    let dist = floyd_warshall(&adjacency(g));
    let n = g.n();
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n {
        let comp: Vec<usize> = (0..n).filter(|&t| dist[s][t] != usize::MAX).collect();
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Mean hop distance over unordered pairs of the largest component.
pub fn path_length_oracle(g: &VanetGraph) -> Option<f64> {
    let comp = largest_component_oracle(g);
    if comp.len() < 2 {
        return None;
    }
    let dist = floyd_warshall(&adjacency(g));
    let mut sum = 0usize;
    let mut pairs = 0usize;
    for (a, &s) in comp.iter().enumerate() {
        for &t in &comp[a + 1..] {
            sum += dist[s][t];
            pairs += 1;
        }
    }
    Some(sum as f64 / pairs as f64)
}

/// `min cᵀx` over `{x : A x ≤ b}` by enumerating every basic solution
/// (square subsystems of tight constraints). Returns `None` when no vertex is
/// feasible. Requires the polyhedron to be pointed and the optimum attained.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    let m = a.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    if m < n {
        return None;
    }
    loop {
        let mat = nalgebra::DMatrix::from_fn(n, n, |r, k| a[subset[r]][k]);
        let rhs = nalgebra::DVector::from_fn(n, |r, _| b[subset[r]]);
        if mat.determinant().abs() > 1e-12 {
            if let Some(x) = mat.lu().solve(&rhs) {
                let x: Vec<f64> = x.iter().copied().collect();
                let feasible =
                    a.iter().zip(b).all(|(row, &bi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
                if feasible {
                    let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                    if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                        best = Some((obj, x));
                    }
                }
            }
        }
        // next n-combination of 0..m
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if subset[k] < m - n + k {
                subset[k] += 1;
                for j in k + 1..n {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn generalized_distance_oracle(i: usize, j: usize, r: &[f64], p: &[(f64, f64)], eps: f64) -> f64 {
    let d = ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt();
    eps * (r[i] + r[j]) + (1.0 - eps) * d
}

/// Farthest-first rule replayed literally: each round recomputes every
/// candidate's distance to its nearest chosen center from scratch.
pub fn greedy_replay(p: &[(f64, f64)], r: &[f64], k: usize, eps: f64) -> Vec<usize> {
    let n = p.len();
    let mut first = 0;
    for i in 1..n {
        if r[i] < r[first] {
            first = i;
        }
    }
    let mut centers = vec![first];
    while centers.len() < k {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for j in 0..n {
            if centers.contains(&j) {
                continue;
            }
            let d = centers.iter().map(|&c| generalized_distance_oracle(j, c, r, p, eps)).fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(j);
            }
        }
        centers.push(best.unwrap());
    }
    centers
}

pub fn labels_oracle(p: &[(f64, f64)], r: &[f64], centers: &[usize], eps: f64) -> Vec<usize> {
    (0..p.len())
        .map(|j| {
            if let Some(own) = centers.iter().position(|&c| c == j) {
                return own;
            }
            let mut best = 0;
            for idx in 1..centers.len() {
                if generalized_distance_oracle(j, centers[idx], r, p, eps)
                    < generalized_distance_oracle(j, centers[best], r, p, eps)
                {
                    best = idx;
                }
            }
            best
        })
        .collect()
}

/// Exhaustive optimum of the Euclidean k-center radius.
pub fn optimal_radius(p: &[(f64, f64)], k: usize) -> f64 {
    let n = p.len();
    let zeros = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let radius = (0..n)
            .filter(|j| !subset.contains(j))
            .map(|j| {
                subset.iter().map(|&c| generalized_distance_oracle(j, c, &zeros, p, 0.0)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(radius);
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < n - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}
