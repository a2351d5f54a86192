//! Complex-network statistics on hop-count shortest paths.
//!
//! Betweenness and path length ignore edge impedances: impedance is itself a
//! function of betweenness, so the topology metrics are taken on the bare
//! communication graph.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::VanetGraph;

/// Sources per work unit in the parallel passes. Fixed, so the reduction
/// order (and therefore every bit of the result) does not depend on the
/// number of threads.
pub(crate) const SOURCE_CHUNK: usize = 32;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("path length undefined: largest component has {0} node(s)")]
    UndefinedPathLength(usize),
    #[error("power-law fit needs at least 3 distinct degrees ≥ k_min with nonzero mass, found {0}")]
    InsufficientSupport(usize),
    #[error("metrics export failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub n: usize,
    pub counts: BTreeMap<usize, usize>,
}

impl DegreeDistribution {
    pub fn p(&self, k: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.counts.get(&k).map_or(0.0, |&c| c as f64 / self.n as f64)
    }

    /// `(k, p(k))` for every degree present.
    pub fn probabilities(&self) -> Vec<(usize, f64)> {
        self.counts.iter().map(|(&k, &c)| (k, c as f64 / self.n as f64)).collect()
    }
}

pub fn degree_distribution(g: &VanetGraph) -> DegreeDistribution {
    let mut counts = BTreeMap::new();
    for i in 0..g.n() {
        *counts.entry(g.degree(i)).or_insert(0) += 1;
    }
    DegreeDistribution { n: g.n(), counts }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `E_i / (k_i (k_i − 1) / 2)`, and 0 when `k_i ≤ 1`.
pub fn clustering_coefficient(g: &VanetGraph, i: usize) -> f64 {
    let nbrs = g.neighbors(i);
    let k = nbrs.len();
    if k <= 1 {
        return 0.0;
    }
    let links: usize = nbrs.iter().map(|&u| sorted_intersection_len(nbrs, g.neighbors(u))).sum::<usize>() / 2;
    links as f64 / (k * (k - 1) / 2) as f64
}

pub fn clustering_coefficients(g: &VanetGraph) -> Vec<f64> {
    (0..g.n()).into_par_iter().map(|i| clustering_coefficient(g, i)).collect()
}

/// Edge density of the set of nodes one or two hops from `i` (excluding
/// `i`); 0 when that set has fewer than two members.
pub fn two_neighbor_clustering(g: &VanetGraph, i: usize) -> f64 {
    let mut member = vec![false; g.n()];
    let mut ball = Vec::new();
    for &u in g.neighbors(i) {
        if !member[u] {
            member[u] = true;
            ball.push(u);
        }
    }
    for &u in g.neighbors(i) {
        for &w in g.neighbors(u) {
            if w != i && !member[w] {
                member[w] = true;
                ball.push(w);
            }
        }
    }
    let m = ball.len();
    if m <= 1 {
        return 0.0;
    }
    let twice_edges: usize = ball.iter().map(|&u| g.neighbors(u).iter().filter(|&&w| member[w]).count()).sum();
    (twice_edges / 2) as f64 / (m * (m - 1) / 2) as f64
}

pub fn two_neighbor_clusterings(g: &VanetGraph) -> Vec<f64> {
    (0..g.n()).into_par_iter().map(|i| two_neighbor_clustering(g, i)).collect()
}

/// Scratch buffers for one breadth-first shortest-path counting pass.
pub(crate) struct PathCounter {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl PathCounter {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::new(),
        }
    }

    /// Runs a BFS from `s` and accumulates the dependency
    /// `δ_s(v) = Σ_t σ_st(v)/σ_st` of `s` on every other node.
    pub(crate) fn dependencies(&mut self, g: &VanetGraph, s: usize) -> &[f64] {
        for &v in &self.order {
            self.dist[v] = -1;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in g.neighbors(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
        // predecessors of w are exactly its neighbors one level closer to s
        for &w in self.order.iter().rev() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in g.neighbors(w) {
                if self.dist[v] >= 0 && self.dist[v] + 1 == self.dist[w] {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
        }
        self.delta[s] = 0.0;
        &self.delta
    }

    pub(crate) fn reached(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn hops(&self, v: usize) -> i64 {
        self.dist[v]
    }
}

/// Normalized betweenness `B_i = 2/((N−1)(N−2)) Σ_{s<t} n_st^i / g_st` via
/// Brandes' accumulation. Graphs with fewer than three nodes get all zeros.
pub fn betweenness(g: &VanetGraph) -> Vec<f64> {
    let n = g.n();
    if n < 3 {
        log::warn!("betweenness needs N ≥ 3 (N = {n}); returning zeros");
        return vec![0.0; n];
    }
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut counter = PathCounter::new(n);
            let mut acc = vec![0.0; n];
            for &s in chunk {
                // unreached nodes carry zero dependency
                for (a, d) in acc.iter_mut().zip(counter.dependencies(g, s)) {
                    *a += d;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // each unordered pair was visited from both ends
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    total.iter().map(|v| v * scale).collect()
}

/// Connected components as sorted node lists, largest first (ties: smallest
/// first member).
pub fn components(g: &VanetGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.n()];
    let mut comps = Vec::new();
    for start in 0..g.n() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

pub fn largest_component(g: &VanetGraph) -> Vec<usize> {
    components(g).into_iter().next().unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLengthStats {
    pub mean: f64,
    pub component_size: usize,
    pub components: usize,
}

/// Mean hop distance over unordered pairs of the largest component.
pub fn average_path_length(g: &VanetGraph) -> Result<PathLengthStats, MetricsError> {
    let comps = components(g);
    let largest = comps.first().cloned().unwrap_or_default();
    let size = largest.len();
    if size < 2 {
        return Err(MetricsError::UndefinedPathLength(size));
    }
    let total: u64 = largest
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut counter = PathCounter::new(g.n());
            let mut sum = 0u64;
            for &s in chunk {
                counter.dependencies(g, s);
                sum += counter.reached().iter().map(|&v| counter.hops(v) as u64).sum::<u64>();
            }
            sum
        })
        .sum();
    let pairs = (size * (size - 1)) as f64;
    Ok(PathLengthStats { mean: total as f64 / pairs, component_size: size, components: comps.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Slope of `log p(k)` against `log k`.
    pub exponent: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares line through `(ln k, ln p(k))` for `k ≥ k_min`, `p(k) > 0`.
pub fn powerlaw_fit(dist: &DegreeDistribution, k_min: usize) -> Result<PowerLawFit, MetricsError> {
    let pts: Vec<(f64, f64)> = dist
        .probabilities()
        .into_iter()
        .filter(|&(k, p)| k >= k_min.max(1) && p > 0.0)
        .map(|(k, p)| ((k as f64).ln(), p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(MetricsError::InsufficientSupport(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 0.0 };
    Ok(PowerLawFit { exponent: slope, r2, points: pts.len() })
}

/// Per-node statistics, `id,k,C,C2,B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub id: String,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MetricsSummary {
    pub N: usize,
    pub E: usize,
    pub C_bar: f64,
    pub l_bar: Option<f64>,
    pub fit_exponent: Option<f64>,
    pub fit_r2: Option<f64>,
    pub largest_component: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkReport {
    pub nodes: Vec<NodeMetrics>,
    pub summary: MetricsSummary,
    pub degrees: DegreeDistribution,
}

/// Everything the metrics command reports. Betweenness stored on the graph is
/// reused when present.
pub fn analyze(g: &VanetGraph, k_min: usize) -> NetworkReport {
    let b = g.betweenness().map(<[f64]>::to_vec).unwrap_or_else(|| betweenness(g));
    let c = clustering_coefficients(g);
    let c2 = two_neighbor_clusterings(g);
    let degrees = degree_distribution(g);
    let nodes: Vec<NodeMetrics> = (0..g.n())
        .map(|i| NodeMetrics { id: g.id(i).to_string(), k: g.degree(i), c: c[i], c2: c2[i], b: b[i] })
        .collect();
    let c_bar = if g.n() > 0 { c.iter().sum::<f64>() / g.n() as f64 } else { 0.0 };
    let paths = average_path_length(g).ok();
    let fit = powerlaw_fit(&degrees, k_min).ok();
    let comps = components(g);
    let summary = MetricsSummary {
        N: g.n(),
        E: g.edge_count(),
        C_bar: c_bar,
        l_bar: paths.map(|p| p.mean),
        fit_exponent: fit.map(|f| f.exponent),
        fit_r2: fit.map(|f| f.r2),
        largest_component: comps.first().map_or(0, Vec::len),
        components: comps.len(),
    };
    NetworkReport { nodes, summary, degrees }
}

impl NetworkReport {
    pub fn write_node_csv<W: Write>(&self, writer: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.nodes {
            w.serialize(row).map_err(|e| MetricsError::Serialize(e.to_string()))?;
        }
        w.flush().map_err(|e| MetricsError::Serialize(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String, MetricsError> {
        serde_json::to_string_pretty(&self.summary).map_err(|e| MetricsError::Serialize(e.to_string()))
    }
}
