//! V2V traffic allocation over fixed impedance-shortest paths.
//!
//! Each source `s_i` routes its share `x_i` of the total task quantity `Q` to
//! one destination along its Dijkstra path. With `A` the traffic-edge
//! incidence matrix over the edges used by at least one path and `R_w` the
//! path impedance sums, the allocation solves
//!
//! ```text
//! min R_wᵀx  s.t.  x ≥ 0,  xᵀ1 ≥ Q,  A·x ≤ c
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, VanetGraph};
use crate::optim::{barrier_solve, solve_lp, BarrierOptions, BarrierProblem, LpError, SolveReport};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no path from {vehicle} to {dest}")]
    NoPath { vehicle: String, dest: String },
    #[error("source {0} is the destination")]
    SourceIsDestination(String),
    #[error("source {0} listed twice")]
    DuplicateSource(String),
    #[error("edge ({0}, {1}) has non-positive impedance {2}")]
    NonPositiveWeight(usize, usize, f64),
    #[error("invalid allocation input: {0}")]
    Invalid(String),
    #[error("allocation export failed: {0}")]
    Serialize(String),
}

/// Dijkstra label; ordered by cost, then hop count, then node sequence.
#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

impl Label {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.path.len().cmp(&other.path.len()))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    // reversed so BinaryHeap pops the smallest label
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Minimum-impedance path from `s` to `t` and its total impedance. Ties go to
/// fewer hops, then to the lexicographically smallest node sequence.
pub fn dijkstra(g: &VanetGraph, s: usize, t: usize) -> Result<(Vec<usize>, f64), TrafficError> {
    let n = g.n();
    for v in [s, t] {
        if v >= n {
            return Err(GraphError::NodeOutOfRange(v, n).into());
        }
    }
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    heap.push(Label { cost: 0.0, path: vec![s] });
    while let Some(label) = heap.pop() {
        let u = *label.path.last().unwrap();
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == t {
            return Ok((label.path, label.cost));
        }
        for (v, w) in g.weighted_neighbors(u)? {
            if !(w > 0.0) {
                return Err(TrafficError::NonPositiveWeight(u, v, w));
            }
            if done[v] {
                continue;
            }
            let mut path = label.path.clone();
            path.push(v);
            let cand = Label { cost: label.cost + w, path };
            if best[v].as_ref().is_none_or(|b| cand.key_cmp(b) == Ordering::Less) {
                best[v] = Some(cand.clone());
                heap.push(cand);
            }
        }
    }
    Err(TrafficError::NoPath { vehicle: g.id(s).to_string(), dest: g.id(t).to_string() })
}

/// Routed allocation problem; `edges` are the used edges `(u, v)` with
/// `u < v`, row-aligned with `incidence` and `capacity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProblem {
    pub sources: Vec<usize>,
    pub dest: usize,
    pub source_ids: Vec<String>,
    pub dest_id: String,
    pub demand: f64,
    pub capacity: Vec<f64>,
    pub paths: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    /// `E × n`, `incidence[e][i] = 1` iff path `i` crosses edge `e`.
    pub incidence: Vec<Vec<f64>>,
    /// `R_w`.
    pub cost: Vec<f64>,
}

/// Routes every source to `dest` and assembles `A` and `R_w` with uniform
/// link capacity `c`.
pub fn build_problem(
    g: &VanetGraph,
    sources: &[usize],
    dest: usize,
    demand: f64,
    c: f64,
) -> Result<TrafficProblem, TrafficError> {
    if sources.is_empty() {
        return Err(TrafficError::Invalid("no sources".into()));
    }
    if !(demand > 0.0 && demand.is_finite()) {
        return Err(TrafficError::Invalid(format!("demand must be positive, got {demand}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(TrafficError::Invalid(format!("capacity must be positive, got {c}")));
    }
    let n = g.n();
    if dest >= n {
        return Err(GraphError::NodeOutOfRange(dest, n).into());
    }
    let mut seen = vec![false; n];
    for &s in sources {
        if s >= n {
            return Err(GraphError::NodeOutOfRange(s, n).into());
        }
        if s == dest {
            return Err(TrafficError::SourceIsDestination(g.id(s).to_string()));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(TrafficError::DuplicateSource(g.id(s).to_string()));
        }
    }

    let routed: Vec<(Vec<usize>, f64)> = sources.par_iter().map(|&s| dijkstra(g, s, dest)).collect::<Result<_, _>>()?;

    let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (path, _) in &routed {
        for w in path.windows(2) {
            edge_index.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0);
        }
    }
    for (k, slot) in edge_index.values_mut().enumerate() {
        *slot = k;
    }
    let mut incidence = vec![vec![0.0; sources.len()]; edge_index.len()];
    for (i, (path, _)) in routed.iter().enumerate() {
        for w in path.windows(2) {
            incidence[edge_index[&(w[0].min(w[1]), w[0].max(w[1]))]][i] = 1.0;
        }
    }
    Ok(TrafficProblem {
        sources: sources.to_vec(),
        dest,
        source_ids: sources.iter().map(|&s| g.id(s).to_string()).collect(),
        dest_id: g.id(dest).to_string(),
        demand,
        capacity: vec![c; edge_index.len()],
        cost: routed.iter().map(|(_, w)| *w).collect(),
        paths: routed.into_iter().map(|(p, _)| p).collect(),
        edges: edge_index.into_keys().collect(),
        incidence,
    })
}

impl TrafficProblem {
    pub fn commodities(&self) -> usize {
        self.sources.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Overrides the capacity of one used edge.
    pub fn set_edge_capacity(&mut self, u: usize, v: usize, c: f64) -> Result<(), TrafficError> {
        let key = (u.min(v), u.max(v));
        let e = self.edges.iter().position(|&k| k == key).ok_or(GraphError::NotAnEdge(u, v))?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(TrafficError::Invalid(format!("capacity must be positive, got {c}")));
        }
        self.capacity[e] = c;
        Ok(())
    }

    pub fn to_barrier(&self) -> BarrierProblem {
        BarrierProblem {
            cost: self.cost.clone(),
            incidence: self.incidence.clone(),
            demand: self.demand,
            capacity: self.capacity.clone(),
        }
    }

    /// `m_uv = Σ_i x_i·a_uv^i` for every used edge.
    pub fn loads(&self, x: &[f64]) -> Vec<f64> {
        self.incidence.iter().map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum()).collect()
    }

    pub fn to_json(&self) -> Result<String, TrafficError> {
        serde_json::to_string_pretty(self).map_err(|e| TrafficError::Serialize(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Simplex,
    Barrier,
}

impl FromStr for Method {
    type Err = TrafficError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplex" => Ok(Method::Simplex),
            "barrier" => Ok(Method::Barrier),
            other => Err(TrafficError::Invalid(format!("unknown method {other:?} (simplex | barrier)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub method: Method,
    pub x: Vec<f64>,
    /// `R_wᵀx`.
    pub cost: f64,
    pub loads: Vec<f64>,
    pub report: SolveReport,
}

impl Allocation {
    pub fn is_optimal(&self) -> bool {
        self.report.is_optimal()
    }
}

/// Solves the allocation LP. A non-optimal solve is returned with its status
/// rather than as an error.
pub fn allocate(p: &TrafficProblem, method: Method, options: &BarrierOptions) -> Result<Allocation, TrafficError> {
    let bp = p.to_barrier();
    let report = match method {
        Method::Simplex => solve_lp(&bp.as_lp())?,
        Method::Barrier => barrier_solve(&bp, options)?,
    };
    let loads = p.loads(&report.x);
    Ok(Allocation { method, x: report.x.clone(), cost: report.objective, loads, report })
}

fn ser<E: std::fmt::Display>(e: E) -> TrafficError {
    TrafficError::Serialize(e.to_string())
}

impl Allocation {
    /// `commodity,source,x_i,path` with the path as `>`-joined vehicle ids.
    pub fn write_csv<W: Write>(&self, writer: W, p: &TrafficProblem, g: &VanetGraph) -> Result<(), TrafficError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["commodity", "source", "x_i", "path"]).map_err(ser)?;
        for (i, path) in p.paths.iter().enumerate() {
            let route: Vec<&str> = path.iter().map(|&v| g.id(v)).collect();
            w.write_record([i.to_string(), p.source_ids[i].clone(), self.x[i].to_string(), route.join(">")])
                .map_err(ser)?;
        }
        w.flush().map_err(ser)
    }

    /// `u,v,load,capacity` for every used edge.
    pub fn write_loads_csv<W: Write>(&self, writer: W, p: &TrafficProblem, g: &VanetGraph) -> Result<(), TrafficError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["u", "v", "load", "capacity"]).map_err(ser)?;
        for (e, &(u, v)) in p.edges.iter().enumerate() {
            w.write_record([
                g.id(u).to_string(),
                g.id(v).to_string(),
                self.loads[e].to_string(),
                p.capacity[e].to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(ser)
    }
}
