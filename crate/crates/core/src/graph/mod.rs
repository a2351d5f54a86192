//! The weighted undirected vehicular graph `G = (V, E, R)`.
//!
//! Construction is two-pass: [`build_graph`] finds the edge set (pairs within
//! communication range `r`) and degrees; once betweenness has been attached,
//! [`VanetGraph::assign_impedances`] fills in the link communication impedance
//! of every edge. [`build_weighted_graph`] runs both passes.
//!
//! Link impedance combines a topology term, path loss, an SNR benefit and a
//! handover penalty:
//!
//! ```text
//! R_ij = max(floor_R, α·(k_i·B_i + k_j·B_j)^υ + β·L_u(d_ij)^ψ − μ·(ϑ/d_ij)^ξ + ζ·n_s)
//! ```
//!
//! `L_u` takes `d_ij` in kilometers; `ϑ/d_ij` uses meters. The floor keeps
//! every weight strictly positive, which shortest-path routing and the
//! capacity model rely on. Coincident vehicles (`d_ij = 0`) get the floor,
//! the limit of the formula as `d → 0` whenever `μ > 0` or `ψ = 1`.

mod grid;
pub mod radio;

use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use radio::{cell_side, handover_count, path_loss, station_distance, throughput, ThroughputParams};

use crate::trace::VehicleSnapshot;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("({0}, {1}) is not an edge")]
    NotAnEdge(usize, usize),
    #[error("node {0} out of range (n = {1})")]
    NodeOutOfRange(usize, usize),
    #[error("betweenness has not been computed for this graph")]
    MissingBetweenness,
    #[error("edge impedances have not been assigned")]
    MissingWeights,
    #[error("graph serialization failed: {0}")]
    Serialize(String),
}

/// Scalar parameters of the link and vehicle impedance models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub zeta: f64,
    pub upsilon: f64,
    pub psi: f64,
    pub xi: f64,
    /// Energy-noise-ratio scale ϑ, meters.
    pub theta: f64,
    /// Maximum communication range, meters.
    pub r: f64,
    /// Cell radius, meters.
    pub r_c: f64,
    /// Carrier frequency, MHz.
    pub f_c: f64,
    pub floor_r: f64,
}

impl Default for ImpedanceParams {
    /// Non-normative defaults; none of these values come from measurement.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
            mu: 0.1,
            zeta: 0.5,
            upsilon: 1.0,
            psi: 1.0,
            xi: 1.0,
            theta: 100.0,
            r: 500.0,
            r_c: 300.0,
            f_c: 2000.0,
            floor_r: 1e-6,
        }
    }
}

impl ImpedanceParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        let fields = [
            self.alpha,
            self.beta,
            self.mu,
            self.zeta,
            self.upsilon,
            self.psi,
            self.xi,
            self.theta,
            self.r,
            self.r_c,
            self.f_c,
            self.floor_r,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(GraphError::InvalidParams("all impedance parameters must be finite".into()));
        }
        if self.r <= 0.0 || self.r_c <= 0.0 || self.f_c <= 0.0 || self.floor_r <= 0.0 {
            return Err(GraphError::InvalidParams("r, r_c, f_c and floor_R must be positive".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.mu < 0.0 || self.zeta < 0.0 {
            return Err(GraphError::InvalidParams("α, β, μ, ζ must be nonnegative".into()));
        }
        Ok(())
    }

    /// Link impedance from its ingredients: `topology = k_i·B_i + k_j·B_j`,
    /// link length in meters and the handover count along the link.
    pub fn link_impedance(&self, topology: f64, distance_m: f64, handovers: u32) -> f64 {
        if distance_m <= 0.0 {
            return self.floor_r;
        }
        let mut value = 0.0;
        if self.alpha != 0.0 {
            value += self.alpha * topology.powf(self.upsilon);
        }
        if self.beta != 0.0 {
            // path loss is only negative for links of a few centimeters
            let loss = (42.6 + 26.0 * (distance_m / 1000.0).log10() + 20.0 * self.f_c.log10()).max(0.0);
            value += self.beta * loss.powf(self.psi);
        }
        if self.mu != 0.0 {
            value -= self.mu * (self.theta / distance_m).powf(self.xi);
        }
        value += self.zeta * f64::from(handovers);
        value.max(self.floor_r)
    }

    /// `α·(k_i·B_i)^υ + β·rate^ψ`.
    pub fn vehicle_impedance_terms(&self, topology: f64, rate: f64) -> f64 {
        let mut value = 0.0;
        if self.alpha != 0.0 {
            value += self.alpha * topology.powf(self.upsilon);
        }
        if self.beta != 0.0 {
            value += self.beta * rate.powf(self.psi);
        }
        value
    }
}

/// Undirected graph over the vehicles of one snapshot. Node `i` is the `i`-th
/// vehicle in sorted id order; neighbor lists are sorted and weights, when
/// present, are stored parallel to them (each edge twice, identical values).
#[derive(Debug, Clone, PartialEq)]
pub struct VanetGraph {
    ids: Vec<String>,
    positions: Vec<(f64, f64)>,
    neighbors: Vec<Vec<usize>>,
    weights: Option<Vec<Vec<f64>>>,
    betweenness: Option<Vec<f64>>,
    params: Option<ImpedanceParams>,
}

/// Edge geometry for export: `d_ij` (m), handovers and impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub d_ij: f64,
    pub n_s: u32,
    pub r_ij: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    x: f64,
    y: f64,
    degree: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    betweenness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<ImpedanceParams>,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl VanetGraph {
    /// Abstract topology with nodes named `"0"…"n-1"` at the origin; used for
    /// analytic cases where geometry is irrelevant.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(GraphError::NodeOutOfRange(i.max(j), n));
            }
            if i == j {
                return Err(GraphError::Domain(format!("self-loop at node {i}")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            positions: vec![(0.0, 0.0); n],
            neighbors,
            weights: None,
            betweenness: None,
            params: None,
        })
    }

    /// Abstract topology with explicit positive edge weights.
    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let pairs: Vec<_> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut g = Self::from_edges(n, &pairs)?;
        let lookup: HashMap<(usize, usize), f64> = edges.iter().map(|&(i, j, w)| ((i.min(j), i.max(j)), w)).collect();
        if lookup.values().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(GraphError::Domain("edge weights must be positive and finite".into()));
        }
        g.weights = Some(
            g.neighbors
                .iter()
                .enumerate()
                .map(|(i, list)| list.iter().map(|&j| lookup[&(i.min(j), i.max(j))]).collect())
                .collect(),
        );
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|v| v == id)
    }

    pub fn position(&self, i: usize) -> (f64, f64) {
        self.positions[i]
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    pub fn betweenness(&self) -> Option<&[f64]> {
        self.betweenness.as_deref()
    }

    pub fn set_betweenness(&mut self, values: Vec<f64>) -> Result<(), GraphError> {
        if values.len() != self.n() {
            return Err(GraphError::Domain(format!(
                "betweenness vector has {} entries for {} nodes",
                values.len(),
                self.n()
            )));
        }
        self.betweenness = Some(values);
        Ok(())
    }

    pub fn params(&self) -> Option<&ImpedanceParams> {
        self.params.as_ref()
    }

    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    /// Impedance of edge `(i, j)`, if weights are assigned and the edge exists.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let weights = self.weights.as_ref()?;
        let pos = self.neighbors.get(i)?.binary_search(&j).ok()?;
        Some(weights[i][pos])
    }

    /// Neighbors of `i` paired with the impedance of the connecting edge.
    pub fn weighted_neighbors(&self, i: usize) -> Result<impl Iterator<Item = (usize, f64)> + '_, GraphError> {
        let weights = self.weights.as_ref().ok_or(GraphError::MissingWeights)?;
        Ok(self.neighbors[i].iter().copied().zip(weights[i].iter().copied()))
    }

    /// `k_i·B_i`.
    pub fn load(&self, i: usize) -> Result<f64, GraphError> {
        let b = self.betweenness.as_ref().ok_or(GraphError::MissingBetweenness)?;
        Ok(self.degree(i) as f64 * b[i])
    }

    pub fn handovers(&self, i: usize, j: usize, r_c: f64) -> u32 {
        handover_count(self.positions[i], self.positions[j], r_c)
    }

    /// Link communication impedance of an existing edge.
    pub fn link_impedance(&self, i: usize, j: usize, params: &ImpedanceParams) -> Result<f64, GraphError> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(GraphError::NodeOutOfRange(i.max(j), n));
        }
        if !self.has_edge(i, j) {
            return Err(GraphError::NotAnEdge(i, j));
        }
        let topology = self.load(i)? + self.load(j)?;
        Ok(params.link_impedance(topology, self.distance(i, j), self.handovers(i, j, params.r_c)))
    }

    /// Second construction pass: compute and store `R_ij` on every edge.
    pub fn assign_impedances(&mut self, params: &ImpedanceParams) -> Result<(), GraphError> {
        params.validate()?;
        if self.betweenness.is_none() {
            return Err(GraphError::MissingBetweenness);
        }
        let mut weights = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let mut row = Vec::with_capacity(self.degree(i));
            for &j in &self.neighbors[i] {
                // compute with the smaller index first so both copies are bit-identical
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                row.push(self.link_impedance(a, b, params)?);
            }
            weights.push(row);
        }
        self.weights = Some(weights);
        self.params = Some(*params);
        Ok(())
    }

    /// Vehicle-to-infrastructure impedance `R_i` for a given uplink rate.
    pub fn vehicle_impedance(&self, i: usize, rate: f64, params: &ImpedanceParams) -> Result<f64, GraphError> {
        if i >= self.n() {
            return Err(GraphError::NodeOutOfRange(i, self.n()));
        }
        Ok(params.vehicle_impedance_terms(self.load(i)?, rate))
    }

    /// Uplink rate of every vehicle to the station at the center of its cell.
    /// With shadowing enabled, one N(0, σ) dB draw per vehicle (node order,
    /// seeded) is added to the path loss.
    pub fn vehicle_rates(
        &self,
        params: &ImpedanceParams,
        tp: &ThroughputParams,
        seed: u64,
    ) -> Result<Vec<f64>, GraphError> {
        params.validate()?;
        tp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shadow = if tp.shadowing_sigma_db > 0.0 {
            Some(Normal::new(0.0, tp.shadowing_sigma_db).map_err(|e| GraphError::InvalidParams(e.to_string()))?)
        } else {
            None
        };
        self.positions
            .iter()
            .map(|&p| {
                let d_km = station_distance(p, params.r_c, 1.0) / 1000.0;
                let mut gamma = tp.sinr(d_km, params.f_c)?;
                if let Some(dist) = &shadow {
                    gamma *= 10f64.powf(-dist.sample(&mut rng) / 10.0);
                }
                tp.rate_from_sinr(gamma)
            })
            .collect()
    }

    /// `R_i` for every vehicle, using [`VanetGraph::vehicle_rates`].
    pub fn vehicle_impedances(
        &self,
        params: &ImpedanceParams,
        tp: &ThroughputParams,
        seed: u64,
    ) -> Result<Vec<f64>, GraphError> {
        let rates = self.vehicle_rates(params, tp, seed)?;
        rates.iter().enumerate().map(|(i, &rate)| self.vehicle_impedance(i, rate, params)).collect()
    }

    /// Mean impedance over all edges, `None` for an edgeless graph.
    pub fn mean_impedance(&self) -> Option<f64> {
        let weights = self.weights.as_ref()?;
        let (sum, count) = self
            .edges()
            .map(|(i, j)| weights[i][self.neighbors[i].binary_search(&j).unwrap()])
            .fold((0.0, 0usize), |(s, c), w| (s + w, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        let r_c = self.params.map(|p| p.r_c);
        self.edges()
            .map(|(i, j)| EdgeRecord {
                i,
                j,
                d_ij: self.distance(i, j),
                n_s: r_c.map_or(0, |r_c| self.handovers(i, j, r_c)),
                r_ij: self.weight(i, j).unwrap_or(f64::NAN),
            })
            .collect()
    }

    /// Edge list CSV `i,j,d_ij,n_s,R_ij`.
    pub fn write_edge_csv<W: Write>(&self, writer: W) -> Result<(), GraphError> {
        let mut w = csv::Writer::from_writer(writer);
        let ser = |e: csv::Error| GraphError::Serialize(e.to_string());
        w.write_record(["i", "j", "d_ij", "n_s", "R_ij"]).map_err(ser)?;
        for e in self.edge_records() {
            w.write_record([
                e.i.to_string(),
                e.j.to_string(),
                e.d_ij.to_string(),
                e.n_s.to_string(),
                e.r_ij.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| GraphError::Serialize(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, GraphError> {
        let nodes = (0..self.n())
            .map(|i| NodeRecord {
                id: self.ids[i].clone(),
                x: self.positions[i].0,
                y: self.positions[i].1,
                degree: self.degree(i),
                betweenness: self.betweenness.as_ref().map(|b| b[i]),
            })
            .collect();
        let file = GraphFile { params: self.params, nodes, edges: self.edge_records() };
        serde_json::to_string_pretty(&file).map_err(|e| GraphError::Serialize(e.to_string()))
    }

    /// Rebuilds a graph from [`VanetGraph::to_json`] output. Weights are
    /// restored when every edge carries a finite impedance.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Serialize(e.to_string()))?;
        let n = file.nodes.len();
        let pairs: Vec<_> = file.edges.iter().map(|e| (e.i, e.j)).collect();
        let mut g = Self::from_edges(n, &pairs)?;
        g.ids = file.nodes.iter().map(|v| v.id.clone()).collect();
        g.positions = file.nodes.iter().map(|v| (v.x, v.y)).collect();
        if file.nodes.iter().all(|v| v.betweenness.is_some()) && n > 0 {
            g.betweenness = Some(file.nodes.iter().map(|v| v.betweenness.unwrap_or(0.0)).collect());
        }
        if !file.edges.is_empty() && file.edges.iter().all(|e| e.r_ij.is_finite()) {
            let lookup: HashMap<(usize, usize), f64> =
                file.edges.iter().map(|e| ((e.i.min(e.j), e.i.max(e.j)), e.r_ij)).collect();
            g.weights = Some(
                g.neighbors
                    .iter()
                    .enumerate()
                    .map(|(i, list)| list.iter().map(|&j| lookup[&(i.min(j), i.max(j))]).collect())
                    .collect(),
            );
        }
        g.params = file.params;
        Ok(g)
    }
}

/// First construction pass: nodes in snapshot id order, an edge for every pair
/// at distance `≤ r` (found through a grid of cell size `r`), no weights yet.
pub fn build_graph(snapshot: &VehicleSnapshot, params: &ImpedanceParams) -> Result<VanetGraph, GraphError> {
    params.validate()?;
    if snapshot.is_empty() {
        return Err(GraphError::Domain("snapshot has no vehicles".into()));
    }
    let ids: Vec<String> = snapshot.positions.keys().cloned().collect();
    let positions: Vec<(f64, f64)> = snapshot.positions.values().copied().collect();
    Ok(graph_from_points(ids, positions, params.r))
}

pub(crate) fn graph_from_points(ids: Vec<String>, positions: Vec<(f64, f64)>, r: f64) -> VanetGraph {
    let mut neighbors = vec![Vec::new(); positions.len()];
    for (i, j) in grid::pairs_within(&positions, r) {
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    VanetGraph { ids, positions, neighbors, weights: None, betweenness: None, params: None }
}

/// Geometric graph over bare points (ids `"0"…`), mainly for experiments.
pub fn geometric_graph(points: &[(f64, f64)], r: f64) -> VanetGraph {
    graph_from_points((0..points.len()).map(|i| i.to_string()).collect(), points.to_vec(), r)
}

/// Both construction passes: edges, hop-count betweenness, impedances.
pub fn build_weighted_graph(snapshot: &VehicleSnapshot, params: &ImpedanceParams) -> Result<VanetGraph, GraphError> {
    let mut g = build_graph(snapshot, params)?;
    let b = crate::metrics::betweenness(&g);
    g.set_betweenness(b)?;
    g.assign_impedances(params)?;
    Ok(g)
}
