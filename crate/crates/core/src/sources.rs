//! Information-source selection under the hybrid traffic model.
//!
//! `p(i|s)` is the probability that a packet from `s` to a uniformly chosen
//! destination passes intermediary `i` on a random hop-shortest route. For a
//! source distribution `p`, vehicle `i` carries `q_i = (A·p)_i`, and the network
//! stays congestion-free up to `R_c = C / max_i R_i·q_i`. Maximizing `R_c` is the
//! min-max LP `min Λ  s.t.  R·A·p ≤ Λ·1,  pᵀ1 = 1,  p ≥ 0`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::VanetGraph;
use crate::metrics::{largest_component, PathCounter, SOURCE_CHUNK};
use crate::optim::{solve_lp, Bound, LinearProgram, LpError, SolveStatus};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("source selection needs at least 3 connected vehicles, got {0}")]
    Degenerate(usize),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid source problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("source LP ended with status {0:?}")]
    Solver(SolveStatus),
    #[error("source export failed: {0}")]
    Serialize(String),
}

/// `a[i][s] = p(i|s)` over the vehicles of the largest component; `nodes[k]`
/// is the graph index of local vehicle `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassMatrix {
    pub nodes: Vec<usize>,
    pub a: Vec<Vec<f64>>,
}

/// Hop-count pass probabilities. A disconnected graph is reduced to its
/// largest component.
pub fn pass_matrix(g: &VanetGraph) -> Result<PassMatrix, SourceError> {
    let nodes = largest_component(g);
    if nodes.len() < g.n() {
        log::warn!("graph is disconnected; using the largest component ({} of {} vehicles)", nodes.len(), g.n());
    }
    let n = nodes.len();
    if n < 3 {
        return Err(SourceError::Degenerate(n));
    }
    let mut local = vec![usize::MAX; g.n()];
    for (k, &v) in nodes.iter().enumerate() {
        local[v] = k;
    }
    let scale = 1.0 / (n - 1) as f64;
    // columns[s][i] = p(i|s)
    let columns: Vec<Vec<f64>> = nodes
        .par_chunks(SOURCE_CHUNK)
        .flat_map_iter(|chunk| {
            let mut counter = PathCounter::new(g.n());
            chunk
                .iter()
                .map(|&s| {
                    let delta = counter.dependencies(g, s);
                    let mut col = vec![0.0; n];
                    for (k, &v) in nodes.iter().enumerate() {
                        col[k] = delta[v] * scale;
                    }
                    col[local[s]] = 0.0;
                    col
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let a = (0..n).map(|i| columns.iter().map(|col| col[i]).collect()).collect();
    Ok(PassMatrix { nodes, a })
}

impl PassMatrix {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `q = A·p`.
    pub fn pass_probability(&self, p: &[f64]) -> Vec<f64> {
        pass_probability(&self.a, p)
    }
}

/// `q_i = Σ_s p(s)·p(i|s)`.
pub fn pass_probability(a: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(p).map(|(x, y)| x * y).sum()).collect()
}

/// Network capacity `R_c`; infinite when no vehicle ever relays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "kebab-case")]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    fn from_max(scale: f64, max: f64) -> Self {
        if max > 0.0 {
            Capacity::Finite(scale / max)
        } else {
            Capacity::Infinite
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Capacity::Finite(v) => *v,
            Capacity::Infinite => f64::INFINITY,
        }
    }
}

/// `max_i R_i·q_i`.
pub fn max_load(a: &[Vec<f64>], p: &[f64], r: &[f64]) -> f64 {
    pass_probability(a, p).iter().zip(r).map(|(q, r)| q * r).fold(0.0, f64::max)
}

/// `R_c = C / max_i R_i·q_i`.
pub fn capacity(a: &[Vec<f64>], p: &[f64], r: &[f64], scale: f64) -> Capacity {
    Capacity::from_max(scale, max_load(a, p, r))
}

/// Pass matrix, vehicle impedances (aligned with `a`) and the scale `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProblem {
    pub a: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub scale: f64,
}

impl SourceProblem {
    pub fn new(a: Vec<Vec<f64>>, r: Vec<f64>, scale: f64) -> Result<Self, SourceError> {
        let n = a.len();
        if r.len() != n {
            return Err(SourceError::LengthMismatch { expected: n, got: r.len() });
        }
        if let Some(row) = a.iter().find(|row| row.len() != n) {
            return Err(SourceError::LengthMismatch { expected: n, got: row.len() });
        }
        if r.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(SourceError::Invalid("vehicle impedances must be positive and finite".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SourceError::Invalid(format!("capacity scale must be positive, got {scale}")));
        }
        Ok(Self { a, r, scale })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// The min-max program over `(p, Λ)`; rows that can never load (`A_i = 0`)
    /// are left out.
    pub fn to_lp(&self) -> LinearProgram {
        let n = self.n();
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut lp = LinearProgram::new(c);
        for (row, &r) in self.a.iter().zip(&self.r) {
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut coeffs: Vec<f64> = row.iter().map(|v| r * v).collect();
            coeffs.push(-1.0);
            lp = lp.le(coeffs, 0.0);
        }
        let mut sum = vec![1.0; n + 1];
        sum[n] = 0.0;
        lp = lp.eq(sum, 1.0);
        lp.bounds[n] = Bound::FREE;
        lp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSolution {
    pub p: Vec<f64>,
    pub lambda: f64,
    pub capacity: Capacity,
    /// Number of vehicles with `p_s > 1e-9`.
    pub support: usize,
}

/// Solves the source LP. When no vehicle ever relays every distribution is
/// optimal; the uniform one is returned with infinite capacity.
pub fn optimize_sources(prob: &SourceProblem) -> Result<SourceSolution, SourceError> {
    let n = prob.n();
    if n == 0 {
        return Err(SourceError::Degenerate(0));
    }
    let (p, lambda) = if prob.a.iter().flatten().all(|&v| v == 0.0) {
        (vec![1.0 / n as f64; n], 0.0)
    } else {
        let rep = solve_lp(&prob.to_lp())?;
        if !rep.is_optimal() {
            return Err(SourceError::Solver(rep.status));
        }
        let lambda = rep.x[n];
        let mut p = rep.x;
        p.truncate(n);
        (p, lambda)
    };
    let support = p.iter().filter(|&&v| v > 1e-9).count();
    Ok(SourceSolution { capacity: Capacity::from_max(prob.scale, lambda), p, lambda, support })
}

fn ser<E: std::fmt::Display>(e: E) -> SourceError {
    SourceError::Serialize(e.to_string())
}

/// `vehicle_id,value` rows sorted by value descending (index ascending on ties).
pub fn write_sorted_csv<W: Write>(writer: W, header: &str, ids: &[String], values: &[f64]) -> Result<(), SourceError> {
    if ids.len() != values.len() {
        return Err(SourceError::LengthMismatch { expected: ids.len(), got: values.len() });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vehicle_id", header]).map_err(ser)?;
    for i in order {
        w.write_record([ids[i].clone(), values[i].to_string()]).map_err(ser)?;
    }
    w.flush().map_err(ser)
}

impl SourceSolution {
    pub fn to_json(&self) -> Result<String, SourceError> {
        serde_json::to_string_pretty(self).map_err(ser)
    }
}
