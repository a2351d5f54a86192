//! Base-station placement by farthest-first selection on the generalized
//! distance `D_ij = ε·(R_i + R_j) + (1 − ε)·d_ij`.
//!
//! `D` is not a metric (`D_ii = 2εR_i`), so a node's distance to itself is
//! never consulted: centers are excluded from the candidate set and always
//! carry their own label.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("asked for {k} centers among {n} vehicles")]
    TooManyCenters { k: usize, n: usize },
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("impedance vector has {0} entries for {1} vehicles")]
    LengthMismatch(usize, usize),
    #[error("cluster export failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub epsilon: f64,
    /// First center; `None` picks the vehicle with the lowest impedance.
    pub seed_index: Option<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k: 5, epsilon: 0.5, seed_index: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Node indices in selection order.
    pub centers: Vec<usize>,
    /// Per-node index into `centers`.
    pub labels: Vec<usize>,
    /// Largest generalized distance from a non-center node to its center.
    pub radius: f64,
}

pub fn generalized_distance(i: usize, j: usize, impedance: &[f64], positions: &[(f64, f64)], epsilon: f64) -> f64 {
    let (a, b) = (positions[i], positions[j]);
    let d = (a.0 - b.0).hypot(a.1 - b.1);
    epsilon * (impedance[i] + impedance[j]) + (1.0 - epsilon) * d
}

fn validate(positions: &[(f64, f64)], impedance: &[f64], config: &ClusterConfig) -> Result<(), ClusterError> {
    let n = positions.len();
    if impedance.len() != n {
        return Err(ClusterError::LengthMismatch(impedance.len(), n));
    }
    if !(0.0..=1.0).contains(&config.epsilon) {
        return Err(ClusterError::InvalidConfig(format!("ε must lie in [0, 1], got {}", config.epsilon)));
    }
    if config.k == 0 || config.k > n {
        return Err(ClusterError::TooManyCenters { k: config.k, n });
    }
    if let Some(seed) = config.seed_index {
        if seed >= n {
            return Err(ClusterError::InvalidConfig(format!("seed index {seed} out of range for {n} vehicles")));
        }
    }
    Ok(())
}

/// Lowest-impedance vehicle, smallest index on ties.
pub fn default_seed(impedance: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in impedance.iter().enumerate() {
        if r < impedance[best] {
            best = i;
        }
    }
    best
}

/// Farthest-first traversal: each new center maximizes its minimum
/// generalized distance to the centers chosen so far (smallest index on ties).
pub fn select_centers(
    positions: &[(f64, f64)],
    impedance: &[f64],
    config: &ClusterConfig,
) -> Result<Vec<usize>, ClusterError> {
    validate(positions, impedance, config)?;
    let n = positions.len();
    let first = config.seed_index.unwrap_or_else(|| default_seed(impedance));
    let mut centers = vec![first];
    let mut is_center = vec![false; n];
    is_center[first] = true;
    let mut nearest = vec![f64::INFINITY; n];
    while centers.len() < config.k {
        let last = *centers.last().unwrap();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if is_center[j] {
                continue;
            }
            let d = generalized_distance(j, last, impedance, positions, config.epsilon);
            if d < nearest[j] {
                nearest[j] = d;
            }
            if best.is_none_or(|(_, bd)| nearest[j] > bd) {
                best = Some((j, nearest[j]));
            }
        }
        let (next, _) = best.expect("k ≤ n leaves a candidate");
        centers.push(next);
        is_center[next] = true;
    }
    Ok(centers)
}

/// Nearest-center labels (earliest-selected center wins ties) and the
/// resulting radius.
pub fn assign(
    positions: &[(f64, f64)],
    centers: &[usize],
    impedance: &[f64],
    epsilon: f64,
) -> Result<(Vec<usize>, f64), ClusterError> {
    if centers.is_empty() {
        return Err(ClusterError::InvalidConfig("no centers to assign to".into()));
    }
    if impedance.len() != positions.len() {
        return Err(ClusterError::LengthMismatch(impedance.len(), positions.len()));
    }
    let mut labels = vec![0; positions.len()];
    let mut radius: f64 = 0.0;
    for (j, label) in labels.iter_mut().enumerate() {
        if let Some(own) = centers.iter().position(|&c| c == j) {
            *label = own;
            continue;
        }
        let mut best = (0, generalized_distance(j, centers[0], impedance, positions, epsilon));
        for (idx, &c) in centers.iter().enumerate().skip(1) {
            let d = generalized_distance(j, c, impedance, positions, epsilon);
            if d < best.1 {
                best = (idx, d);
            }
        }
        *label = best.0;
        radius = radius.max(best.1);
    }
    Ok((labels, radius))
}

/// Center selection followed by assignment.
pub fn cluster(
    positions: &[(f64, f64)],
    impedance: &[f64],
    config: &ClusterConfig,
) -> Result<ClusterResult, ClusterError> {
    let centers = select_centers(positions, impedance, config)?;
    let (labels, radius) = assign(positions, &centers, impedance, config.epsilon)?;
    Ok(ClusterResult { centers, labels, radius })
}

/// Radius for every `k` in `1..=k_max`; selection is incremental, so one
/// traversal serves all of them.
pub fn elbow(
    positions: &[(f64, f64)],
    impedance: &[f64],
    config: &ClusterConfig,
    k_max: usize,
) -> Result<Vec<(usize, f64)>, ClusterError> {
    let full = select_centers(positions, impedance, &ClusterConfig { k: k_max, ..*config })?;
    (1..=k_max)
        .map(|k| assign(positions, &full[..k], impedance, config.epsilon).map(|(_, radius)| (k, radius)))
        .collect()
}

impl ClusterResult {
    /// `vehicle_id,x,y,label`.
    pub fn write_csv<W: Write>(&self, writer: W, ids: &[String], positions: &[(f64, f64)]) -> Result<(), ClusterError> {
        let mut w = csv::Writer::from_writer(writer);
        let ser = |e: csv::Error| ClusterError::Serialize(e.to_string());
        w.write_record(["vehicle_id", "x", "y", "label"]).map_err(ser)?;
        for (i, id) in ids.iter().enumerate() {
            let (x, y) = positions[i];
            w.write_record([id.clone(), x.to_string(), y.to_string(), self.labels[i].to_string()]).map_err(ser)?;
        }
        w.flush().map_err(|e| ClusterError::Serialize(e.to_string()))
    }
}
