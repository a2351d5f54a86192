//! Link-level radio models: urban path loss, cell handovers along a link and
//! the uplink rate used for vehicle-to-station impedance.

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Urban line-of-sight path loss in dB, `42.6 + 26 log10(d) + 20 log10(f_c)`,
/// with `d` in kilometers and `f_c` in MHz.
pub fn path_loss(distance_km: f64, f_c_mhz: f64) -> Result<f64, GraphError> {
    if !(distance_km > 0.0) || !(f_c_mhz > 0.0) {
        return Err(GraphError::Domain(format!(
            "path loss needs d > 0 and f_c > 0 (got d = {distance_km} km, f_c = {f_c_mhz} MHz)"
        )));
    }
    Ok(42.6 + 26.0 * distance_km.log10() + 20.0 * f_c_mhz.log10())
}

/// Side of the square cell that has the same area as a disk of radius `r_c`.
pub fn cell_side(r_c: f64) -> f64 {
    std::f64::consts::PI.sqrt() * r_c
}

/// Number of grid lines `x = m·side` (or `y = m·side`) lying strictly between
/// the two coordinates.
fn lines_strictly_between(a: f64, b: f64, side: f64) -> u32 {
    let (lo, hi) = if a <= b { (a / side, b / side) } else { (b / side, a / side) };
    let count = hi.ceil() - lo.floor() - 1.0;
    if count > 0.0 {
        count as u32
    } else {
        0
    }
}

/// Cell boundaries crossed by the open segment `p_i → p_j` on a square grid of
/// side `√π·r_c` anchored at the planar origin. A segment through a grid
/// corner crosses two lines and counts two handovers.
pub fn handover_count(p_i: (f64, f64), p_j: (f64, f64), r_c: f64) -> u32 {
    let side = cell_side(r_c);
    lines_strictly_between(p_i.0, p_j.0, side) + lines_strictly_between(p_i.1, p_j.1, side)
}

/// Distance in meters from `p` to the center of its grid cell, where the
/// serving base station is assumed to sit. Never below `min_m`.
pub fn station_distance(p: (f64, f64), r_c: f64, min_m: f64) -> f64 {
    let side = cell_side(r_c);
    let cx = ((p.0 / side).floor() + 0.5) * side;
    let cy = ((p.1 / side).floor() + 0.5) * side;
    (p.0 - cx).hypot(p.1 - cy).max(min_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputParams {
    /// Channel-estimation time fraction τ.
    pub tau: f64,
    /// Wireless-energy-transfer time fraction ς.
    pub varsigma: f64,
    pub p_tx_dbm: f64,
    pub noise_dbm: f64,
    /// Standard deviation of log-normal shadowing in dB; 0 disables it.
    #[serde(default)]
    pub shadowing_sigma_db: f64,
}

impl Default for ThroughputParams {
    fn default() -> Self {
        Self { tau: 0.1, varsigma: 0.1, p_tx_dbm: 23.0, noise_dbm: -94.0, shadowing_sigma_db: 0.0 }
    }
}

impl ThroughputParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.tau >= 0.0) || !(self.varsigma >= 0.0) || !(self.tau + self.varsigma < 1.0) {
            return Err(GraphError::Domain(format!(
                "need τ ≥ 0, ς ≥ 0 and τ + ς < 1 (got τ = {}, ς = {})",
                self.tau, self.varsigma
            )));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(GraphError::InvalidParams("shadowing sigma must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Linear SINR at distance `d` for a deterministic channel.
    pub fn sinr(&self, distance_km: f64, f_c_mhz: f64) -> Result<f64, GraphError> {
        let loss = path_loss(distance_km, f_c_mhz)?;
        Ok(10f64.powf((self.p_tx_dbm - loss - self.noise_dbm) / 10.0))
    }

    /// `(1 − τ − ς)·log2(1 + γ)`.
    pub fn rate_from_sinr(&self, gamma: f64) -> Result<f64, GraphError> {
        self.validate()?;
        if !(gamma >= 0.0) {
            return Err(GraphError::Domain(format!("SINR must be ≥ 0, got {gamma}")));
        }
        Ok((1.0 - self.tau - self.varsigma) * (1.0 + gamma).log2())
    }
}

/// Achievable uplink rate over a link of length `d` (km).
pub fn throughput(tp: &ThroughputParams, distance_km: f64, f_c_mhz: f64) -> Result<f64, GraphError> {
    tp.validate()?;
    tp.rate_from_sinr(tp.sinr(distance_km, f_c_mhz)?)
}
