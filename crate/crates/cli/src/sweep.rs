//! Parameter sweeps over a fixed set of vehicle positions. Grid points run on
//! the rayon pool; rows come back in grid order (`r` outer, swept parameter
//! inner), so the output does not depend on scheduling.

use std::io::Write;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use vanet_core::graph::{geometric_graph, handover_count};
use vanet_core::ImpedanceParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpedanceRow {
    pub f_c: f64,
    pub r: f64,
    pub edges: usize,
    /// Empty when the graph at this `r` has no edges.
    pub mean_impedance: Option<f64>,
    pub status: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HandoverRow {
    pub r_c: f64,
    pub r: f64,
    pub edges: usize,
    pub mean_handovers: Option<f64>,
    pub status: &'static str,
}

fn status(edges: usize) -> &'static str {
    if edges == 0 {
        "no-edges"
    } else {
        "ok"
    }
}

/// Mean link impedance with `α = 0` for every `(f_c, r)`. With the topology
/// term switched off, betweenness is not needed and is set to zero.
pub fn sweep_impedance(
    points: &[(f64, f64)],
    base: &ImpedanceParams,
    f_c_list: &[f64],
    r_list: &[f64],
) -> Result<Vec<ImpedanceRow>> {
    let per_r: Vec<Vec<ImpedanceRow>> = r_list
        .par_iter()
        .map(|&r| {
            let mut g = geometric_graph(points, r);
            g.set_betweenness(vec![0.0; g.n()])?;
            let edges = g.edge_count();
            f_c_list
                .iter()
                .map(|&f_c| {
                    let params = ImpedanceParams { alpha: 0.0, r, f_c, ..*base };
                    g.assign_impedances(&params)?;
                    Ok(ImpedanceRow { f_c, r, edges, mean_impedance: g.mean_impedance(), status: status(edges) })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_r.into_iter().flatten().collect())
}

/// Mean handover count per edge for every `(r_c, r)`.
pub fn sweep_handover(points: &[(f64, f64)], r_c_list: &[f64], r_list: &[f64]) -> Vec<HandoverRow> {
    let per_r: Vec<Vec<HandoverRow>> = r_list
        .par_iter()
        .map(|&r| {
            let g = geometric_graph(points, r);
            let edges: Vec<(usize, usize)> = g.edges().collect();
            r_c_list
                .iter()
                .map(|&r_c| {
                    let total: u64 =
                        edges.iter().map(|&(i, j)| u64::from(handover_count(points[i], points[j], r_c))).sum();
                    let mean = (!edges.is_empty()).then(|| total as f64 / edges.len() as f64);
                    HandoverRow { r_c, r, edges: edges.len(), mean_handovers: mean, status: status(edges.len()) }
                })
                .collect()
        })
        .collect();
    per_r.into_iter().flatten().collect()
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
