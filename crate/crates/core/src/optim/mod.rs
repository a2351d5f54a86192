//! Dense linear programming: a two-phase primal simplex with Bland's rule and
//! a log-barrier path-following solver for the traffic allocation problem.

mod barrier;
mod simplex;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use barrier::{barrier_solve, gap_bound, BarrierOptions, BarrierProblem, IterateRecord};
pub use simplex::solve_lp;

/// Feasibility tolerance every optimal report is checked against.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub const NONNEGATIVE: Bound = Bound { lower: Some(0.0), upper: None };
    pub const FREE: Bound = Bound { lower: None, upper: None };
}

impl Default for Bound {
    fn default() -> Self {
        Self::NONNEGATIVE
    }
}

/// `min cᵀx  s.t.  A_ub·x ≤ b_ub,  A_eq·x = b_eq,  lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    #[serde(default)]
    pub a_ub: Vec<Vec<f64>>,
    #[serde(default)]
    pub b_ub: Vec<f64>,
    #[serde(default)]
    pub a_eq: Vec<Vec<f64>>,
    #[serde(default)]
    pub b_eq: Vec<f64>,
    pub bounds: Vec<Bound>,
}

impl LinearProgram {
    /// Objective only; every variable nonnegative.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            bounds: vec![Bound::NONNEGATIVE; n],
        }
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn ge(self, row: Vec<f64>, rhs: f64) -> Self {
        self.le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn bound(mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.bounds[var] = Bound { lower, upper };
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.c.len();
        if self.bounds.len() != n {
            return Err(LpError::Dimension(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(LpError::Dimension("constraint rows and right-hand sides differ in count".into()));
        }
        for (k, row) in self.a_ub.iter().chain(&self.a_eq).enumerate() {
            if row.len() != n {
                return Err(LpError::Dimension(format!("constraint row {k} has {} entries, expected {n}", row.len())));
            }
        }
        let finite = self.c.iter().chain(self.b_ub.iter()).chain(&self.b_eq).all(|v| v.is_finite())
            && self.a_ub.iter().chain(&self.a_eq).flatten().all(|v| v.is_finite())
            && self.bounds.iter().all(|b| b.lower.is_none_or(f64::is_finite) && b.upper.is_none_or(f64::is_finite));
        if !finite {
            return Err(LpError::NonFinite("LP data must be finite".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        let ub = self.a_ub.iter().zip(&self.b_ub).map(|(row, b)| (dot(row) - b).max(0.0));
        let eq = self.a_eq.iter().zip(&self.b_eq).map(|(row, b)| (dot(row) - b).abs());
        let bounds = self.bounds.iter().zip(x).map(|(b, &v)| {
            let lo = b.lower.map_or(0.0, |l| (l - v).max(0.0));
            let hi = b.upper.map_or(0.0, |u| (v - u).max(0.0));
            lo.max(hi)
        });
        ub.chain(eq).chain(bounds).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String, LpError> {
        serde_json::to_string_pretty(self).map_err(|e| LpError::Serialize(e.to_string()))
    }
}

/// One outer stage of the barrier method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierStage {
    pub t: f64,
    pub newton_steps: usize,
    /// Max-norm of the centering condition at the end of the stage.
    pub residual: f64,
    pub decrement_sq: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Certified suboptimality bound; 0 for simplex solves.
    pub gap_bound: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<BarrierStage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<IterateRecord>,
}

impl SolveReport {
    pub(crate) fn failed(status: SolveStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            gap_bound: f64::NAN,
            iterations,
            stages: Vec::new(),
            iterates: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn to_json(&self) -> Result<String, LpError> {
        serde_json::to_string_pretty(self).map_err(|e| LpError::Serialize(e.to_string()))
    }

    /// Barrier iterate trace, one CSV row per Newton step.
    pub fn write_iterates_csv<W: Write>(&self, writer: W) -> Result<(), LpError> {
        let mut w = csv::Writer::from_writer(writer);
        for rec in &self.iterates {
            w.serialize(rec).map_err(|e| LpError::Serialize(e.to_string()))?;
        }
        w.flush().map_err(|e| LpError::Serialize(e.to_string()))
    }
}
