//! Two-phase dense tableau simplex with Bland's anti-cycling rule.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpError, SolveReport, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;

/// How an original variable is rebuilt from nonnegative standard-form columns:
/// `x = offset + Σ coef·y_col`.
struct VarMap {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

/// `min cᵀy  s.t.  A·y = b,  y ≥ 0,  b ≥ 0`.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Column usable as the initial basic variable of each row, if any.
    unit_col: Vec<Option<usize>>,
    vars: Vec<VarMap>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let mut vars = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for b in &lp.bounds {
        match (b.lower, b.upper) {
            (Some(l), u) => {
                if let Some(u) = u {
                    upper_rows.push((ncols, u - l));
                }
                vars.push(VarMap { offset: l, terms: vec![(ncols, 1.0)] });
                ncols += 1;
            }
            (None, Some(u)) => {
                vars.push(VarMap { offset: u, terms: vec![(ncols, -1.0)] });
                ncols += 1;
            }
            (None, None) => {
                vars.push(VarMap { offset: 0.0, terms: vec![(ncols, 1.0), (ncols + 1, -1.0)] });
                ncols += 2;
            }
        }
    }
    let structural = ncols;
    let mut c = vec![0.0; structural];
    for (j, map) in vars.iter().enumerate() {
        for &(col, coef) in &map.terms {
            c[col] += lp.c[j] * coef;
        }
    }
    let expand = |row: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; structural];
        let mut shift = 0.0;
        for (j, map) in vars.iter().enumerate() {
            shift += row[j] * map.offset;
            for &(col, coef) in &map.terms {
                out[col] += row[j] * coef;
            }
        }
        (out, shift)
    };

    // (row, rhs, has_slack)
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (row, &rhs) in lp.a_ub.iter().zip(&lp.b_ub) {
        let (r, shift) = expand(row);
        rows.push((r, rhs - shift, true));
    }
    for &(col, width) in &upper_rows {
        let mut r = vec![0.0; structural];
        r[col] = 1.0;
        rows.push((r, width, true));
    }
    for (row, &rhs) in lp.a_eq.iter().zip(&lp.b_eq) {
        let (r, shift) = expand(row);
        rows.push((r, rhs - shift, false));
    }

    let slack_count = rows.iter().filter(|r| r.2).count();
    let total = structural + slack_count;
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut unit_col = Vec::with_capacity(rows.len());
    let mut next_slack = structural;
    for (r, rhs, has_slack) in rows {
        let mut full = r;
        full.resize(total, 0.0);
        let mut slack = None;
        if has_slack {
            full[next_slack] = 1.0;
            slack = Some(next_slack);
            next_slack += 1;
        }
        if rhs < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
            b.push(-rhs);
            unit_col.push(None);
        } else {
            b.push(rhs);
            unit_col.push(slack);
        }
        a.push(full);
    }
    c.resize(total, 0.0);
    StandardForm { a, b, c, unit_col, vars }
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1`; the last entry is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    MaxIter,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize, cost: &mut [f64]) {
        let width = self.cols + 1;
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[col] = 0.0;
            }
        }
        let f = cost[col];
        if f != 0.0 {
            for k in 0..width {
                cost[k] -= f * pivot_row[k];
            }
            cost[col] = 0.0;
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column enters; among minimum-ratio
    /// rows the one whose basic variable has the lowest index leaves.
    fn run(&mut self, cost: &mut [f64], allowed: &[bool]) -> Outcome {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Outcome::MaxIter;
            }
            let Some(col) = (0..self.cols).find(|&j| allowed[j] && cost[j] < -COST_TOL) else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            self.pivot(r, col, cost);
        }
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut cost = c.to_vec();
        cost.push(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for (k, v) in row.iter().enumerate() {
                    cost[k] -= cb * v;
                }
            }
        }
        cost
    }
}

/// Solves `lp` to an optimal basic feasible solution, or reports it
/// infeasible or unbounded.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveReport, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let sf = standardize(lp);
    let m = sf.a.len();
    let structural_cols = sf.c.len();

    // artificials for rows without a ready-made unit column
    let needs_art: Vec<usize> = (0..m).filter(|&i| sf.unit_col[i].is_none()).collect();
    let cols = structural_cols + needs_art.len();
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_iter = structural_cols;
    for i in 0..m {
        let mut row = sf.a[i].clone();
        row.resize(cols, 0.0);
        match sf.unit_col[i] {
            Some(col) => basis.push(col),
            None => {
                row[art_iter] = 1.0;
                basis.push(art_iter);
                art_iter += 1;
            }
        }
        row.push(sf.b[i]);
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, cols, pivots: 0 };
    let mut allowed = vec![true; cols];

    if !needs_art.is_empty() {
        let mut phase1 = vec![0.0; cols];
        for j in structural_cols..cols {
            phase1[j] = 1.0;
        }
        let mut cost = tab.reduced_costs(&phase1);
        match tab.run(&mut cost, &allowed) {
            Outcome::MaxIter => return Ok(SolveReport::failed(SolveStatus::MaxIter, n, tab.pivots)),
            Outcome::Unbounded => unreachable!("phase I objective is bounded below by zero"),
            Outcome::Optimal => {}
        }
        let infeasibility: f64 =
            tab.rows.iter().zip(&tab.basis).filter(|(_, &b)| b >= structural_cols).map(|(r, _)| r[cols]).sum();
        if infeasibility > PHASE1_TOL * (1.0 + sf.b.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
            return Ok(SolveReport::failed(SolveStatus::Infeasible, n, tab.pivots));
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= structural_cols {
                match (0..structural_cols).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                    Some(col) => {
                        let mut scratch = vec![0.0; cols + 1];
                        tab.pivot(r, col, &mut scratch);
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for flag in allowed.iter_mut().skip(structural_cols) {
            *flag = false;
        }
    }

    let mut phase2 = sf.c.clone();
    phase2.resize(cols, 0.0);
    let mut cost = tab.reduced_costs(&phase2);
    match tab.run(&mut cost, &allowed) {
        Outcome::MaxIter => return Ok(SolveReport::failed(SolveStatus::MaxIter, n, tab.pivots)),
        Outcome::Unbounded => return Ok(SolveReport::failed(SolveStatus::Unbounded, n, tab.pivots)),
        Outcome::Optimal => {}
    }

    let mut y = vec![0.0; cols];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        y[b] = row[cols].max(0.0);
    }
    refine_basic_solution(&sf, &tab.basis, &mut y);

    let x: Vec<f64> = sf
        .vars
        .iter()
        .map(|map| map.offset + map.terms.iter().map(|&(col, coef)| coef * y[col]).sum::<f64>())
        .collect();
    Ok(SolveReport {
        status: SolveStatus::Optimal,
        objective: lp.objective(&x),
        x,
        gap_bound: 0.0,
        iterations: tab.pivots,
        stages: Vec::new(),
        iterates: Vec::new(),
    })
}

/// Recomputes the basic variables from the original standard-form data by an
/// LU solve of `B·y_B = b`, which removes round-off accumulated by pivoting.
fn refine_basic_solution(sf: &StandardForm, basis: &[usize], y: &mut [f64]) {
    let m = sf.a.len();
    let structural = sf.c.len();
    if m == 0 || basis.len() != m || basis.iter().any(|&b| b >= structural) {
        return;
    }
    let bmat = DMatrix::from_fn(m, m, |i, k| sf.a[i][basis[k]]);
    let rhs = DVector::from_column_slice(&sf.b);
    if let Some(sol) = bmat.lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite() && *v >= -1e-9) {
            for (k, &b) in basis.iter().enumerate() {
                y[b] = sol[k].max(0.0);
            }
        }
    }
}
