//! Log-barrier path following for
//!
//! ```text
//! min R_wᵀx  s.t.  x ≥ 0,  xᵀ1 ≥ Q,  A·x ≤ c
//! ```
//!
//! At sharpness `t` the centering problem minimizes
//! `φ_t(x) = t·R_wᵀx − Σ ln x_i − ln(xᵀ1 − Q) − Σ_e ln(c_e − A_e·x)`,
//! whose minimizer `x*(t)` is within `(n + E + 1)/t` of the LP optimum. Each
//! stage runs damped Newton with an Armijo backtracking line search, then `t`
//! grows geometrically until the bound drops below the requested gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{solve_lp, BarrierStage, Bound, LinearProgram, LpError, SolveReport, SolveStatus};

/// Allocation-shaped problem data: path costs `R_w` (length `n`), the
/// `E × n` incidence matrix, demand `Q` and per-edge capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierProblem {
    pub cost: Vec<f64>,
    pub incidence: Vec<Vec<f64>>,
    pub demand: f64,
    pub capacity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierOptions {
    pub t0: f64,
    /// Factor applied to `t` after every stage.
    pub growth: f64,
    /// Stop once `(n + E + 1)/t` is at most this.
    pub gap: f64,
    pub armijo_beta: f64,
    pub armijo_sigma: f64,
    /// Newton decrement threshold on `λ²/2`.
    pub decrement_tol: f64,
    /// Required max-norm of the centering residual at the end of a stage.
    pub residual_tol: f64,
    pub max_newton: usize,
    pub max_stages: usize,
    pub regularization: f64,
    /// Keep one [`IterateRecord`] per Newton step in the report.
    pub record_iterates: bool,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            growth: 10.0,
            gap: 1e-6,
            armijo_beta: 0.5,
            armijo_sigma: 0.01,
            decrement_tol: 1e-10,
            residual_tol: 1e-6,
            max_newton: 200,
            max_stages: 64,
            regularization: 1e-12,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub stage: usize,
    pub newton: usize,
    pub t: f64,
    pub objective: f64,
    pub barrier: f64,
    pub decrement_sq: f64,
    pub step: f64,
}

/// `(n + E + 1)/t`.
pub fn gap_bound(constraints: usize, t: f64) -> f64 {
    constraints as f64 / t
}

/// Neumaier-compensated sum; slacks near the boundary are differences of
/// nearly equal numbers and lose digits under naive summation.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in terms {
        let s = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - s) + v;
        } else {
            carry += (v - s) + sum;
        }
        sum = s;
    }
    sum + carry
}

/// [`compensated_sum`] kept as the pair `(sum, carry)`.
fn compensated_pair(terms: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in terms {
        let s = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - s) + v;
        } else {
            carry += (v - s) + sum;
        }
        sum = s;
    }
    two_sum(sum, carry)
}

/// `a·b` as an exact unevaluated sum.
fn two_prod(a: f64, b: f64) -> [f64; 2] {
    let p = a * b;
    [p, a.mul_add(b, -p)]
}

/// `1/(hi + lo)` to about twice working precision, as `q + e`.
fn recip(hi: f64, lo: f64) -> [f64; 2] {
    let q = 1.0 / hi;
    let r = (-hi).mul_add(q, 1.0);
    [q, q * r - lo * q * q]
}

/// `a/(hi + lo)` as a short unevaluated sum.
fn ratio(a: f64, hi: f64, lo: f64) -> [f64; 3] {
    let [q, e] = recip(hi, lo);
    let [p, pe] = two_prod(a, q);
    [p, pe, a * e]
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Iterate kept as the unevaluated sum `hi + lo`. Close to the boundary a
/// slack of size `1/t` is sensitive to single-ulp moves of `x`; the extra word
/// lets slacks, and with them the centering residual, resolve below that.
#[derive(Debug, Clone)]
struct Split {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl Split {
    fn exact(x: &[f64]) -> Self {
        Self { hi: x.to_vec(), lo: vec![0.0; x.len()] }
    }

    fn value(&self, i: usize) -> f64 {
        self.hi[i] + self.lo[i]
    }

    fn rounded(&self) -> Vec<f64> {
        (0..self.hi.len()).map(|i| self.value(i)).collect()
    }

    fn step(&self, alpha: f64, dir: &[f64]) -> Self {
        let mut hi = Vec::with_capacity(dir.len());
        let mut lo = Vec::with_capacity(dir.len());
        for i in 0..dir.len() {
            let (s, e) = two_sum(self.hi[i], alpha * dir[i]);
            let (h, l) = two_sum(s, e + self.lo[i]);
            hi.push(h);
            lo.push(l);
        }
        Self { hi, lo }
    }

    /// `other − self`, componentwise.
    fn delta(&self, other: &Self) -> Vec<f64> {
        (0..self.hi.len())
            .map(|i| compensated_sum([other.hi[i], other.lo[i], -self.hi[i], -self.lo[i]].into_iter()))
            .collect()
    }
}

/// Slacks rounded to working precision, with the rounding errors kept in
/// the `_lo` fields for the gradient.
struct Slacks {
    demand: f64,
    demand_lo: f64,
    capacity: Vec<f64>,
    capacity_lo: Vec<f64>,
}

impl BarrierProblem {
    pub fn uniform(cost: Vec<f64>, incidence: Vec<Vec<f64>>, demand: f64, capacity: f64) -> Self {
        let edges = incidence.len();
        Self { cost, incidence, demand, capacity: vec![capacity; edges] }
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn edges(&self) -> usize {
        self.incidence.len()
    }

    /// `n + E + 1`.
    pub fn constraint_count(&self) -> usize {
        self.n() + self.edges() + 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n();
        if n == 0 {
            return Err(LpError::Dimension("no commodities".into()));
        }
        if self.capacity.len() != self.edges() {
            return Err(LpError::Dimension(format!("{} capacities for {} edges", self.capacity.len(), self.edges())));
        }
        if let Some(row) = self.incidence.iter().find(|r| r.len() != n) {
            return Err(LpError::Dimension(format!("incidence row of length {} for {n} commodities", row.len())));
        }
        let finite =
            self.cost.iter().chain(&self.capacity).chain(self.incidence.iter().flatten()).all(|v| v.is_finite())
                && self.demand.is_finite();
        if !finite {
            return Err(LpError::NonFinite("barrier problem data must be finite".into()));
        }
        Ok(())
    }

    /// The same problem as a plain LP, for the simplex cross-check.
    pub fn as_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.cost.clone()).ge(vec![1.0; self.n()], self.demand);
        for (row, &cap) in self.incidence.iter().zip(&self.capacity) {
            lp = lp.le(row.clone(), cap);
        }
        lp
    }

    /// `None` unless the point is strictly inside every constraint.
    fn slacks(&self, x: &Split) -> Option<Slacks> {
        if (0..x.hi.len()).any(|i| !(x.value(i) > 0.0)) {
            return None;
        }
        let (demand, demand_lo) =
            compensated_pair(x.hi.iter().chain(&x.lo).copied().chain(std::iter::once(-self.demand)));
        if !(demand > 0.0) {
            return None;
        }
        let mut capacity = Vec::with_capacity(self.edges());
        let mut capacity_lo = Vec::with_capacity(self.edges());
        for (row, &cap) in self.incidence.iter().zip(&self.capacity) {
            // a·hi split exactly into product and rounding error
            let terms = row.iter().zip(x.hi.iter().zip(&x.lo)).flat_map(|(&a, (&h, &l))| {
                let p = a * h;
                [-p, -a.mul_add(h, -p), -a * l]
            });
            let (s, s_lo) = compensated_pair(std::iter::once(cap).chain(terms));
            if !(s > 0.0) {
                return None;
            }
            capacity.push(s);
            capacity_lo.push(s_lo);
        }
        Some(Slacks { demand, demand_lo, capacity, capacity_lo })
    }

    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        x.len() == self.n() && self.slacks(&Split::exact(x)).is_some()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn phi(&self, t: f64, x: &Split) -> Option<f64> {
        let s = self.slacks(x)?;
        let logs = compensated_sum(
            (0..self.n())
                .map(|i| -x.value(i).ln())
                .chain(std::iter::once(-s.demand.ln()))
                .chain(s.capacity.iter().map(|v| -v.ln())),
        );
        Some(t * self.objective(&x.rounded()) + logs)
    }

    /// `φ_t(y) − φ_t(x)`, formed from differences so that it stays accurate
    /// when far smaller than `φ_t` itself. Slack changes are linear in
    /// `y − x` and are taken from it rather than by subtracting slacks.
    fn phi_change(&self, t: f64, x: &Split, sx: &Slacks, y: &Split) -> Option<f64> {
        self.slacks(y)?;
        let dx = x.delta(y);
        let linear = (0..self.n()).map(|i| t * self.cost[i] * dx[i]);
        let bound = (0..self.n()).map(|i| -(dx[i] / x.value(i)).ln_1p());
        let d_demand = compensated_sum(dx.iter().copied());
        let demand = std::iter::once(-(d_demand / sx.demand).ln_1p());
        let cap = self.incidence.iter().zip(&sx.capacity).map(|(row, se)| {
            let d = compensated_sum(row.iter().zip(&dx).map(|(a, v)| -a * v));
            -(d / se).ln_1p()
        });
        Some(compensated_sum(linear.chain(bound).chain(demand).chain(cap)))
    }

    /// Every term is carried as a short unevaluated sum: near the boundary
    /// the terms reach `t·R_w` in size while their sum is far smaller.
    fn gradient_at(&self, t: f64, x: &Split, s: &Slacks) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let cap = self
                    .incidence
                    .iter()
                    .enumerate()
                    .flat_map(|(e, row)| ratio(row[i], s.capacity[e], s.capacity_lo[e]));
                let own = ratio(-1.0, x.hi[i], x.lo[i]);
                let demand = ratio(-1.0, s.demand, s.demand_lo);
                compensated_sum(two_prod(t, self.cost[i]).into_iter().chain(own).chain(demand).chain(cap))
            })
            .collect()
    }

    fn residual_at(&self, t: f64, x: &Split, s: &Slacks) -> Vec<f64> {
        // Q − xᵀ1 = −(demand slack)
        let inv_gap = recip(-s.demand, -s.demand_lo);
        (0..self.n())
            .map(|i| {
                let [q, e] = recip(x.hi[i], x.lo[i]);
                let at_inv = self
                    .incidence
                    .iter()
                    .enumerate()
                    .flat_map(|(k, row)| ratio(row[i], s.capacity[k], s.capacity_lo[k]));
                compensated_sum(two_prod(t, self.cost[i]).into_iter().chain([-q, -e]).chain(inv_gap).chain(at_inv))
            })
            .collect()
    }

    /// `φ_t(x)`, or `None` outside the strict interior.
    pub fn barrier_value(&self, t: f64, x: &[f64]) -> Option<f64> {
        self.phi(t, &Split::exact(x))
    }

    /// `∇φ_t(x)`, derived term by term from the barrier functions.
    pub fn gradient(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let x = Split::exact(x);
        let s = self.slacks(&x)?;
        Some(self.gradient_at(t, &x, &s))
    }

    /// Centering condition written exactly as
    /// `t·R_w − 1/x + (1/(Q − xᵀ1))·1 + Aᵀ(1/(c·1 − A·x))`.
    /// `Q − xᵀ1` is negative in the interior, so this coincides with
    /// [`BarrierProblem::gradient`].
    pub fn centering_residual(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let x = Split::exact(x);
        let s = self.slacks(&x)?;
        Some(self.residual_at(t, &x, &s))
    }

    fn hessian(&self, x: &Split, s: &Slacks, reg: f64) -> DMatrix<f64> {
        let n = self.n();
        let d2 = 1.0 / (s.demand * s.demand);
        let mut h = DMatrix::from_element(n, n, d2);
        for i in 0..n {
            let v = x.value(i);
            h[(i, i)] += 1.0 / (v * v) + reg;
        }
        for (row, &se) in self.incidence.iter().zip(&s.capacity) {
            let w = 1.0 / (se * se);
            let support: Vec<usize> = (0..n).filter(|&i| row[i] != 0.0).collect();
            for &i in &support {
                for &k in &support {
                    h[(i, k)] += w * row[i] * row[k];
                }
            }
        }
        h
    }

    /// `G` with `GᵀG` equal to the Hessian: one row per barrier term.
    fn hessian_factor(&self, x: &Split, s: &Slacks, reg: f64) -> DMatrix<f64> {
        let n = self.n();
        let rows = 2 * n + 1 + self.edges();
        let mut f = DMatrix::zeros(rows, n);
        for i in 0..n {
            f[(i, i)] = 1.0 / x.value(i);
            f[(n + i, i)] = reg.sqrt();
        }
        for i in 0..n {
            f[(2 * n, i)] = 1.0 / s.demand;
        }
        for (e, (row, &se)) in self.incidence.iter().zip(&s.capacity).enumerate() {
            for i in 0..n {
                f[(2 * n + 1 + e, i)] = row[i] / se;
            }
        }
        f
    }

    /// Maximizes the smallest constraint margin (capped at 1) by LP; returns a
    /// strictly feasible point, or `None` if the interior is empty.
    pub fn strictly_feasible_point(&self) -> Result<Option<Vec<f64>>, LpError> {
        let n = self.n();
        let mut c = vec![0.0; n + 1];
        c[n] = -1.0;
        let mut lp = LinearProgram::new(c);
        for i in 0..n {
            let mut row = vec![0.0; n + 1];
            row[i] = -1.0;
            row[n] = 1.0;
            lp = lp.le(row, 0.0);
        }
        let mut demand_row = vec![-1.0; n + 1];
        demand_row[n] = 1.0;
        lp = lp.le(demand_row, -self.demand);
        for (inc, &cap) in self.incidence.iter().zip(&self.capacity) {
            let mut row = inc.clone();
            row.push(1.0);
            lp = lp.le(row, cap);
        }
        lp.bounds[n] = Bound { lower: None, upper: Some(1.0) };
        let rep = solve_lp(&lp)?;
        if !rep.is_optimal() || !(rep.x[n] > 1e-9) {
            return Ok(None);
        }
        let x = rep.x[..n].to_vec();
        Ok(self.is_strictly_feasible(&x).then_some(x))
    }
}

/// Solves `H Δ = -g` as `RᵀR Δ = -g` with `R` from a QR of the square-root
/// factor, so the small curvatures are never added onto the large ones.
/// Cholesky and then LU on the formed `H` are fallbacks.
fn newton_direction(bp: &BarrierProblem, x: &Split, s: &Slacks, reg: f64, g: &[f64]) -> Option<Vec<f64>> {
    let rhs = -DVector::from_column_slice(g);
    let finite = |v: &DVector<f64>| v.iter().all(|c| c.is_finite());
    let r = bp.hessian_factor(x, s, reg).qr().r();
    let step =
        r.tr_solve_upper_triangular(&rhs).and_then(|y| r.solve_upper_triangular(&y)).filter(finite).or_else(|| {
            let h = bp.hessian(x, s, reg);
            h.clone().cholesky().map(|ch| ch.solve(&rhs)).filter(finite).or_else(|| h.lu().solve(&rhs).filter(finite))
        })?;
    Some(step.iter().copied().collect())
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Path-following solve of `bp`. The returned `gap_bound` is `(n + E + 1)/t`
/// at the final stage; `stages` records the centering residual of each stage.
pub fn barrier_solve(bp: &BarrierProblem, opts: &BarrierOptions) -> Result<SolveReport, LpError> {
    bp.validate()?;
    let n = bp.n();
    let m = bp.constraint_count();
    let Some(start) = bp.strictly_feasible_point()? else {
        return Ok(SolveReport::failed(SolveStatus::Infeasible, n, 0));
    };
    let mut x = Split::exact(&start);
    let mut t = opts.t0;
    let mut stages = Vec::new();
    let mut iterates = Vec::new();
    let mut total = 0;
    let stalled = |stages: Vec<BarrierStage>, iterates: Vec<IterateRecord>, total: usize| SolveReport {
        stages,
        iterates,
        ..SolveReport::failed(SolveStatus::MaxIter, n, total)
    };

    for stage in 0..opts.max_stages {
        let mut steps = 0;
        // accumulated from accepted changes so the record is monotone
        let mut recorded_phi =
            if opts.record_iterates { bp.phi(t, &x).expect("iterate left the interior") } else { 0.0 };
        let mut dec_sq;
        let mut residual;
        loop {
            let s = bp.slacks(&x).expect("iterate left the interior");
            let g = bp.gradient_at(t, &x, &s);
            residual = max_norm(&bp.residual_at(t, &x, &s));
            let Some(dir) = newton_direction(bp, &x, &s, opts.regularization, &g) else {
                return Ok(stalled(stages, iterates, total));
            };
            let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            dec_sq = -slope;
            if dec_sq / 2.0 <= opts.decrement_tol && residual <= opts.residual_tol {
                break;
            }
            if steps >= opts.max_newton {
                return Ok(stalled(stages, iterates, total));
            }

            let mut alpha = 1.0;
            while bp.slacks(&x.step(alpha, &dir)).is_none() && alpha > 1e-300 {
                alpha *= opts.armijo_beta;
            }
            let mut accepted = None;
            while alpha > 1e-20 {
                let cand = x.step(alpha, &dir);
                if let Some(change) = bp.phi_change(t, &x, &s, &cand) {
                    if change <= opts.armijo_sigma * alpha * slope && change <= 0.0 {
                        accepted = Some((cand, change));
                        break;
                    }
                }
                alpha *= opts.armijo_beta;
            }
            let Some((next, change)) = accepted else {
                // no representable decrease left: centered as far as floating
                // point allows
                if dec_sq / 2.0 <= opts.decrement_tol {
                    break;
                }
                return Ok(stalled(stages, iterates, total));
            };
            debug_assert!(bp.slacks(&next).is_some());
            x = next;
            steps += 1;
            total += 1;
            if opts.record_iterates {
                recorded_phi += change;
                iterates.push(IterateRecord {
                    stage,
                    newton: steps,
                    t,
                    objective: bp.objective(&x.rounded()),
                    barrier: recorded_phi,
                    decrement_sq: dec_sq,
                    step: alpha,
                });
            }
        }
        let xr = x.rounded();
        stages.push(BarrierStage {
            t,
            newton_steps: steps,
            residual,
            decrement_sq: dec_sq,
            objective: bp.objective(&xr),
        });
        if gap_bound(m, t) <= opts.gap {
            return Ok(SolveReport {
                status: SolveStatus::Optimal,
                objective: bp.objective(&xr),
                x: xr,
                gap_bound: gap_bound(m, t),
                iterations: total,
                stages,
                iterates,
            });
        }
        t *= opts.growth;
    }
    Ok(stalled(stages, iterates, total))
}
