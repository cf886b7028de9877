//! Dense bounded-variable primal simplex.
//!
//! Every structural variable carries finite bounds `[lo, hi]`. Rows are turned
//! into equalities with one slack per row; rows whose initial residual does
//! not fit the slack bounds receive an artificial variable that phase one
//! drives to zero. Pricing is Dantzig's rule until the number of degenerate
//! pivots exceeds `5 * (rows + cols)`, after which the solver switches to
//! Bland's rule for the rest of the phase.

use crate::error::{Error, Result};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
pub const OPTIMALITY_TOLERANCE: f64 = 1e-7;
const PIVOT_TOLERANCE: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefficients.iter().zip(values).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::LessEq => (act - self.rhs).max(0.0),
            Relation::GreaterEq => (self.rhs - act).max(0.0),
            Relation::Equal => (act - self.rhs).abs(),
        }
    }
}

/// `minimize c . v` subject to rows and finite variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<(f64, f64)>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
            bounds,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(Error::InvalidProgram(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidProgram(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coefficients.len() != n {
                return Err(Error::InvalidProgram(format!(
                    "row {r} has {} coefficients for {n} variables",
                    row.coefficients.len()
                )));
            }
            if !row.rhs.is_finite() || row.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidProgram(format!("row {r} is not finite")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProgram("objective is not finite".into()));
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(values)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out; `values` and `objective_value` are not usable.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

pub fn default_iteration_limit(lp: &LinearProgram) -> usize {
    50 * (lp.rows.len() + lp.num_vars()) + 1000
}

pub fn solve_lp(lp: &LinearProgram, iteration_limit: usize) -> Result<LpSolution> {
    lp.validate()?;
    Ok(solve_with_bounds(lp, &lp.bounds, iteration_limit))
}

/// Solves `lp` with some variables fixed to values. A fixing outside the
/// variable's bounds yields an infeasible solution.
pub fn solve_lp_with_fixings(
    lp: &LinearProgram,
    fixings: &[(usize, f64)],
    iteration_limit: usize,
) -> Result<LpSolution> {
    lp.validate()?;
    let mut bounds = lp.bounds.clone();
    for &(j, value) in fixings {
        let Some(&(lo, hi)) = lp.bounds.get(j) else {
            return Err(Error::InvalidProgram(format!(
                "fixing refers to variable {j} of {}",
                lp.num_vars()
            )));
        };
        let (cur_lo, cur_hi) = bounds[j];
        if !value.is_finite() || value < lo || value > hi || value < cur_lo || value > cur_hi {
            return Ok(infeasible(lp.num_vars(), 0));
        }
        bounds[j] = (value, value);
    }
    Ok(solve_with_bounds(lp, &bounds, iteration_limit))
}

fn infeasible(n: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        values: vec![0.0; n],
        objective_value: f64::INFINITY,
        iterations,
    }
}

/// Core entry point with caller-provided bounds (already validated).
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    bounds: &[(f64, f64)],
    iteration_limit: usize,
) -> LpSolution {
    let mut tableau = Tableau::new(lp, bounds);
    let mut iterations = 0;

    if tableau.has_artificials {
        tableau.set_phase_costs(Phase::One, &lp.objective);
        match tableau.run(iteration_limit, &mut iterations) {
            RunOutcome::Optimal => {}
            RunOutcome::IterationLimit => return limit_solution(lp.num_vars(), iterations),
            // Phase one is bounded below by zero.
            RunOutcome::Unbounded => return infeasible(lp.num_vars(), iterations),
        }
        tableau.refresh_basic_values(lp);
        let scale = lp.rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
        if tableau.artificial_sum() > FEASIBILITY_TOLERANCE * scale {
            return infeasible(lp.num_vars(), iterations);
        }
        tableau.retire_artificials();
    }

    tableau.set_phase_costs(Phase::Two, &lp.objective);
    match tableau.run(iteration_limit, &mut iterations) {
        RunOutcome::Optimal => {}
        RunOutcome::IterationLimit => return limit_solution(lp.num_vars(), iterations),
        RunOutcome::Unbounded => {
            return LpSolution {
                status: LpStatus::Unbounded,
                values: vec![0.0; lp.num_vars()],
                objective_value: f64::NEG_INFINITY,
                iterations,
            }
        }
    }
    tableau.refresh_basic_values(lp);

    let values: Vec<f64> = (0..lp.num_vars())
        .map(|j| tableau.x[j].clamp(bounds[j].0, bounds[j].1))
        .collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_value(&values),
        values,
        iterations,
    }
}

fn limit_solution(n: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::IterationLimit,
        values: vec![0.0; n],
        objective_value: f64::NAN,
        iterations,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum RunOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Full dense tableau `B^-1 [A | I | diag(sigma)]` with bounded variables.
///
/// Column layout: structurals `0..n`, slacks `n..n+m`, artificials
/// `n+m..n+2m`. The slack block of the tableau is exactly `B^-1`.
struct Tableau {
    m: usize,
    n: usize,
    cols: usize,
    tab: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    sigma: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    has_artificials: bool,
    bland: bool,
    degenerate: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram, bounds: &[(f64, f64)]) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        let cols = n + 2 * m;
        let mut lo = vec![0.0; cols];
        let mut hi = vec![0.0; cols];
        let mut x = vec![0.0; cols];
        for j in 0..n {
            lo[j] = bounds[j].0;
            hi[j] = bounds[j].1;
            x[j] = bounds[j].0;
        }
        let mut tab = vec![0.0; m * cols];
        let mut basis = vec![0; m];
        let mut in_basis = vec![false; cols];
        let mut sigma = vec![1.0; m];
        let mut has_artificials = false;
        for (r, row) in lp.rows.iter().enumerate() {
            let s = n + r;
            let a = n + m + r;
            let (slo, shi) = match row.relation {
                Relation::LessEq => (0.0, f64::INFINITY),
                Relation::GreaterEq => (f64::NEG_INFINITY, 0.0),
                Relation::Equal => (0.0, 0.0),
            };
            lo[s] = slo;
            hi[s] = shi;
            let residual = row.rhs - row.activity(&x[..n]);
            let scale = FEASIBILITY_TOLERANCE * (1.0 + row.rhs.abs());
            let base = &mut tab[r * cols..(r + 1) * cols];
            base[..n].copy_from_slice(&row.coefficients);
            base[s] = 1.0;
            if residual >= slo - scale && residual <= shi + scale {
                x[s] = residual;
                basis[r] = s;
                in_basis[s] = true;
                base[a] = 1.0;
            } else {
                // Slack rests at its finite bound (0); the artificial absorbs
                // the remaining residual with a positive value.
                x[s] = 0.0;
                let sg = if residual >= 0.0 { 1.0 } else { -1.0 };
                sigma[r] = sg;
                base[a] = sg;
                for v in base.iter_mut() {
                    *v *= sg;
                }
                x[a] = residual.abs();
                hi[a] = f64::INFINITY;
                basis[r] = a;
                in_basis[a] = true;
                has_artificials = true;
            }
        }
        Tableau {
            m,
            n,
            cols,
            tab,
            lo,
            hi,
            x,
            basis,
            in_basis,
            sigma,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            has_artificials,
            bland: false,
            degenerate: 0,
        }
    }

    fn set_phase_costs(&mut self, phase: Phase, objective: &[f64]) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        match phase {
            Phase::One => {
                for r in 0..self.m {
                    let a = self.n + self.m + r;
                    if self.hi[a] > 0.0 {
                        self.cost[a] = 1.0;
                    }
                }
            }
            Phase::Two => self.cost[..self.n].copy_from_slice(objective),
        }
        self.reduced.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.tab[r * self.cols..(r + 1) * self.cols];
                for (d, t) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
        self.bland = false;
        self.degenerate = 0;
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.m).map(|r| self.x[self.n + self.m + r].abs()).sum()
    }

    fn retire_artificials(&mut self) {
        for r in 0..self.m {
            let a = self.n + self.m + r;
            self.lo[a] = 0.0;
            self.hi[a] = 0.0;
            if !self.in_basis[a] {
                self.x[a] = 0.0;
            }
        }
    }

    /// Recomputes basic values as `B^-1 (b - N x_N)` to shed pivot drift.
    fn refresh_basic_values(&mut self, lp: &LinearProgram) {
        let (m, n) = (self.m, self.n);
        let mut residual: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        for j in 0..self.cols {
            if self.in_basis[j] || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < n {
                for (r, row) in lp.rows.iter().enumerate() {
                    residual[r] -= row.coefficients[j] * xj;
                }
            } else if j < n + m {
                residual[j - n] -= xj;
            } else {
                let r = j - n - m;
                residual[r] -= self.sigma[r] * xj;
            }
        }
        for r in 0..m {
            let row = &self.tab[r * self.cols + n..r * self.cols + n + m];
            let v: f64 = row.iter().zip(&residual).map(|(a, b)| a * b).sum();
            self.x[self.basis[r]] = v;
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if self.in_basis[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced[j];
            let at_lower = self.x[j] <= self.lo[j];
            let at_upper = self.x[j] >= self.hi[j];
            let dir = if d < -OPTIMALITY_TOLERANCE && !at_upper {
                1.0
            } else if d > OPTIMALITY_TOLERANCE && !at_lower {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, iteration_limit: usize, iterations: &mut usize) -> RunOutcome {
        let stall_limit = 5 * (self.m + self.cols);
        loop {
            let Some((q, dir)) = self.choose_entering() else {
                return RunOutcome::Optimal;
            };
            if *iterations >= iteration_limit {
                return RunOutcome::IterationLimit;
            }
            *iterations += 1;

            // Ratio test. `None` for the leaving row means a bound flip.
            let mut step = self.hi[q] - self.lo[q];
            let mut leaving: Option<(usize, bool)> = None;
            let mut leaving_pivot = 0.0f64;
            for r in 0..self.m {
                let alpha = self.tab[r * self.cols + q] * dir;
                let b = self.basis[r];
                let (limit, to_upper) = if alpha > PIVOT_TOLERANCE {
                    ((self.x[b] - self.lo[b]) / alpha, false)
                } else if alpha < -PIVOT_TOLERANCE && self.hi[b].is_finite() {
                    ((self.hi[b] - self.x[b]) / -alpha, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < step - RATIO_TIE {
                    true
                } else if limit <= step + RATIO_TIE {
                    match leaving {
                        None => false,
                        Some((lr, _)) if self.bland => b < self.basis[lr],
                        Some((lr, _)) => {
                            alpha.abs() > leaving_pivot
                                || (alpha.abs() == leaving_pivot && b < self.basis[lr])
                        }
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leaving = Some((r, to_upper));
                    leaving_pivot = alpha.abs();
                }
            }
            if step.is_infinite() {
                return RunOutcome::Unbounded;
            }

            if step <= RATIO_TIE {
                self.degenerate += 1;
                if self.degenerate > stall_limit {
                    self.bland = true;
                }
            }

            if step > 0.0 {
                self.x[q] += dir * step;
                for r in 0..self.m {
                    let t = self.tab[r * self.cols + q];
                    if t != 0.0 {
                        self.x[self.basis[r]] -= t * dir * step;
                    }
                }
            }

            match leaving {
                None => {
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, to_upper)) => {
                    let b = self.basis[r];
                    self.pivot(r, q);
                    self.x[b] = if to_upper { self.hi[b] } else { self.lo[b] };
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.tab[r * cols + q];
        {
            let row = &mut self.tab[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for other in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = other[q];
            if f != 0.0 {
                for (o, pr) in other.iter_mut().zip(pivot_row.iter()) {
                    *o -= f * pr;
                }
                other[q] = 0.0;
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (d, pr) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *d -= f * pr;
            }
            self.reduced[q] = 0.0;
        }
        let old = self.basis[r];
        self.in_basis[old] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
    }
}
