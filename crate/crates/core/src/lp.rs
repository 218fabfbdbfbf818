//! Small dense linear programs.
//!
//! Bounded-variable primal simplex on a full tableau, two phases, Dantzig
//! pricing with a switch to Bland's rule after a run of degenerate pivots.
//! Every optimal answer is re-derived from a fresh LU factorization of the
//! final basis and certified by primal feasibility, complementary slackness
//! and a zero duality gap; anything that fails the certificate comes back
//! as [`LpStatus::NumericalFailure`].
//!
//! Dual sign convention: the Lagrangian is `c.x - y.(Ax - b)`, so `>=` rows
//! carry `y >= 0` and `<=` rows carry `y <= 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-8;
const SLACKNESS_TOL: f64 = 1e-7;
const GAP_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse coefficients `(variable, value)`.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c.x` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// `(lower, upper)`; infinities allowed. Defaults to `[0, inf)`.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a row given dense coefficients; returns its index.
    pub fn add_constraint(&mut self, coeffs: &[f64], relation: Relation, rhs: f64) -> usize {
        let terms = coeffs.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (j, *a)).collect();
        self.add_sparse_constraint(terms, relation, rhs)
    }

    pub fn add_sparse_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { terms, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Dimension(format!("{} bounds for {} variables", self.bounds.len(), n)));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Lp("objective has a non-finite coefficient".into()));
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Lp(format!("variable {k} has bounds [{lo}, {hi}]")));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Lp(format!("row {i} has a non-finite right-hand side")));
            }
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(Error::Dimension(format!("row {i} references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(Error::Lp(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// `A x` for every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|row| row.terms.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub dual_value: f64,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per constraint.
    pub dual: Vec<f64>,
    pub diagnostics: LpDiagnostics,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, n: usize, m: usize, iterations: usize, message: String) -> Self {
        let value = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            x: vec![0.0; n],
            value,
            dual: vec![0.0; m],
            diagnostics: LpDiagnostics { iterations, message: Some(message), ..Default::default() },
        }
    }
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, lower: f64 },
    Negate { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    a: DMatrix<f64>,
    b: Vec<f64>,
    upper: Vec<f64>,
    t: DMatrix<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    d: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

/// Solves `B^T y = c_B` for the basis columns of `a`.
fn bmat_transpose_solve(a: &DMatrix<f64>, basis: &[usize], cb: &nalgebra::DVector<f64>) -> Option<nalgebra::DVector<f64>> {
    let m = a.nrows();
    let mut bt = DMatrix::zeros(m, m);
    for (k, &col) in basis.iter().enumerate() {
        bt.set_row(k, &a.column(col).transpose());
    }
    bt.lu().solve(cb)
}

enum Outcome {
    Optimal,
    Unbounded,
    Failure(String),
}

impl Tableau {
    fn m(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn price(&mut self, cost: &[f64]) {
        let (m, n) = (self.m(), self.ncols());
        for j in 0..n {
            let mut v = cost[j];
            for i in 0..m {
                v -= cost[self.basis[i]] * self.t[(i, j)];
            }
            self.d[j] = v;
        }
    }

    fn refactor(&mut self, cost: &[f64]) -> std::result::Result<(), String> {
        let m = self.m();
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &col) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.a.column(col));
        }
        let inv = bmat.lu().try_inverse().ok_or("singular basis during refactorization")?;
        let t = &inv * &self.a;
        let mut rhs = nalgebra::DVector::from_vec(self.b.clone());
        for j in 0..self.ncols() {
            if self.state[j] == State::Upper {
                rhs.axpy(-self.upper[j], &self.a.column(j), 1.0);
            }
        }
        let xb = &inv * rhs;
        if t.iter().chain(xb.iter()).any(|v| !v.is_finite()) {
            return Err("non-finite values after refactorization".into());
        }
        self.t = t;
        self.xb = xb.iter().copied().collect();
        self.since_refactor = 0;
        self.price(cost);
        Ok(())
    }

    /// Recomputes the basic values and reduced costs from `B` directly.
    fn reprice(&mut self, cost: &[f64]) -> bool {
        let m = self.m();
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &col) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.a.column(col));
        }
        let lu = bmat.lu();
        let mut rhs = nalgebra::DVector::from_vec(self.b.clone());
        for j in 0..self.ncols() {
            if self.state[j] == State::Upper {
                rhs.axpy(-self.upper[j], &self.a.column(j), 1.0);
            }
        }
        let Some(xb) = lu.solve(&rhs) else { return false };
        let cb = nalgebra::DVector::from_iterator(m, self.basis.iter().map(|&b| cost[b]));
        let Some(y) = bmat_transpose_solve(&self.a, &self.basis, &cb) else { return false };
        if xb.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return false;
        }
        self.xb = xb.iter().copied().collect();
        for j in 0..self.ncols() {
            self.d[j] = cost[j] - self.a.column(j).dot(&y);
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
        true
    }

    fn entering(&self, bland: bool, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols() {
            if self.upper[j] <= 0.0 {
                continue;
            }
            let dir = match self.state[j] {
                State::Lower if self.d[j] < -tol => 1.0,
                State::Upper if self.d[j] > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(k, _)| self.d[j].abs() > self.d[k].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs the simplex to optimality for `cost`.
    fn optimize(&mut self, cost: &[f64], max_iter: usize) -> Outcome {
        // A recent tableau only needs pricing; optimality is re-checked on a fresh one.
        if self.since_refactor < REFACTOR_EVERY / 2 {
            self.price(cost);
        } else if let Err(e) = self.refactor(cost) {
            return Outcome::Failure(e);
        }
        let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let tol = OPT_TOL * scale;
        let mut degenerate = 0usize;
        let mut confirmed = false;
        loop {
            if self.iterations >= max_iter {
                return Outcome::Failure(format!("iteration limit {max_iter} reached"));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((q, dir)) = self.entering(bland, tol) else {
                if confirmed || self.since_refactor == 0 {
                    return Outcome::Optimal;
                }
                // Re-check optimality with prices from a fresh factorization of
                // the basis; the full tableau is rebuilt only if that fails.
                if self.reprice(cost) && self.entering(false, tol).is_none() {
                    return Outcome::Optimal;
                }
                if let Err(e) = self.refactor(cost) {
                    return Outcome::Failure(e);
                }
                confirmed = true;
                continue;
            };
            confirmed = false;
            self.iterations += 1;

            let m = self.m();
            let mut step = self.upper[q];
            let mut leave: Option<(usize, State)> = None;
            let mut leave_pivot = 0.0f64;
            for i in 0..m {
                let alpha = dir * self.t[(i, q)];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let bvar = self.basis[i];
                let (limit, to) = if alpha > 0.0 {
                    (self.xb[i].max(0.0) / alpha, State::Lower)
                } else if self.upper[bvar].is_finite() {
                    ((self.upper[bvar] - self.xb[i]).max(0.0) / -alpha, State::Upper)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((r, _)) if limit <= step + 1e-12 => {
                        if bland {
                            bvar < self.basis[r]
                        } else {
                            alpha.abs() > leave_pivot
                        }
                    }
                    None if limit <= step + 1e-12 && limit < step => true,
                    _ => false,
                };
                if better {
                    step = limit.min(step);
                    leave = Some((i, to));
                    leave_pivot = alpha.abs();
                }
            }

            if step.is_infinite() {
                return Outcome::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            for i in 0..m {
                self.xb[i] -= dir * step * self.t[(i, q)];
            }
            match leave {
                None => {
                    self.state[q] = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
                }
                Some((r, to)) => {
                    let entering_value = if dir > 0.0 { step } else { self.upper[q] - step };
                    let old = self.basis[r];
                    self.state[old] = to;
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    self.xb[r] = entering_value;
                    self.pivot(r, q);
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        if let Err(e) = self.refactor(cost) {
                            return Outcome::Failure(e);
                        }
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let m = self.m();
        let p = self.t[(r, q)];
        let col: Vec<f64> = self.t.column(q).iter().copied().collect();
        let dq = self.d[q];
        let data = self.t.as_mut_slice();
        for (j, column) in data.chunks_exact_mut(m).enumerate() {
            let trj = column[r] / p;
            if trj == 0.0 {
                continue;
            }
            for (v, ci) in column.iter_mut().zip(&col) {
                *v -= ci * trj;
            }
            column[r] = trj;
            self.d[j] -= dq * trj;
        }
        for i in 0..m {
            self.t[(i, q)] = if i == r { 1.0 } else { 0.0 };
        }
        self.d[q] = 0.0;
    }
}

/// Solves `lp`. Malformed programs are errors; everything else, including
/// numerical breakdown, is reported through [`LpSolution::status`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.constraints.len();
    if m == 0 {
        return Ok(solve_box(lp));
    }

    let mut maps = Vec::with_capacity(n);
    let mut col_upper = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let col = col_upper.len();
        if lo.is_finite() {
            maps.push(VarMap::Shift { col, lower: lo });
            col_upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Negate { col, upper: hi });
            col_upper.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split { pos: col, neg: col + 1 });
            col_upper.extend([f64::INFINITY, f64::INFINITY]);
        }
    }
    let n_struct = col_upper.len();
    let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();

    // Rows in standard form, before artificials.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut sign = vec![1.0; m];
    let mut slack_of = vec![None; m];
    let mut next_slack = n_struct;
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut b = c.rhs;
        let mut row = Vec::with_capacity(c.terms.len() + 1);
        for &(j, a) in &c.terms {
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    row.push((col, a));
                    b -= a * lower;
                }
                VarMap::Negate { col, upper } => {
                    row.push((col, -a));
                    b -= a * upper;
                }
                VarMap::Split { pos, neg } => {
                    row.push((pos, a));
                    row.push((neg, -a));
                }
            }
        }
        match c.relation {
            Relation::Le => row.push((next_slack, 1.0)),
            Relation::Ge => row.push((next_slack, -1.0)),
            Relation::Eq => {}
        }
        if c.relation != Relation::Eq {
            slack_of[i] = Some(next_slack);
            next_slack += 1;
        }
        if b < 0.0 {
            sign[i] = -1.0;
            b = -b;
            for t in row.iter_mut() {
                t.1 = -t.1;
            }
        }
        rows.push(row);
        rhs.push(b);
    }

    let mut basis = Vec::with_capacity(m);
    let mut artificial = Vec::new();
    for i in 0..m {
        let unit_slack = slack_of[i].filter(|&s| rows[i].iter().any(|&(c, a)| c == s && a == 1.0));
        match unit_slack {
            Some(s) => basis.push(s),
            None => {
                let col = n_struct + n_slack + artificial.len();
                artificial.push(col);
                basis.push(col);
            }
        }
    }
    let ncols = n_struct + n_slack + artificial.len();
    let mut a = DMatrix::zeros(m, ncols);
    for (i, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            a[(i, c)] += v;
        }
    }
    for (k, &col) in artificial.iter().enumerate() {
        let row = basis.iter().position(|&b| b == col).expect("artificial is basic");
        debug_assert!(k < m);
        a[(row, col)] = 1.0;
    }
    let mut upper = col_upper;
    upper.extend(std::iter::repeat(f64::INFINITY).take(n_slack + artificial.len()));

    let mut state = vec![State::Lower; ncols];
    for &b in &basis {
        state[b] = State::Basic;
    }
    let mut tab = Tableau {
        t: a.clone(),
        a,
        b: rhs.clone(),
        upper,
        xb: rhs.clone(),
        basis,
        state,
        d: vec![0.0; ncols],
        iterations: 0,
        since_refactor: 0,
    };
    let max_iter = 200 * (m + ncols) + 1000;

    if !artificial.is_empty() {
        let mut phase1 = vec![0.0; ncols];
        for &c in &artificial {
            phase1[c] = 1.0;
        }
        match tab.optimize(&phase1, max_iter) {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Ok(LpSolution::without_point(
                    LpStatus::NumericalFailure,
                    n,
                    m,
                    tab.iterations,
                    "phase 1 reported unbounded".into(),
                ))
            }
            Outcome::Failure(msg) => {
                return Ok(LpSolution::without_point(LpStatus::NumericalFailure, n, m, tab.iterations, msg))
            }
        }
        let infeas: f64 = tab.basis.iter().zip(&tab.xb).filter(|(b, _)| phase1[**b] > 0.0).map(|(_, x)| x).sum();
        let bnorm = rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeas > 1e-9 * (1.0 + bnorm) {
            return Ok(LpSolution::without_point(
                LpStatus::Infeasible,
                n,
                m,
                tab.iterations,
                format!("phase 1 residual {infeas:.3e}"),
            ));
        }
        for &c in &artificial {
            tab.upper[c] = 0.0;
            if tab.state[c] == State::Upper {
                tab.state[c] = State::Lower;
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j];
        match *map {
            VarMap::Shift { col, .. } => cost[col] = c,
            VarMap::Negate { col, .. } => cost[col] = -c,
            VarMap::Split { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }
    match tab.optimize(&cost, max_iter) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Ok(LpSolution::without_point(
                LpStatus::Unbounded,
                n,
                m,
                tab.iterations,
                "objective unbounded below".into(),
            ))
        }
        Outcome::Failure(msg) => {
            return Ok(LpSolution::without_point(LpStatus::NumericalFailure, n, m, tab.iterations, msg))
        }
    }

    // Primal point.
    let mut xs = vec![0.0; ncols];
    for j in 0..ncols {
        xs[j] = match tab.state[j] {
            State::Upper => tab.upper[j],
            _ => 0.0,
        };
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        xs[b] = tab.xb[i].clamp(0.0, tab.upper[b]);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lower } => lower + xs[col],
            VarMap::Negate { col, upper } => upper - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();

    // Duals from the final basis.
    let mut bt = DMatrix::zeros(m, m);
    for (k, &col) in tab.basis.iter().enumerate() {
        bt.set_row(k, &tab.a.column(col).transpose());
    }
    let cb = nalgebra::DVector::from_iterator(m, tab.basis.iter().map(|&b| cost[b]));
    let dual: Vec<f64> = match bt.lu().solve(&cb) {
        Some(y) => y.iter().zip(&sign).map(|(y, s)| y * s).collect(),
        None => {
            return Ok(LpSolution::without_point(
                LpStatus::NumericalFailure,
                n,
                m,
                tab.iterations,
                "singular final basis".into(),
            ))
        }
    };

    Ok(certify(lp, x, dual, tab.iterations))
}

/// No rows: every variable sits at its cheaper bound.
fn solve_box(lp: &LinearProgram) -> LpSolution {
    let mut x = Vec::with_capacity(lp.num_vars());
    for (&c, &(lo, hi)) in lp.objective.iter().zip(&lp.bounds) {
        let v = if c > 0.0 {
            lo
        } else if c < 0.0 {
            hi
        } else if lo.is_finite() {
            lo
        } else {
            hi.min(0.0)
        };
        if v.is_infinite() {
            return LpSolution::without_point(LpStatus::Unbounded, lp.num_vars(), 0, 0, "unbounded variable".into());
        }
        x.push(v);
    }
    certify(lp, x, Vec::new(), 0)
}

fn certify(lp: &LinearProgram, x: Vec<f64>, dual: Vec<f64>, iterations: usize) -> LpSolution {
    let n = lp.num_vars();
    let activity = lp.row_activity(&x);
    let value = lp.objective_value(&x);

    let mut primal_residual = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut dual_value = 0.0;
    let mut problems = Vec::new();

    for (i, c) in lp.constraints.iter().enumerate() {
        let r = activity[i] - c.rhs;
        let viol = match c.relation {
            Relation::Le => r.max(0.0),
            Relation::Ge => (-r).max(0.0),
            Relation::Eq => r.abs(),
        };
        primal_residual = primal_residual.max(viol / (1.0 + c.rhs.abs()));
        let y = dual[i];
        let wrong_sign = match c.relation {
            Relation::Le => y.max(0.0),
            Relation::Ge => (-y).max(0.0),
            Relation::Eq => 0.0,
        };
        if wrong_sign > SLACKNESS_TOL {
            problems.push(format!("row {i} multiplier {y:.3e} has the wrong sign"));
        }
        if c.relation != Relation::Eq {
            complementarity = complementarity.max((y * r).abs());
        }
        dual_value += c.rhs * y;
    }
    for (&xv, &(lo, hi)) in x.iter().zip(&lp.bounds) {
        primal_residual = primal_residual.max((lo - xv).max(0.0)).max((xv - hi).max(0.0));
    }

    let mut reduced = lp.objective.clone();
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            reduced[j] -= a * dual[i];
        }
    }
    for j in 0..n {
        let (lo, hi) = lp.bounds[j];
        let r = reduced[j];
        if r > 0.0 {
            if lo.is_finite() {
                dual_value += lo * r;
                complementarity = complementarity.max(r * (x[j] - lo));
            } else if r > SLACKNESS_TOL {
                problems.push(format!("variable {j} has reduced cost {r:.3e} but no lower bound"));
            }
        } else if r < 0.0 {
            if hi.is_finite() {
                dual_value += hi * r;
                complementarity = complementarity.max(-r * (hi - x[j]));
            } else if r < -SLACKNESS_TOL {
                problems.push(format!("variable {j} has reduced cost {r:.3e} but no upper bound"));
            }
        }
    }

    let gap = (value - dual_value).abs();
    if primal_residual > PRIMAL_TOL {
        problems.push(format!("primal residual {primal_residual:.3e}"));
    }
    if complementarity > SLACKNESS_TOL {
        problems.push(format!("complementarity {complementarity:.3e}"));
    }
    if gap > GAP_TOL * (1.0 + value.abs()) {
        problems.push(format!("duality gap {gap:.3e}"));
    }

    let status = if problems.is_empty() { LpStatus::Optimal } else { LpStatus::NumericalFailure };
    if status != LpStatus::Optimal {
        log::warn!("LP certificate failed: {}", problems.join("; "));
    }
    LpSolution {
        status,
        x,
        value,
        dual,
        diagnostics: LpDiagnostics {
            iterations,
            primal_residual,
            complementarity,
            duality_gap: gap,
            dual_value,
            message: (!problems.is_empty()).then(|| problems.join("; ")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(&[1.0], Relation::Ge, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.value - 3.0).abs() < 1e-12);
        assert!((s.dual[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_variation_with_slacks() {
        // min p1 + q1 + p2 + q2, g_i - mu_i = p_i - q_i.
        let mu = [1.0, 2.0];
        let mut lp = LinearProgram::new(vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        for i in 0..2 {
            lp.add_sparse_constraint(vec![(i, 1.0), (2 + 2 * i, -1.0), (3 + 2 * i, 1.0)], Relation::Eq, mu[i]);
        }
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.value.abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_route_transport() {
        let mut lp = LinearProgram::new(vec![2.0]);
        lp.add_constraint(&[1.0], Relation::Eq, 1.0);
        lp.add_constraint(&[1.0], Relation::Eq, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(&[1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(&[1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min x - y, x free with x >= -2 as a row, y <= 5 with no lower bound.
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 5.0);
        lp.add_constraint(&[1.0, 0.0], Relation::Ge, -2.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 7.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_programs_are_errors() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_sparse_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(solve_lp(&lp).is_err());
        let mut lp = LinearProgram::new(vec![f64::NAN]);
        lp.add_constraint(&[1.0], Relation::Le, 1.0);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn redundant_equalities() {
        // Balanced 2x2 transport: one row is implied by the others.
        let c = [1.0, 3.0, 2.0, 0.5];
        let mut lp = LinearProgram::new(c.to_vec());
        lp.add_sparse_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_sparse_constraint(vec![(2, 1.0), (3, 1.0)], Relation::Eq, 2.0);
        lp.add_sparse_constraint(vec![(0, 1.0), (2, 1.0)], Relation::Eq, 1.5);
        lp.add_sparse_constraint(vec![(1, 1.0), (3, 1.0)], Relation::Eq, 1.5);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // Route 1 -> 1 fully, remaining mass 0.5 of source 2 to sink 1 at 2, 1.5 at 0.5.
        assert!((s.value - (1.0 + 1.0 + 0.75)).abs() < 1e-10, "{}", s.value);
    }

    /// Brute-force oracle: enumerate vertices of `{x in [0, u]^n : A x <= b}`
    /// for tiny n by solving every square subsystem of active constraints.
    fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64], u: f64) -> Option<f64> {
        let n = c.len();
        let mut planes: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), u));
            planes.push((e.iter().map(|v| -v).collect(), 0.0));
        }
        let k = planes.len();
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let mat = DMatrix::from_fn(n, n, |r, s| planes[idx[r]].0[s]);
            let rhs = nalgebra::DVector::from_fn(n, |r, _| planes[idx[r]].1);
            if let Some(x) = mat.lu().solve(&rhs) {
                let ok = planes.iter().all(|(row, bb)| row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bb + 1e-9);
                if ok && x.iter().all(|v| v.is_finite()) {
                    let v: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for t in i + 1..n {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_programs_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=4);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..3.0)).collect();
            let mut lp = LinearProgram::new(c.clone());
            for j in 0..n {
                lp.set_bounds(j, 0.0, 4.0);
            }
            for (row, bb) in a.iter().zip(&b) {
                lp.add_constraint(row, Relation::Le, *bb);
            }
            let s = solve_lp(&lp).unwrap();
            match vertex_oracle(&c, &a, &b, 4.0) {
                Some(v) => {
                    assert_eq!(s.status, LpStatus::Optimal, "{:?}", s.diagnostics);
                    assert!((s.value - v).abs() < 1e-8, "{} vs {}", s.value, v);
                }
                None => assert_eq!(s.status, LpStatus::Infeasible),
            }
        }
    }

    fn random_feasible_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(0.1..3.0)).collect());
        for _ in 0..m {
            let row: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(-2.0..2.0) } else { 0.0 }).collect();
            let act: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
            let rel = match rng.gen_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            let rhs = match rel {
                Relation::Le => act + rng.gen_range(0.0..1.0),
                Relation::Ge => act - rng.gen_range(0.0..1.0),
                Relation::Eq => act,
            };
            lp.add_constraint(&row, rel, rhs);
        }
        lp
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn duality_and_permutation_invariance(seed in 0u64..10_000, n in 2usize..12, m in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lp = random_feasible_lp(&mut rng, n, m);
            let s = solve_lp(&lp).unwrap();
            prop_assert_eq!(s.status, LpStatus::Optimal, "{:?}", s.diagnostics);
            prop_assert!(s.diagnostics.duality_gap <= 1e-7 * (1.0 + s.value.abs()));

            let mut vperm: Vec<usize> = (0..n).collect();
            let mut rperm: Vec<usize> = (0..m).collect();
            for i in (1..n).rev() { vperm.swap(i, rng.gen_range(0..=i)); }
            for i in (1..m).rev() { rperm.swap(i, rng.gen_range(0..=i)); }
            let mut p = LinearProgram::new(vperm.iter().map(|&j| lp.objective[j]).collect());
            let inv: Vec<usize> = { let mut v = vec![0; n]; for (k, &j) in vperm.iter().enumerate() { v[j] = k; } v };
            for &i in &rperm {
                let c = &lp.constraints[i];
                p.add_sparse_constraint(c.terms.iter().map(|&(j, a)| (inv[j], a)).collect(), c.relation, c.rhs);
            }
            let t = solve_lp(&p).unwrap();
            prop_assert_eq!(t.status, LpStatus::Optimal);
            prop_assert!((s.value - t.value).abs() <= 1e-9 * (1.0 + s.value.abs()), "{} vs {}", s.value, t.value);
        }
    }
}
