//! Path-following log-barrier Newton method for smooth entropies.
//!
//! The objective is convex in the plan, its Hessian is a sum of rank-one
//! terms over rows and columns, so each affine-scaled Newton system
//! `(G H G + tau I) delta = tau 1 - G grad` is reduced by the Woodbury
//! identity to a `(n1 + n2)`-square positive definite solve.

use nalgebra::{DMatrix, DVector};

use super::{EtDiagnostics, EtOptions, EtProblem, EtSolution};
use crate::error::{Error, Result};

struct Active {
    i: Vec<usize>,
    j: Vec<usize>,
    c: Vec<f64>,
    /// Compressed row and column indices.
    r: Vec<usize>,
    s: Vec<usize>,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
}

impl Active {
    fn new(problem: &EtProblem) -> Self {
        let (mu1, mu2, cost) = (problem.mu1(), problem.mu2(), problem.cost());
        let (n1, n2) = problem.shape();
        let mut row_map = vec![usize::MAX; n1];
        let mut col_map = vec![usize::MAX; n2];
        let mut a = Active { i: vec![], j: vec![], c: vec![], r: vec![], s: vec![], row_ids: vec![], col_ids: vec![] };
        for i in 0..n1 {
            for j in 0..n2 {
                let c = cost[(i, j)];
                if !(c.is_finite() && mu1[i] > 0.0 && mu2[j] > 0.0) {
                    continue;
                }
                if row_map[i] == usize::MAX {
                    row_map[i] = a.row_ids.len();
                    a.row_ids.push(i);
                }
                if col_map[j] == usize::MAX {
                    col_map[j] = a.col_ids.len();
                    a.col_ids.push(j);
                }
                a.i.push(i);
                a.j.push(j);
                a.c.push(c);
                a.r.push(row_map[i]);
                a.s.push(col_map[j]);
            }
        }
        a
    }

    fn len(&self) -> usize {
        self.c.len()
    }
}

struct Model<'a> {
    problem: &'a EtProblem,
    act: Active,
    mu_r: Vec<f64>,
    mu_s: Vec<f64>,
}

impl<'a> Model<'a> {
    fn marginals(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.mu_r.len()];
        let mut b = vec![0.0; self.mu_s.len()];
        for k in 0..x.len() {
            a[self.act.r[k]] += x[k];
            b[self.act.s[k]] += x[k];
        }
        (a, b)
    }

    /// Objective restricted to active rows and columns (the rest is constant).
    fn objective(&self, x: &[f64]) -> f64 {
        let f = self.problem.entropy();
        let (a, b) = self.marginals(x);
        let mut v: f64 = x.iter().zip(&self.act.c).map(|(x, c)| x * c).sum();
        for (g, m) in a.iter().zip(&self.mu_r).chain(b.iter().zip(&self.mu_s)) {
            v += m * f.value(g / m);
        }
        v
    }

    fn barrier(&self, x: &[f64], tau: f64) -> f64 {
        if x.iter().any(|v| !(*v > 0.0)) {
            return f64::INFINITY;
        }
        self.objective(x) - tau * x.iter().map(|v| v.ln()).sum::<f64>()
    }

    fn gamma(&self, x: &[f64]) -> DMatrix<f64> {
        let (n1, n2) = self.problem.shape();
        let mut g = DMatrix::zeros(n1, n2);
        for k in 0..x.len() {
            g[(self.act.i[k], self.act.j[k])] = x[k];
        }
        g
    }

    /// Affine-scaled Newton direction for `f - tau sum log x`; returns the
    /// step `dx` and the squared Newton decrement.
    fn newton(&self, x: &[f64], tau: f64) -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let f = self.problem.entropy();
        let (a, b) = self.marginals(x);
        let (k1, k2) = (a.len(), b.len());
        let mut grad = self.act.c.clone();
        for k in 0..x.len() {
            let (r, s) = (self.act.r[k], self.act.s[k]);
            grad[k] += f.derivative(a[r] / self.mu_r[r])? + f.derivative(b[s] / self.mu_s[s])?;
        }
        let rhs: Vec<f64> = x.iter().zip(&grad).map(|(x, g)| tau - x * g).collect();

        let mut kmat = DMatrix::<f64>::zeros(k1 + k2, k1 + k2);
        for r in 0..k1 {
            kmat[(r, r)] = tau * self.mu_r[r] / f.second_derivative(a[r] / self.mu_r[r])?;
        }
        for s in 0..k2 {
            kmat[(k1 + s, k1 + s)] = tau * self.mu_s[s] / f.second_derivative(b[s] / self.mu_s[s])?;
        }
        let mut vr = DVector::<f64>::zeros(k1 + k2);
        for k in 0..x.len() {
            let (r, s) = (self.act.r[k], k1 + self.act.s[k]);
            let x2 = x[k] * x[k];
            kmat[(r, r)] += x2;
            kmat[(s, s)] += x2;
            kmat[(r, s)] += x2;
            kmat[(s, r)] += x2;
            vr[r] += x[k] * rhs[k];
            vr[s] += x[k] * rhs[k];
        }
        if kmat.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let z = match kmat.clone().cholesky() {
            Some(ch) => ch.solve(&vr),
            None => kmat.lu().solve(&vr)?,
        };
        let mut dx = vec![0.0; x.len()];
        let mut decrement = 0.0;
        for k in 0..x.len() {
            let delta = (rhs[k] - x[k] * (z[self.act.r[k]] + z[k1 + self.act.s[k]])) / tau;
            dx[k] = x[k] * delta;
            decrement += rhs[k] * delta;
        }
        Some((dx, decrement, grad))
    }
}

/// Barrier Newton solver for KL, scaled KL and power-like entropies.
pub fn solve_generic(problem: &EtProblem, options: &EtOptions) -> Result<EtSolution> {
    solve_generic_from(problem, options, None)
}

pub(crate) fn solve_generic_from(
    problem: &EtProblem,
    options: &EtOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<EtSolution> {
    let f = problem.entropy();
    if !f.is_smooth() {
        return Err(Error::Unsupported(format!("the barrier solver needs a smooth entropy, got {f}")));
    }
    let (n1, n2) = problem.shape();
    let (m1, m2) = problem.masses();
    let act = Active::new(problem);
    if m1 == 0.0 || m2 == 0.0 || act.len() == 0 {
        return Ok(problem.solution(DMatrix::zeros(n1, n2), EtDiagnostics::new("empty-plan", 0, 0.0)));
    }
    let model = Model {
        problem,
        mu_r: act.row_ids.iter().map(|&i| problem.mu1()[i]).collect(),
        mu_s: act.col_ids.iter().map(|&j| problem.mu2()[j]).collect(),
        act,
    };
    let n = model.act.len();
    let mass = m1 + m2;
    let nf = n as f64;
    let width = n1.max(n2) as f64;

    let (mut x, mut tau): (Vec<f64>, f64) = match start {
        Some(g0) => {
            let floor = 1e-10 * mass / nf;
            let x = (0..n).map(|k| g0[(model.act.i[k], model.act.j[k])].max(floor)).collect();
            (x, 1e-6 * mass / nf)
        }
        None => {
            let x = (0..n)
                .map(|k| {
                    let (i, j) = (model.act.i[k], model.act.j[k]);
                    let m = (problem.mu1()[i] * problem.mu2()[j]).sqrt();
                    m * (-model.act.c[k].min(40.0) / 2.0).exp().max(1e-8) / width
                })
                .collect();
            (x, 0.1 * mass / nf)
        }
    };
    let tau_final = 1e-11 * mass / nf;

    let mut iterations = 0usize;
    let mut last_decrement = 0.0;
    loop {
        let last_stage = tau <= tau_final * 1.000_001;
        let stage_tol = if last_stage { 1e-6 * nf * tau } else { nf * tau };
        let mut stalls = 0;
        while iterations < options.max_iter {
            let Some((dx, decrement, grad)) = model.newton(&x, tau) else {
                return Err(Error::Internal("non-finite Newton system".into()));
            };
            last_decrement = decrement;
            if decrement <= stage_tol {
                break;
            }
            iterations += 1;
            let mut alpha_max: f64 = 1.0;
            for (xk, dk) in x.iter().zip(&dx) {
                if *dk < 0.0 {
                    alpha_max = alpha_max.min(-0.99 * xk / dk);
                }
            }
            let phi0 = model.barrier(&x, tau);
            let slope: f64 = dx.iter().zip(&grad).zip(&x).map(|((d, g), xk)| d * (g - tau / xk)).sum();
            let mut alpha = alpha_max;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(xk, dk)| xk + alpha * dk).collect();
                let phi = model.barrier(&trial, tau);
                if phi <= phi0 + 1e-4 * alpha * slope {
                    accepted = phi < phi0 || alpha == alpha_max;
                    x = trial;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            }
        }
        if last_stage || iterations >= options.max_iter {
            break;
        }
        tau = (tau * 0.1).max(tau_final);
    }

    let mut gamma = model.gamma(&x);
    cleanup(problem, &mut gamma);
    Ok(problem.solution(gamma, EtDiagnostics::new("barrier-newton", iterations, last_decrement)))
}

/// Zeroes negligible entries when that does not increase the objective.
fn cleanup(problem: &EtProblem, gamma: &mut DMatrix<f64>) {
    let max = gamma.max();
    if max <= 0.0 {
        return;
    }
    let current = problem.evaluate(gamma).total();
    for rel in [1e-6, 1e-9, 1e-12] {
        let trial = gamma.map(|g| if g < rel * max { 0.0 } else { g });
        if problem.evaluate(&trial).total() <= current {
            *gamma = trial;
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EntropyFunction;
    use crate::ext::ExtReal;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn single_entry_matches_marginal_perspective(a in 0.05f64..5.0, b in 0.05f64..5.0, c in 0.0f64..4.0, p in 1.2f64..3.0) {
            for f in [EntropyFunction::Kl, EntropyFunction::PowerLike(p), EntropyFunction::ScaledKl(3.0)] {
                let prob = EtProblem::new(DMatrix::from_element(1, 1, c), vec![a], vec![b], f).unwrap();
                let s = solve_generic(&prob, &EtOptions::default()).unwrap();
                let h = f.marginal_perspective(ExtReal::new(c), a, b).unwrap().value.value();
                prop_assert!((s.value.value() - h).abs() <= 1e-9 * (1.0 + h), "{} {} vs {}", f, s.value, h);
            }
        }
    }
}
