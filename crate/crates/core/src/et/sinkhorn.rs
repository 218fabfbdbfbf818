//! Log-domain scaling iterations for KL-penalized transport.
//!
//! Solves the entropic problem
//! `rho KL(g1|mu1) + rho KL(g2|mu2) + <c, g> + eps KL(g | mu1 x mu2)`
//! by exact block-coordinate ascent on its dual. Each half-step is the KL
//! prox in closed form: potentials are damped by `rho / (rho + eps)`. A
//! translation step `f + t, g - t` with optimal `t` is interleaved; it only
//! moves along the slow direction of the plain iteration.

use nalgebra::DMatrix;

use super::{EtDiagnostics, EtProblem, EtSolution};
use crate::error::{Error, Result};

struct Kernel<'a> {
    problem: &'a EtProblem,
    rho: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
    log_mu1: Vec<f64>,
    log_mu2: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(problem: &'a EtProblem) -> Result<Self> {
        let rho = problem
            .entropy()
            .kl_weight()
            .ok_or_else(|| Error::Unsupported(format!("Sinkhorn scaling needs a KL entropy, got {}", problem.entropy())))?;
        let (mu1, mu2, c) = (problem.mu1(), problem.mu2(), problem.cost());
        let reachable = |i: usize, j: usize| mu1[i] > 0.0 && mu2[j] > 0.0 && c[(i, j)].is_finite();
        let rows = (0..mu1.len()).filter(|&i| (0..mu2.len()).any(|j| reachable(i, j))).collect();
        let cols = (0..mu2.len()).filter(|&j| (0..mu1.len()).any(|i| reachable(i, j))).collect();
        Ok(Self {
            problem,
            rho,
            rows,
            cols,
            log_mu1: mu1.iter().map(|m| m.ln()).collect(),
            log_mu2: mu2.iter().map(|m| m.ln()).collect(),
        })
    }

    fn row_update(&self, f: &mut [f64], g: &[f64], eps: f64) -> f64 {
        let damp = self.rho * eps / (self.rho + eps);
        let c = self.problem.cost();
        let mut change = 0.0f64;
        let mut terms = Vec::with_capacity(self.cols.len());
        for &i in &self.rows {
            terms.clear();
            terms.extend(self.cols.iter().map(|&j| self.log_mu2[j] + (g[j] - c[(i, j)]) / eps));
            let new = -damp * log_sum_exp(&terms);
            change = change.max((new - f[i]).abs());
            f[i] = new;
        }
        change
    }

    fn col_update(&self, f: &[f64], g: &mut [f64], eps: f64) -> f64 {
        let damp = self.rho * eps / (self.rho + eps);
        let c = self.problem.cost();
        let mut change = 0.0f64;
        let mut terms = Vec::with_capacity(self.rows.len());
        for &j in &self.cols {
            terms.clear();
            terms.extend(self.rows.iter().map(|&i| self.log_mu1[i] + (f[i] - c[(i, j)]) / eps));
            let new = -damp * log_sum_exp(&terms);
            change = change.max((new - g[j]).abs());
            g[j] = new;
        }
        change
    }

    /// Optimal shift `f + t`, `g - t`; returns `|t|`.
    fn translate(&self, f: &mut [f64], g: &mut [f64]) -> f64 {
        let a: Vec<f64> = self.rows.iter().map(|&i| self.log_mu1[i] - f[i] / self.rho).collect();
        let b: Vec<f64> = self.cols.iter().map(|&j| self.log_mu2[j] - g[j] / self.rho).collect();
        let t = 0.5 * self.rho * (log_sum_exp(&a) - log_sum_exp(&b));
        if !t.is_finite() {
            return 0.0;
        }
        for &i in &self.rows {
            f[i] += t;
        }
        for &j in &self.cols {
            g[j] -= t;
        }
        t.abs()
    }

    fn plan(&self, f: &[f64], g: &[f64], eps: f64) -> DMatrix<f64> {
        let (n1, n2) = self.problem.shape();
        let c = self.problem.cost();
        let mut gamma = DMatrix::zeros(n1, n2);
        for &i in &self.rows {
            for &j in &self.cols {
                let e = self.log_mu1[i] + self.log_mu2[j] + (f[i] + g[j] - c[(i, j)]) / eps;
                gamma[(i, j)] = e.exp();
            }
        }
        gamma
    }

    /// Dual objective of the entropic problem (up to a constant).
    fn dual(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let (mu1, mu2) = (self.problem.mu1(), self.problem.mu2());
        let mut v = 0.0;
        for &i in &self.rows {
            v -= self.rho * mu1[i] * ((-f[i] / self.rho).exp() - 1.0);
        }
        for &j in &self.cols {
            v -= self.rho * mu2[j] * ((-g[j] / self.rho).exp() - 1.0);
        }
        v - eps * self.plan(f, g, eps).sum()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) struct SinkhornRun {
    pub solution: EtSolution,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Dual objective sampled after every sweep.
    #[cfg_attr(not(test), allow(dead_code))]
    pub dual_trace: Vec<f64>,
}

pub(crate) fn run(
    problem: &EtProblem,
    eps: f64,
    max_iter: usize,
    tol: f64,
    warm: Option<(Vec<f64>, Vec<f64>)>,
    trace: bool,
) -> Result<SinkhornRun> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let kernel = Kernel::new(problem)?;
    let (n1, n2) = problem.shape();
    let (mut f, mut g) = warm.unwrap_or_else(|| (vec![0.0; n1], vec![0.0; n2]));
    let mut dual_trace = Vec::new();
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    // Potentials are in cost units; the plan reacts to changes of size eps.
    let threshold = tol.max(1e-15) * eps;
    while iterations < max_iter {
        iterations += 1;
        let df = kernel.row_update(&mut f, &g, eps);
        let dg = kernel.col_update(&f, &mut g, eps);
        let dt = kernel.translate(&mut f, &mut g);
        change = df.max(dg).max(dt);
        if trace {
            dual_trace.push(kernel.dual(&f, &g, eps));
        }
        if change <= threshold {
            break;
        }
    }
    let gamma = kernel.plan(&f, &g, eps);
    let solution = problem.solution(gamma, EtDiagnostics::new("sinkhorn", iterations, change));
    Ok(SinkhornRun { solution, f, g, dual_trace })
}

/// Entropic scaling at a single `epsilon`. The value reported is the
/// unregularized objective of the returned plan.
pub fn sinkhorn_kl(problem: &EtProblem, epsilon: f64, max_iter: usize, tol: f64) -> Result<EtSolution> {
    Ok(run(problem, epsilon, max_iter, tol, None, false)?.solution)
}

/// Runs a decreasing `epsilon` schedule with warm-started potentials and
/// returns the endpoint.
pub fn sinkhorn_kl_schedule(problem: &EtProblem, schedule: &[f64], max_iter: usize, tol: f64) -> Result<EtSolution> {
    let mut warm = None;
    let mut last = None;
    let mut iterations = 0;
    for &eps in schedule {
        let r = run(problem, eps, max_iter, tol, warm.take(), false)?;
        iterations += r.solution.diagnostics.iterations;
        warm = Some((r.f, r.g));
        last = Some(r.solution);
    }
    let mut s = last.ok_or_else(|| Error::Domain("empty epsilon schedule".into()))?;
    s.diagnostics.iterations = iterations;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EntropyFunction;
    use crate::et::{solve_generic, EtOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> EtProblem {
        let pts: Vec<(f64, f64)> = (0..2 * n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let cost = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (pts[i], pts[n + j]);
            (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
        });
        let mu1 = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let mu2 = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        EtProblem::new(cost, mu1, mu2, EntropyFunction::Kl).unwrap()
    }

    #[test]
    fn dirac_pair_at_small_epsilon() {
        let d: f64 = 0.7;
        let c = -(d.cos().powi(2)).ln();
        let p = EtProblem::new(DMatrix::from_element(1, 1, c), vec![1.0], vec![4.0], EntropyFunction::Kl).unwrap();
        let s = sinkhorn_kl(&p, 1e-6, 100_000, 1e-9).unwrap();
        let expected = 5.0 - 4.0 * d.cos();
        assert!((s.value.value() - expected).abs() < 1e-4);
    }

    #[test]
    fn identical_measures_approach_zero() {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = EtProblem::new(cost, vec![1.0, 2.0], vec![1.0, 2.0], EntropyFunction::Kl).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let v = sinkhorn_kl(&p, eps, 100_000, 1e-12).unwrap().value.value();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn dual_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 6);
        let r = run(&p, 1e-2, 500, 1e-14, None, true).unwrap();
        for w in r.dual_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn schedule_decreases_towards_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 5);
        let reference = solve_generic(&p, &EtOptions::default()).unwrap().value.value();
        let mut warm = None;
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let r = run(&p, eps, 100_000, 1e-12, warm.take(), false).unwrap();
            let v = r.solution.value.value();
            assert!(v <= prev + 1e-12, "{v} after {prev}");
            prev = v;
            warm = Some((r.f, r.g));
        }
        assert!((prev - reference).abs() <= 1e-4 * reference.max(1e-12), "{prev} vs {reference}");
    }
}
