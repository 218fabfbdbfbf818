//! Linear-program forms: total variation (and its superlinear
//! regularizations), balanced transport for the indicator entropy, and the
//! flat-metric dual.

use nalgebra::DMatrix;

use super::{EtDiagnostics, EtProblem, EtSolution};
use crate::entropy::{EntropyFunction, INDICATOR_TOL};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation};

/// Finite-cost entries, in row-major order.
fn finite_entries(problem: &EtProblem) -> Vec<(usize, usize, f64)> {
    let (n1, n2) = problem.shape();
    let c = problem.cost();
    (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).filter_map(|(i, j)| c[(i, j)].is_finite().then(|| (i, j, c[(i, j)]))).collect()
}

fn require_optimal(s: LpSolution, what: &str) -> Result<LpSolution> {
    match s.status {
        LpStatus::Optimal => Ok(s),
        status => Err(Error::Lp(format!(
            "{what}: {status:?}{}",
            s.diagnostics.message.map(|m| format!(" ({m})")).unwrap_or_default()
        ))),
    }
}

/// `sum |g1 - mu1| + sum |g2 - mu2| + <c, g>` as an LP.
///
/// With `capped`, marginals are restricted to `g_i <= mu_i`; an optimum of
/// the total-variation problem always exists in that set, and there every
/// regularized entropy `F_n` agrees with `|s - 1|`.
pub(crate) fn tv_lp(problem: &EtProblem, capped: bool) -> Result<EtSolution> {
    let (n1, n2) = problem.shape();
    let entries = finite_entries(problem);
    let ne = entries.len();
    // Columns: plan entries, then per marginal either (p, q) or q alone.
    let per = if capped { 1 } else { 2 };
    let mut obj: Vec<f64> = entries.iter().map(|e| e.2).collect();
    obj.extend(std::iter::repeat(1.0).take(per * (n1 + n2)));
    let mut lp = LinearProgram::new(obj);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n1 + n2];
    for (k, &(i, j, _)) in entries.iter().enumerate() {
        rows[i].push((k, 1.0));
        rows[n1 + j].push((k, 1.0));
    }
    let mu: Vec<f64> = problem.mu1().iter().chain(problem.mu2()).copied().collect();
    for (r, mut terms) in rows.into_iter().enumerate() {
        // g_r + q_r - p_r = mu_r
        let base = ne + per * r;
        terms.push((base, 1.0));
        if !capped {
            terms.push((base + 1, -1.0));
        }
        lp.add_sparse_constraint(terms, Relation::Eq, mu[r]);
    }
    let s = require_optimal(solve_lp(&lp)?, "total-variation transport")?;
    let mut gamma = DMatrix::zeros(n1, n2);
    for (k, &(i, j, _)) in entries.iter().enumerate() {
        gamma[(i, j)] = s.x[k].max(0.0);
    }
    let method = if capped { "lp-capped" } else { "lp" };
    Ok(problem.solution(gamma, EtDiagnostics::new(method, s.diagnostics.iterations, s.diagnostics.duality_gap)))
}

/// Bounded-Lipschitz primal: the ET problem with `F = |s - 1|`.
pub fn bl_cost(problem: &EtProblem) -> Result<EtSolution> {
    if problem.entropy() != EntropyFunction::TotalVariation {
        return Err(Error::Unsupported(format!("bl_cost needs the tv entropy, got {}", problem.entropy())));
    }
    tv_lp(problem, false)
}

/// Flat-metric dual `sup { sum f (mu1 - mu2) : |f| <= 1, Lip(f) <= 1 }` for
/// two measures on one space.
pub fn bl_dual(mu1: &[f64], mu2: &[f64], dist: &DMatrix<f64>) -> Result<f64> {
    let n = mu1.len();
    if mu2.len() != n || dist.nrows() != n || dist.ncols() != n {
        return Err(Error::Dimension(format!(
            "measures of lengths {} and {} on a {}x{} distance matrix",
            n,
            mu2.len(),
            dist.nrows(),
            dist.ncols()
        )));
    }
    let mut lp = LinearProgram::new(mu1.iter().zip(mu2).map(|(a, b)| b - a).collect());
    for k in 0..n {
        lp.set_bounds(k, -1.0, 1.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[(i, j)] < 2.0 {
                lp.add_sparse_constraint(vec![(i, 1.0), (j, -1.0)], Relation::Le, dist[(i, j)]);
            }
        }
    }
    let s = require_optimal(solve_lp(&lp)?, "flat-metric dual")?;
    Ok(-s.value)
}

/// Transport with both marginals fixed; `+inf` when total masses differ.
/// Masses equal up to `INDICATOR_TOL` are reconciled by rescaling `mu2`.
pub fn balanced_transport(problem: &EtProblem) -> Result<EtSolution> {
    let (n1, n2) = problem.shape();
    let (m1, m2) = problem.masses();
    let infinite = |why: &str| {
        let mut s = problem.solution(DMatrix::zeros(n1, n2), EtDiagnostics::new(why, 0, 0.0));
        s.value = crate::ext::ExtReal::INFINITY;
        s
    };
    if (m1 - m2).abs() > INDICATOR_TOL * m1.max(m2) {
        return Ok(infinite("unequal-mass"));
    }
    let scale = if m2 > 0.0 { m1 / m2 } else { 1.0 };
    // Entries touching a massless point stay at zero; round-off there
    // would cost F'(inf) = inf.
    let (mu1, mu2) = (problem.mu1(), problem.mu2());
    let entries: Vec<_> = finite_entries(problem).into_iter().filter(|&(i, j, _)| mu1[i] > 0.0 && mu2[j] > 0.0).collect();
    let mut lp = LinearProgram::new(entries.iter().map(|e| e.2).collect());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n1 + n2];
    for (k, &(i, j, _)) in entries.iter().enumerate() {
        rows[i].push((k, 1.0));
        rows[n1 + j].push((k, 1.0));
    }
    for (r, terms) in rows.into_iter().enumerate() {
        let rhs = if r < n1 { mu1[r] } else { mu2[r - n1] * scale };
        if terms.is_empty() {
            if rhs > 0.0 {
                return Ok(infinite("no-finite-coupling"));
            }
            continue;
        }
        lp.add_sparse_constraint(terms, Relation::Eq, rhs);
    }
    let s = solve_lp(&lp)?;
    if s.status == LpStatus::Infeasible {
        return Ok(infinite("no-finite-coupling"));
    }
    let s = require_optimal(s, "balanced transport")?;
    let mut gamma = DMatrix::zeros(n1, n2);
    for (k, &(i, j, _)) in entries.iter().enumerate() {
        gamma[(i, j)] = s.x[k].max(0.0);
    }
    Ok(problem.solution(gamma, EtDiagnostics::new("lp-balanced", s.diagnostics.iterations, s.diagnostics.duality_gap)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::et::{solve_et, EtOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_space(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)]).collect();
        DMatrix::from_fn(n, n, |i, j| ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt())
    }

    #[test]
    fn massless_points_do_not_break_balanced_transport() {
        let d = DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64).abs());
        let mu1 = vec![0.31841130306530163, 0.9232120626431897, 0.4567003919711269, 0.0];
        let mu2 = vec![0.37166275990789227, 1.3266609977717259, 0.0, 0.0];
        let scale = mu1.iter().sum::<f64>() / mu2.iter().sum::<f64>();
        let mu2: Vec<f64> = mu2.iter().map(|x| x * scale).collect();
        let p = EtProblem::new(d, mu1, mu2, EntropyFunction::Indicator).unwrap();
        let s = balanced_transport(&p).unwrap();
        assert!(s.value.is_finite(), "{:?}", s.diagnostics);
        assert!(s.gamma.gamma().row(3).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dirac_pair_flat_metric() {
        for (d, expected) in [(3.0, 2.0), (1.0, 1.0), (0.5, 0.5)] {
            let p = EtProblem::new(DMatrix::from_element(1, 1, d), vec![1.0], vec![1.0], EntropyFunction::TotalVariation).unwrap();
            assert!((bl_cost(&p).unwrap().value.value() - expected).abs() < 1e-12);
            let dist = DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]);
            assert!((bl_dual(&[1.0, 0.0], &[0.0, 1.0], &dist).unwrap() - expected).abs() < 1e-12);
            // 1-D scan of 2|θ - 1| + θd.
            let scan = (0..=4000).map(|k| k as f64 / 1000.0).map(|t| 2.0 * (t - 1.0f64).abs() + t * d).fold(f64::INFINITY, f64::min);
            assert!((scan - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn primal_equals_dual_and_caps_are_harmless() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.gen_range(1..7);
            let dist = random_space(&mut rng, n);
            let mu1: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) }).collect();
            let mu2: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let p = EtProblem::new(dist.clone(), mu1.clone(), mu2.clone(), EntropyFunction::TotalVariation).unwrap();
            let primal = bl_cost(&p).unwrap().value.value();
            let dual = bl_dual(&mu1, &mu2, &dist).unwrap();
            assert!((primal - dual).abs() < 1e-7, "{primal} vs {dual}");
            let capped = tv_lp(&p, true).unwrap().value.value();
            assert!((primal - capped).abs() < 1e-9);
            let reg = solve_et(&p.with_entropy(EntropyFunction::PiccoliRossiReg(2.0)), &EtOptions::default()).unwrap();
            assert!((reg.value.value() - primal).abs() < 1e-9);
        }
    }

    #[test]
    fn balanced_transport_single_route() {
        let p = EtProblem::new(DMatrix::from_element(1, 1, 2.0), vec![1.0], vec![1.0], EntropyFunction::Indicator).unwrap();
        assert!((balanced_transport(&p).unwrap().value.value() - 2.0).abs() < 1e-14);
    }
}
