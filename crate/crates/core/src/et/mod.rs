//! The discrete Entropy-Transport problem
//!
//! `min_gamma D_F(gamma_1 || mu_1) + D_F(gamma_2 || mu_2) + sum c_ij gamma_ij`
//!
//! over nonnegative plans, with specialized solvers per entropy kind and a
//! brute-force oracle for tiny instances.

mod barrier;
mod linear;
mod oracle;
mod sinkhorn;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::{Error, Result};
use crate::ext::{ext_mul, ExtReal};
use crate::mmspace::{marginals, Coupling};

pub use barrier::solve_generic;
pub use linear::{balanced_transport, bl_cost, bl_dual};
pub use oracle::brute_force_et;
pub use sinkhorn::{sinkhorn_kl, sinkhorn_kl_schedule};

/// Cost matrix, two mass vectors and an entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct EtProblem {
    cost: DMatrix<f64>,
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    entropy: EntropyFunction,
}

impl EtProblem {
    /// `cost` may hold `+inf`; entries must otherwise be nonnegative.
    pub fn new(cost: DMatrix<f64>, mu1: Vec<f64>, mu2: Vec<f64>, entropy: EntropyFunction) -> Result<Self> {
        if cost.nrows() != mu1.len() || cost.ncols() != mu2.len() {
            return Err(Error::Dimension(format!(
                "cost is {}x{} but masses have lengths {} and {}",
                cost.nrows(),
                cost.ncols(),
                mu1.len(),
                mu2.len()
            )));
        }
        for i in 0..cost.nrows() {
            for j in 0..cost.ncols() {
                let c = cost[(i, j)];
                if !(c >= 0.0) {
                    return Err(Error::NegativeEntry { row: i, col: j, value: c });
                }
            }
        }
        for m in mu1.iter().chain(&mu2) {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(Error::Domain(format!("mass {m} is not a nonnegative real")));
            }
        }
        Ok(Self { cost, mu1, mu2, entropy })
    }

    /// Cost `l(dist_ij)` from a distance block.
    pub fn from_distances(
        dist: &DMatrix<f64>,
        cost: CostFunction,
        mu1: Vec<f64>,
        mu2: Vec<f64>,
        entropy: EntropyFunction,
    ) -> Result<Self> {
        Self::new(dist.map(|d| cost.value(d.max(0.0))), mu1, mu2, entropy)
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn mu2(&self) -> &[f64] {
        &self.mu2
    }

    pub fn entropy(&self) -> EntropyFunction {
        self.entropy
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mu1.len(), self.mu2.len())
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.mu1.iter().sum(), self.mu2.iter().sum())
    }

    /// Same problem with sides exchanged.
    pub fn transposed(&self) -> Self {
        Self { cost: self.cost.transpose(), mu1: self.mu2.clone(), mu2: self.mu1.clone(), entropy: self.entropy }
    }

    /// Masses multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.cost.clone(),
            self.mu1.iter().map(|m| m * factor).collect(),
            self.mu2.iter().map(|m| m * factor).collect(),
            self.entropy,
        )
    }

    pub fn with_entropy(&self, entropy: EntropyFunction) -> Self {
        Self { entropy, ..self.clone() }
    }

    /// The three terms of the objective at `gamma`.
    pub fn evaluate(&self, gamma: &DMatrix<f64>) -> Breakdown {
        let (g1, g2) = marginals(gamma);
        let mut transport = 0.0;
        for (g, c) in gamma.iter().zip(self.cost.iter()) {
            transport += ext_mul(*g, *c);
        }
        Breakdown {
            divergence1: ExtReal::new(self.entropy.divergence_f64(&g1, &self.mu1)),
            divergence2: ExtReal::new(self.entropy.divergence_f64(&g2, &self.mu2)),
            transport: ExtReal::new(transport),
        }
    }

    /// Wraps `gamma` into a solution whose value is recomputed from it.
    pub(crate) fn solution(&self, gamma: DMatrix<f64>, diagnostics: EtDiagnostics) -> EtSolution {
        let breakdown = self.evaluate(&gamma);
        EtSolution { value: breakdown.total(), gamma: Coupling::new(gamma.map(|g| g.max(0.0))).unwrap(), breakdown, diagnostics }
    }

    /// Upper bound `F(0)(m1 + m2)` attained by the empty plan.
    pub fn empty_plan_value(&self) -> ExtReal {
        let (m1, m2) = self.masses();
        ExtReal::new(ext_mul(self.entropy.at_zero(), m1 + m2))
    }
}

/// Objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub divergence1: ExtReal,
    pub divergence2: ExtReal,
    pub transport: ExtReal,
}

impl Breakdown {
    pub fn total(&self) -> ExtReal {
        self.divergence1 + self.divergence2 + self.transport
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EtDiagnostics {
    pub method: String,
    pub iterations: usize,
    /// Final step size, potential change or Newton decrement, by method.
    pub residual: f64,
}

impl EtDiagnostics {
    pub fn new(method: &str, iterations: usize, residual: f64) -> Self {
        Self { method: method.into(), iterations, residual }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtSolution {
    pub gamma: Coupling,
    pub value: ExtReal,
    pub breakdown: Breakdown,
    pub diagnostics: EtDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtMethod {
    /// Pick by entropy kind.
    Auto,
    Sinkhorn,
    Generic,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtOptions {
    pub method: EtMethod,
    /// Relative tolerance of the barrier solver.
    pub tol: f64,
    /// Iteration cap, per epsilon stage for the scaling iterations.
    pub max_iter: usize,
    pub epsilon_schedule: Vec<f64>,
    /// Scaling iterations stop once potentials move less than this times
    /// epsilon.
    pub sinkhorn_tol: f64,
    pub seed: u64,
}

impl Default for EtOptions {
    fn default() -> Self {
        Self {
            method: EtMethod::Auto,
            tol: 1e-9,
            max_iter: 100_000,
            epsilon_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            sinkhorn_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Solves an ET problem, dispatching on the entropy kind.
pub fn solve_et(problem: &EtProblem, options: &EtOptions) -> Result<EtSolution> {
    let (m1, m2) = problem.masses();
    let (n1, n2) = problem.shape();
    if m1 == 0.0 || m2 == 0.0 {
        return Ok(problem.solution(DMatrix::zeros(n1, n2), EtDiagnostics::new("empty-plan", 0, 0.0)));
    }
    let f = problem.entropy();
    match (options.method, f) {
        (EtMethod::Auto | EtMethod::Sinkhorn, EntropyFunction::Kl | EntropyFunction::ScaledKl(_)) => {
            let warm = sinkhorn_kl_schedule(problem, &options.epsilon_schedule, options.max_iter, options.sinkhorn_tol)?;
            let polished = barrier::solve_generic_from(problem, options, Some(warm.gamma.gamma()))?;
            Ok(if polished.value <= warm.value { polished } else { warm })
        }
        (EtMethod::Sinkhorn, _) => Err(Error::Unsupported(format!("Sinkhorn scaling needs a KL entropy, got {f}"))),
        (EtMethod::Auto | EtMethod::Generic, f) if f.is_smooth() => solve_generic(problem, options),
        (EtMethod::Generic, _) => Err(Error::Unsupported(format!("the barrier solver needs a smooth entropy, got {f}"))),
        (EtMethod::Auto | EtMethod::Linear, EntropyFunction::TotalVariation) => linear::tv_lp(problem, false),
        (EtMethod::Auto | EtMethod::Linear, EntropyFunction::PiccoliRossiReg(_)) => linear::tv_lp(problem, true),
        (EtMethod::Auto | EtMethod::Linear, EntropyFunction::Indicator) => balanced_transport(problem),
        (EtMethod::Linear, _) => Err(Error::Unsupported(format!("no linear-program form for {f}"))),
        (EtMethod::Auto, _) => unreachable!("every catalog entropy has a solver"),
    }
}

/// `sum_i H_0(mu1_i, mu2_i)` for two measures on a common index set.
pub fn pure_entropy_cost(mu1: &[f64], mu2: &[f64], entropy: EntropyFunction) -> Result<ExtReal> {
    if mu1.len() != mu2.len() {
        return Err(Error::Dimension(format!("measures of lengths {} and {}", mu1.len(), mu2.len())));
    }
    let mut total = ExtReal::ZERO;
    for (r, t) in mu1.iter().zip(mu2) {
        total += entropy.marginal_perspective(ExtReal::ZERO, *r, *t)?.value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

    fn dirac(a: f64, b: f64, c: f64, f: EntropyFunction) -> EtProblem {
        EtProblem::new(DMatrix::from_element(1, 1, c), vec![a], vec![b], f).unwrap()
    }

    /// Grid minimization of `aF(θ/a) + bF(θ/b) + θc` over θ in [0, a + b].
    fn theta_oracle(a: f64, b: f64, c: f64, f: EntropyFunction) -> f64 {
        let steps = 200_000;
        (0..=steps)
            .map(|k| {
                let th = (a + b) * k as f64 / steps as f64;
                f.perspective_f64(th, a) + f.perspective_f64(th, b) + ext_mul(th, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn dirac_pair_hellinger_kantorovich() {
        for a in [0.25, 1.0, 4.0] {
            for b in [0.25, 1.0, 4.0] {
                for d in [0.0, FRAC_PI_6, FRAC_PI_3, FRAC_PI_2, 2.0] {
                    let p = dirac(a, b, CostFunction::HkLog.value(d), EntropyFunction::Kl);
                    let s = solve_et(&p, &EtOptions::default()).unwrap();
                    let expected = a + b - 2.0 * (a * b).sqrt() * d.min(FRAC_PI_2).cos();
                    assert!((s.value.value() - expected).abs() < 1e-9, "a={a} b={b} d={d}: {} vs {expected}", s.value);
                    assert!((theta_oracle(a, b, p.cost()[(0, 0)], EntropyFunction::Kl) - expected).abs() < 1e-6);
                    if d < FRAC_PI_2 {
                        let theta = (a * b).sqrt() * d.cos();
                        assert!((s.gamma.gamma()[(0, 0)] - theta).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_side_uses_empty_plan() {
        for f in [EntropyFunction::Kl, EntropyFunction::PowerLike(2.0), EntropyFunction::TotalVariation] {
            let p = EtProblem::new(DMatrix::from_element(2, 1, 1.0), vec![1.0, 2.0], vec![0.0], f).unwrap();
            let s = solve_et(&p, &EtOptions::default()).unwrap();
            assert!((s.value.value() - 3.0 * f.at_zero()).abs() < 1e-14);
            assert_eq!(s.gamma.total_mass(), 0.0);
        }
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
        let mu = vec![0.5, 1.0, 2.0];
        for (f, c) in [
            (EntropyFunction::Kl, CostFunction::HkLog),
            (EntropyFunction::PowerLike(2.0), CostFunction::Power(2.0)),
            (EntropyFunction::TotalVariation, CostFunction::Linear),
            (EntropyFunction::Indicator, CostFunction::Power(2.0)),
            (EntropyFunction::PiccoliRossiReg(3.0), CostFunction::Linear),
        ] {
            let p = EtProblem::from_distances(&d, c, mu.clone(), mu.clone(), f).unwrap();
            let s = solve_et(&p, &EtOptions::default()).unwrap();
            assert!(s.value.value() < 1e-9, "{f}: {}", s.value);
            for i in 0..3 {
                assert!((s.gamma.gamma()[(i, i)] - mu[i]).abs() < 1e-6, "{f}");
            }
        }
    }

    #[test]
    fn power_like_single_route() {
        let p = dirac(1.0, 1.0, 1.0, EntropyFunction::PowerLike(2.0));
        let s = solve_generic(&p, &EtOptions::default()).unwrap();
        assert!((s.value.value() - 0.75).abs() < 1e-10);
        assert!((s.gamma.gamma()[(0, 0)] - 0.5).abs() < 1e-7);
        assert!((theta_oracle(1.0, 1.0, 1.0, EntropyFunction::PowerLike(2.0)) - 0.75).abs() < 1e-9);
    }

    #[test]
    fn generic_rejects_nonsmooth() {
        let p = dirac(1.0, 1.0, 1.0, EntropyFunction::TotalVariation);
        assert!(matches!(solve_generic(&p, &EtOptions::default()), Err(Error::Unsupported(_))));
        assert!(matches!(sinkhorn_kl(&p, 0.1, 100, 1e-9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn indicator_with_unequal_masses_is_infinite() {
        let p = dirac(1.0, 2.0, 0.3, EntropyFunction::Indicator);
        let s = solve_et(&p, &EtOptions::default()).unwrap();
        assert!(s.value.is_infinite());
        let p = dirac(2.0, 2.0, 0.3, EntropyFunction::Indicator);
        assert!((solve_et(&p, &EtOptions::default()).unwrap().value.value() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pure_entropy_examples() {
        let v = pure_entropy_cost(&[4.0], &[1.0], EntropyFunction::Kl).unwrap();
        assert!((v.value() - 1.0).abs() < 1e-14);
        let v = pure_entropy_cost(&[1.0, 0.0], &[3.0, 2.0], EntropyFunction::PowerLike(2.0)).unwrap();
        assert!((v.value() - 1.5).abs() < 1e-12);
        let mu = [0.3, 2.0, 0.0];
        for f in [EntropyFunction::Kl, EntropyFunction::PowerLike(3.0), EntropyFunction::TotalVariation] {
            assert!(pure_entropy_cost(&mu, &mu, f).unwrap().value().abs() < 1e-12);
        }
        assert!(pure_entropy_cost(&[1.0], &[1.0, 2.0], EntropyFunction::Kl).is_err());
    }

    #[test]
    fn value_matches_breakdown_and_empty_plan_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (n1, n2) = (rng.gen_range(1..5), rng.gen_range(1..5));
            let cost = DMatrix::from_fn(n1, n2, |_, _| rng.gen_range(0.0..3.0));
            let mu1: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.1..2.0)).collect();
            let mu2: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.1..2.0)).collect();
            for f in [EntropyFunction::Kl, EntropyFunction::PowerLike(1.5), EntropyFunction::TotalVariation] {
                let p = EtProblem::new(cost.clone(), mu1.clone(), mu2.clone(), f).unwrap();
                let s = solve_et(&p, &EtOptions::default()).unwrap();
                let recomputed = p.evaluate(s.gamma.gamma()).total().value();
                assert!((recomputed - s.value.value()).abs() <= 1e-10 * (1.0 + recomputed));
                assert!(s.value <= p.empty_plan_value());
            }
        }
    }
}
