//! Sturm-Entropy-Transport distances between finite metric measure spaces.
//!
//! `D(X1, X2)^(1/a) = inf over (gamma, D) of
//! D_F(gamma_1 || mu_1) + D_F(gamma_2 || mu_2) + sum l(D_ij) gamma_ij`
//! where `D` ranges over cross blocks of pseudo-metric couplings. The joint
//! problem is not convex; [`sturm_distance`] alternates between the plan
//! and the block from many seeds and reports the best pair it found, which
//! is an upper bound.

mod bounds;
mod coupling;
mod exact;
mod oracle;
mod seeds;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::et::{solve_et, Breakdown, EtMethod, EtOptions, EtProblem, EtSolution};
use crate::ext::ExtReal;
use crate::mmspace::{Coupling, CrossDistanceMatrix, MetricMeasureSpace, DEFAULT_VALIDATION_TOL};
use crate::presets::Preset;

pub use bounds::{delta_config_bound, mass_scaling_bound};
pub use coupling::{min_metric_coupling, transport_cost, CouplingOptions};
pub use exact::{isometric_pair, sturm_pure_entropy};
pub use oracle::brute_force_sturm;

/// Two spaces and a preset.
#[derive(Debug, Clone)]
pub struct SturmProblem {
    mm1: MetricMeasureSpace,
    mm2: MetricMeasureSpace,
    preset: Preset,
}

impl SturmProblem {
    /// Checks the preset and the metric axioms of both spaces.
    pub fn new(mm1: MetricMeasureSpace, mm2: MetricMeasureSpace, preset: Preset) -> Result<Self> {
        let preset = preset.validated()?;
        for (k, mm) in [&mm1, &mm2].into_iter().enumerate() {
            let report = mm.validate_metric(DEFAULT_VALIDATION_TOL);
            if !report.is_valid() {
                return Err(Error::Domain(format!(
                    "space {} is not a metric space (worst violation {:.3e})",
                    k + 1,
                    report.max_violation()
                )));
            }
        }
        Ok(Self { mm1, mm2, preset })
    }

    pub fn mm1(&self) -> &MetricMeasureSpace {
        &self.mm1
    }

    pub fn mm2(&self) -> &MetricMeasureSpace {
        &self.mm2
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    /// Sides exchanged.
    pub fn swapped(&self) -> Self {
        Self { mm1: self.mm2.clone(), mm2: self.mm1.clone(), preset: self.preset }
    }

    /// Both mass vectors multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(Self { mm1: self.mm1.scaled(factor)?, mm2: self.mm2.scaled(factor)?, preset: self.preset })
    }

    /// The ET problem with cost `l(cross)`.
    pub fn et_problem(&self, cross: &DMatrix<f64>) -> Result<EtProblem> {
        EtProblem::from_distances(
            cross,
            self.preset.cost(),
            self.mm1.mass().to_vec(),
            self.mm2.mass().to_vec(),
            self.preset.entropy(),
        )
    }

    /// Objective of a pair `(gamma, cross)`.
    pub fn evaluate(&self, gamma: &DMatrix<f64>, cross: &DMatrix<f64>) -> Result<Breakdown> {
        Ok(self.et_problem(cross)?.evaluate(gamma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SturmOptions {
    /// Options of the inner ET solves.
    pub et: EtOptions,
    /// Outer loop stops when the relative decrease falls below this.
    pub tol: f64,
    pub max_outer: usize,
    /// Random seeds per orientation.
    pub restarts: usize,
    /// Basepoint pairs tried for glued seeds.
    pub max_basepoints: usize,
    pub seed: u64,
    pub coupling: CouplingOptions,
    /// `n1 * n2` (over supports) up to which partial isometries are
    /// enumerated exactly.
    pub enumeration_limit: usize,
    /// Allow the greedy matching above `enumeration_limit`.
    pub heuristic: bool,
    /// Run seeds on the rayon pool.
    pub parallel: bool,
    /// Additional starting blocks, e.g. optima of related presets.
    #[serde(skip)]
    pub extra_seeds: Vec<DMatrix<f64>>,
}

impl Default for SturmOptions {
    fn default() -> Self {
        Self {
            et: EtOptions::default(),
            tol: 1e-9,
            max_outer: 60,
            restarts: 4,
            max_basepoints: 9,
            seed: 0,
            coupling: CouplingOptions::default(),
            enumeration_limit: 64,
            heuristic: false,
            parallel: true,
            extra_seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SturmDiagnostics {
    pub method: String,
    pub outer_iterations: usize,
    /// Objective after every accepted alternating step of the best seed.
    pub objective_trace: Vec<f64>,
    /// Distance to an oracle value, when one was computed.
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SturmSolution {
    /// The distance: `cost^a`.
    pub value: ExtReal,
    /// The objective at `(gamma, cross)`.
    pub cost: ExtReal,
    pub preset: Preset,
    pub gamma: Coupling,
    pub cross: CrossDistanceMatrix,
    pub breakdown: Breakdown,
    pub seeds_tried: usize,
    /// Final objective of every seed, in seed order.
    pub seed_values: Vec<f64>,
    pub diagnostics: SturmDiagnostics,
}

struct Run {
    cost: f64,
    gamma: DMatrix<f64>,
    cross: DMatrix<f64>,
    trace: Vec<f64>,
    outer: usize,
}

/// Inner solves of smooth entropies go straight to the barrier solver: the
/// problems are small and re-solved many times.
fn inner_options(options: &SturmOptions, f: EntropyFunction) -> EtOptions {
    let mut et = options.et.clone();
    if et.method == EtMethod::Auto && f.is_smooth() {
        et.method = EtMethod::Generic;
    }
    et
}

fn solve_at(problem: &SturmProblem, cross: &DMatrix<f64>, et: &EtOptions) -> Result<EtSolution> {
    solve_et(&problem.et_problem(cross)?, et)
}

fn alternate(problem: &SturmProblem, seed: DMatrix<f64>, options: &SturmOptions, et: &EtOptions) -> Result<Run> {
    let (d1, d2) = (problem.mm1.dist(), problem.mm2.dist());
    let cost_fn = problem.preset.cost();
    let mut cross = seed;
    let first = solve_at(problem, &cross, et)?;
    let mut cost = first.value.value();
    let mut gamma = first.gamma.into_inner();
    let mut trace = vec![cost];
    let mut outer = 0;
    while outer < options.max_outer && cost.is_finite() && cost > 0.0 {
        outer += 1;
        let step = coupling::min_metric_coupling_from(&gamma, d1, d2, cost_fn, Some(&cross), &options.coupling)?;
        let held = problem.evaluate(&gamma, &step.cross)?.total().value();
        let solved = solve_at(problem, &step.cross, et)?;
        let (next_gamma, next_cost) = if solved.value.value() <= held {
            (solved.gamma.into_inner(), solved.value.value())
        } else {
            (gamma.clone(), held)
        };
        if !(next_cost < cost) {
            break;
        }
        let decrease = cost - next_cost;
        gamma = next_gamma;
        cross = step.cross;
        cost = next_cost;
        trace.push(cost);
        if decrease <= options.tol * cost {
            break;
        }
    }
    Ok(Run { cost, gamma, cross, trace, outer })
}

/// Smallest cost wins; ties go to the lexicographically smaller block.
fn better(a: &Run, b: &Run) -> bool {
    let tie = 1e-12 * (1.0 + a.cost.abs().min(b.cost.abs()));
    if (a.cost - b.cost).abs() > tie || !(a.cost.is_finite() && b.cost.is_finite()) {
        return a.cost < b.cost;
    }
    for (x, y) in a.cross.iter().zip(b.cross.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn into_solution(problem: &SturmProblem, best: Run, seed_values: Vec<f64>, method: &str) -> Result<SturmSolution> {
    let breakdown = problem.evaluate(&best.gamma, &best.cross)?;
    let cost = breakdown.total();
    Ok(SturmSolution {
        value: cost.powf(problem.preset.a()),
        cost,
        preset: problem.preset,
        gamma: Coupling::new(best.gamma.map(|g| g.max(0.0)))?,
        cross: CrossDistanceMatrix::new(best.cross)?,
        breakdown,
        seeds_tried: seed_values.len(),
        seed_values,
        diagnostics: SturmDiagnostics {
            method: method.into(),
            outer_iterations: best.outer,
            objective_trace: best.trace,
            oracle_gap: None,
        },
    })
}

/// Runs the alternating minimization from every seed block in `starts`.
fn multistart(problem: &SturmProblem, starts: Vec<DMatrix<f64>>, options: &SturmOptions) -> Result<SturmSolution> {
    let et = inner_options(options, problem.preset.entropy());
    let run = |s: DMatrix<f64>| alternate(problem, s, options, &et);
    let runs: Vec<Result<Run>> =
        if options.parallel { starts.into_par_iter().map(run).collect() } else { starts.into_iter().map(run).collect() };
    let mut seed_values = Vec::with_capacity(runs.len());
    let mut best: Option<Run> = None;
    let mut last_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                seed_values.push(r.cost);
                if best.as_ref().map_or(true, |b| better(&r, b)) {
                    best = Some(r);
                }
            }
            Err(e) => {
                log::warn!("seed failed: {e}");
                seed_values.push(f64::NAN);
                last_err = Some(e);
            }
        }
    }
    let best = match (best, last_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::Internal("no seeds".into())),
    };
    log::debug!("sturm {}: best {:.6e} over {} seeds", problem.preset, best.cost, seed_values.len());
    into_solution(problem, best, seed_values, "alternating")
}

fn starting_blocks(problem: &SturmProblem, options: &SturmOptions) -> Result<Vec<DMatrix<f64>>> {
    let mut starts = seeds::seeds(&problem.mm1, &problem.mm2, options)?;
    let shape = (problem.mm1.len(), problem.mm2.len());
    for extra in &options.extra_seeds {
        let ok = extra.shape() == shape
            && CrossDistanceMatrix::new(extra.clone())
                .and_then(|c| c.validate(problem.mm1.dist(), problem.mm2.dist(), 1e-7))
                .map_or(false, |r| r.is_valid());
        if ok {
            starts.push(extra.clone());
        } else {
            log::warn!("ignoring an extra seed that is not a valid cross block");
        }
    }
    Ok(starts)
}

/// Multi-start alternating minimization over `(gamma, D)`.
///
/// The pure-entropy presets are solved exactly by [`sturm_pure_entropy`];
/// the Wasserstein presets return `+inf` for unequal total masses.
pub fn sturm_distance(problem: &SturmProblem, options: &SturmOptions) -> Result<SturmSolution> {
    if let Preset::Pl(p) = problem.preset {
        return sturm_pure_entropy(&problem.mm1, &problem.mm2, p, options);
    }
    if problem.preset.entropy() == EntropyFunction::Indicator {
        let (m1, m2) = (problem.mm1.total_mass(), problem.mm2.total_mass());
        if (m1 - m2).abs() > crate::entropy::INDICATOR_TOL * m1.max(m2) {
            return unequal_mass(problem);
        }
    }
    multistart(problem, starting_blocks(problem, options)?, options)
}

fn unequal_mass(problem: &SturmProblem) -> Result<SturmSolution> {
    let (n1, n2) = (problem.mm1.len(), problem.mm2.len());
    let cross = crate::mmspace::canonical_coupling(&problem.mm1, &problem.mm2, 0, 0, 0.0, 0.0)?;
    let breakdown = problem.evaluate(&DMatrix::zeros(n1, n2), cross.matrix())?;
    Ok(SturmSolution {
        value: ExtReal::INFINITY,
        cost: ExtReal::INFINITY,
        preset: problem.preset,
        gamma: Coupling::zeros(n1, n2),
        cross,
        breakdown,
        seeds_tried: 0,
        seed_values: Vec::new(),
        diagnostics: SturmDiagnostics {
            method: "unequal-mass".into(),
            outer_iterations: 0,
            objective_trace: vec![f64::INFINITY],
            oracle_gap: None,
        },
    })
}

/// Sturm's balanced distance `D_p`: transport with both marginals fixed and
/// cost `d^p`, reported as `cost^(1/p)`.
pub fn sturm_dp(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, p: f64, options: &SturmOptions) -> Result<SturmSolution> {
    sturm_distance(&SturmProblem::new(mm1.clone(), mm2.clone(), Preset::wp(p)?)?, options)
}

/// The bounded-Lipschitz lift: `F = |s - 1|`, `l = d`, `a = 1`. Both
/// subproblems are linear programs.
pub fn sturm_bl(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, options: &SturmOptions) -> Result<SturmSolution> {
    sturm_distance(&SturmProblem::new(mm1.clone(), mm2.clone(), Preset::Bl)?, options)
}

/// Several presets on one pair of spaces with a shared pool of blocks.
///
/// Each preset is first solved on its own. Every preset is then
/// re-evaluated at the optimal blocks of all the others and keeps the best.
/// Since every value is then a minimum over one common pool, any inequality
/// that holds block by block (for instance `l <= l'` pointwise) holds
/// between the reported values as well.
pub fn sturm_distances(
    mm1: &MetricMeasureSpace,
    mm2: &MetricMeasureSpace,
    presets: &[Preset],
    options: &SturmOptions,
) -> Result<Vec<SturmSolution>> {
    let problems: Vec<SturmProblem> =
        presets.iter().map(|&p| SturmProblem::new(mm1.clone(), mm2.clone(), p)).collect::<Result<_>>()?;
    let first: Vec<SturmSolution> = problems.iter().map(|p| sturm_distance(p, options)).collect::<Result<_>>()?;
    let mut pool: Vec<DMatrix<f64>> = Vec::new();
    for s in &first {
        if !pool.iter().any(|m| (m - s.cross.matrix()).amax() <= 1e-12) {
            pool.push(s.cross.matrix().clone());
        }
    }
    problems
        .iter()
        .zip(first)
        .map(|(problem, own)| {
            if matches!(problem.preset, Preset::Pl(_)) || own.cost.is_infinite() {
                return Ok(own);
            }
            let et = inner_options(options, problem.preset.entropy());
            let mut best = own;
            for block in &pool {
                let s = solve_at(problem, block, &et)?;
                let breakdown = problem.evaluate(s.gamma.gamma(), block)?;
                let cost = breakdown.total();
                if cost < best.cost {
                    best.value = cost.powf(problem.preset.a());
                    best.cost = cost;
                    best.gamma = s.gamma;
                    best.cross = CrossDistanceMatrix::new(block.clone())?;
                    best.breakdown = breakdown;
                    best.diagnostics.method = "alternating+shared-pool".into();
                }
            }
            Ok(best)
        })
        .collect()
}

#[cfg(test)]
mod tests;
