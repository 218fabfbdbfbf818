//! Partial isometries between supports, and the exact pure-entropy Sturm
//! distance built on them.

use nalgebra::DMatrix;

use super::{SturmDiagnostics, SturmOptions, SturmSolution};
use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::{Error, Result};
use crate::et::EtProblem;
use crate::ext::ExtReal;
use crate::mmspace::{canonical_coupling, Coupling, CrossDistanceMatrix, MetricMeasureSpace};
use crate::presets::Preset;

/// `|d1 - d2| <= 1e-9 (1 + d1)`.
pub fn isometric_pair(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a)
}

/// Depth-first walk over injective partial matchings from `s1` into `s2`
/// that preserve distances. `visit` sees every matching (the empty one
/// included). Returns `false` when `budget` nodes were exhausted first.
pub(crate) fn walk_partial_isometries(
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    s1: &[usize],
    s2: &[usize],
    budget: usize,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) -> bool {
    struct Walk<'a> {
        d1: &'a DMatrix<f64>,
        d2: &'a DMatrix<f64>,
        s1: &'a [usize],
        s2: &'a [usize],
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        nodes: usize,
        budget: usize,
    }

    fn go(w: &mut Walk<'_>, k: usize, visit: &mut dyn FnMut(&[(usize, usize)])) -> bool {
        w.nodes += 1;
        if w.nodes > w.budget {
            return false;
        }
        if k == w.s1.len() {
            visit(&w.current);
            return true;
        }
        let i = w.s1[k];
        for b in 0..w.s2.len() {
            if w.used[b] {
                continue;
            }
            let j = w.s2[b];
            if !w.current.iter().all(|&(i2, j2)| isometric_pair(w.d1[(i, i2)], w.d2[(j, j2)])) {
                continue;
            }
            w.used[b] = true;
            w.current.push((i, j));
            let ok = go(w, k + 1, visit);
            w.current.pop();
            w.used[b] = false;
            if !ok {
                return false;
            }
        }
        go(w, k + 1, visit)
    }

    let mut w = Walk { d1, d2, s1, s2, used: vec![false; s2.len()], current: Vec::new(), nodes: 0, budget };
    go(&mut w, 0, visit)
}

/// Cross block `min_{(i,j) in R} d1(x, i) + d2(j, y)`: zero on matched
/// pairs, valid when `R` is a partial isometry. An empty `R` glues the
/// first points at distance zero.
pub(crate) fn isometry_coupling(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, relation: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    if relation.is_empty() {
        return Ok(canonical_coupling(mm1, mm2, 0, 0, 0.0, 0.0)?.into_inner());
    }
    let (d1, d2) = (mm1.dist(), mm2.dist());
    Ok(DMatrix::from_fn(mm1.len(), mm2.len(), |x, y| {
        relation.iter().map(|&(i, j)| d1[(x, i)] + d2[(j, y)]).fold(f64::INFINITY, f64::min)
    }))
}

/// Value of a matching: `sum H_0 over matched pairs + F(0) * unmatched mass`.
fn matching_value(f: EntropyFunction, mu1: &[f64], mu2: &[f64], relation: &[(usize, usize)]) -> Result<f64> {
    let mut unmatched: f64 = mu1.iter().sum::<f64>() + mu2.iter().sum::<f64>();
    let mut total = 0.0;
    for &(i, j) in relation {
        total += f.marginal_perspective(ExtReal::ZERO, mu1[i], mu2[j])?.value.value();
        unmatched -= mu1[i] + mu2[j];
    }
    Ok(total + f.at_zero() * unmatched.max(0.0))
}

/// Exact Sturm distance for the pure-entropy limit `(1/2, U_p, 0 | inf)`.
///
/// Optimal pairs are supported where the cross distance vanishes, so the
/// search runs over partial isometries between the supports. Sizes above
/// `options.enumeration_limit` (as `n1 * n2` over supports) fail unless
/// `options.heuristic` is set, in which case pairs are added greedily by
/// their saving `F(0)(r + t) - H_0(r, t)`.
pub fn sturm_pure_entropy(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, p: f64, options: &SturmOptions) -> Result<SturmSolution> {
    let preset = Preset::pl(p)?;
    let f = preset.entropy();
    let (s1, s2) = (mm1.support(), mm2.support());
    let (mu1, mu2) = (mm1.mass(), mm2.mass());
    let (d1, d2) = (mm1.dist(), mm2.dist());

    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut seen = 0usize;
    let mut failure = None;
    let exhaustive = s1.len() * s2.len() <= options.enumeration_limit;
    if exhaustive {
        let mut visit = |rel: &[(usize, usize)]| {
            seen += 1;
            match matching_value(f, mu1, mu2, rel) {
                Ok(v) => {
                    if best.as_ref().map_or(true, |(b, _)| v < *b) {
                        best = Some((v, rel.to_vec()));
                    }
                }
                Err(e) => failure = Some(e),
            }
        };
        let complete = walk_partial_isometries(d1, d2, &s1, &s2, usize::MAX, &mut visit);
        debug_assert!(complete);
        if let Some(e) = failure {
            return Err(e);
        }
    } else if options.heuristic {
        let mut pairs = Vec::new();
        for &i in &s1 {
            for &j in &s2 {
                let h = f.marginal_perspective(ExtReal::ZERO, mu1[i], mu2[j])?.value.value();
                pairs.push((f.at_zero() * (mu1[i] + mu2[j]) - h, i, j));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut rel: Vec<(usize, usize)> = Vec::new();
        for (_, i, j) in pairs {
            if rel.iter().all(|&(i2, j2)| i2 != i && j2 != j && isometric_pair(d1[(i, i2)], d2[(j, j2)])) {
                rel.push((i, j));
            }
        }
        seen = 1;
        best = Some((matching_value(f, mu1, mu2, &rel)?, rel));
    } else {
        return Err(Error::SizeGuard(format!(
            "partial-isometry enumeration needs n1 * n2 <= {} over supports, got {}x{}",
            options.enumeration_limit,
            s1.len(),
            s2.len()
        )));
    }
    let (cost_value, relation) = best.ok_or_else(|| Error::Internal("no matching visited".into()))?;

    let mut gamma = DMatrix::zeros(mm1.len(), mm2.len());
    for &(i, j) in &relation {
        gamma[(i, j)] = f.marginal_perspective(ExtReal::ZERO, mu1[i], mu2[j])?.argmin_theta.unwrap_or(0.0);
    }
    let cross = isometry_coupling(mm1, mm2, &relation)?;
    let problem = EtProblem::from_distances(&cross, CostFunction::PureEntropyLimit, mu1.to_vec(), mu2.to_vec(), f)?;
    let breakdown = problem.evaluate(&gamma);
    let cost = ExtReal::new(cost_value);
    Ok(SturmSolution {
        value: cost.powf(preset.a()),
        cost,
        preset,
        gamma: Coupling::new(gamma)?,
        cross: CrossDistanceMatrix::new(cross)?,
        breakdown,
        seeds_tried: seen,
        seed_values: vec![cost_value],
        diagnostics: SturmDiagnostics {
            method: if exhaustive { "partial-isometry-enumeration".into() } else { "partial-isometry-greedy".into() },
            outer_iterations: 0,
            objective_trace: vec![cost_value],
            oracle_gap: None,
        },
    })
}
