//! The inner problem over pseudo-metric couplings:
//! `min sum gamma_ij l(D_ij)` over the cross-distance polyhedron.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::entropy::CostFunction;
use crate::error::{Error, Result};
use crate::ext::ext_mul;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::mmspace::{Coupling, CrossDistanceMatrix};

/// Tuning of the cutting-plane approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingOptions {
    /// Initial tangent points per entry on `[0, cap]`.
    pub breakpoints: usize,
    /// Refinement stops once the gap between the true objective and the
    /// LP lower bound is below this (relative).
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self { breakpoints: 8, tol: 1e-8, max_rounds: 40 }
    }
}

/// `sum gamma_ij l(D_ij)` with `0 * inf = 0`.
pub fn transport_cost(gamma: &DMatrix<f64>, cross: &DMatrix<f64>, cost: CostFunction) -> f64 {
    gamma.iter().zip(cross.iter()).map(|(g, d)| ext_mul(*g, cost.value(*d))).sum()
}

pub(crate) fn max_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().copied().fold(0.0, f64::max)
}

/// Minimizes `sum gamma_ij l(D_ij)` over cross-distance matrices.
///
/// Linear costs give one LP. Convex costs are replaced by the maximum of
/// their tangents at a set of points, a minorant, so each LP value is a
/// lower bound; tangents are added at the LP solution until the true
/// objective is within `tol` of that bound. Entries with `gamma_ij = 0` are
/// lowered to their least feasible value.
pub fn min_metric_coupling(
    gamma: &Coupling,
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    cost: CostFunction,
) -> Result<CrossDistanceMatrix> {
    let r = min_metric_coupling_from(gamma.gamma(), d1, d2, cost, None, &CouplingOptions::default())?;
    CrossDistanceMatrix::new(r.cross)
}

pub(crate) struct CouplingResult {
    pub cross: DMatrix<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective: f64,
}

/// As [`min_metric_coupling`]; with an `incumbent` the result is never
/// worse than it.
pub(crate) fn min_metric_coupling_from(
    gamma: &DMatrix<f64>,
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    cost: CostFunction,
    incumbent: Option<&DMatrix<f64>>,
    options: &CouplingOptions,
) -> Result<CouplingResult> {
    let (n1, n2) = gamma.shape();
    if d1.shape() != (n1, n1) || d2.shape() != (n2, n2) {
        return Err(Error::Dimension(format!(
            "plan is {n1}x{n2} but spaces have sizes {} and {}",
            d1.nrows(),
            d2.nrows()
        )));
    }
    if let Some(inc) = incumbent {
        if inc.shape() != (n1, n2) {
            return Err(Error::Dimension("incumbent cross block has the wrong shape".into()));
        }
    }
    // Clipping a feasible block at the larger diameter keeps it feasible.
    let cap_all = max_entry(d1).max(max_entry(d2));
    let incumbent = incumbent.map(|m| m.map(|v| v.clamp(0.0, cap_all)));
    let mut best = incumbent.as_ref().map(|m| (m.clone(), transport_cost(gamma, m, cost)));

    let linear = cost.linear_slope().or(if cost.finite_radius() == 0.0 { Some(1.0) } else { None });
    let layout = if let Some(slope) = linear {
        Layout::linear(gamma, cap_all, slope)
    } else {
        let radius = cost.finite_radius();
        let caps = DMatrix::from_fn(n1, n2, |i, j| {
            let mut cap = cap_all.min(radius * (1.0 - 1e-3));
            if let Some(inc) = &incumbent {
                if gamma[(i, j)] > 0.0 {
                    cap = cap.max(inc[(i, j)]);
                }
            }
            cap
        });
        Layout::piecewise(gamma, cap_all, &caps, incumbent.as_ref(), options.breakpoints, cost)
    };

    let mut layout = layout;
    for _ in 0..options.max_rounds.max(1) {
        let lp = layout.program(d1, d2);
        let s = solve_lp(&lp)?;
        match s.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible | LpStatus::Unbounded => {
                return Err(Error::Internal(format!("cross-distance LP reported {:?}", s.status)));
            }
            LpStatus::NumericalFailure => {
                log::warn!("cross-distance LP: numerical failure, keeping incumbent");
                break;
            }
        }
        let raw = layout.cross(&s.x);
        let cross = repair(&raw, d1, d2).map(|v| v.clamp(0.0, cap_all));
        let objective = transport_cost(gamma, &cross, cost);
        if best.as_ref().map_or(true, |(_, b)| objective < *b) {
            best = Some((cross.clone(), objective));
        }
        let bound = best.as_ref().map_or(objective, |(_, b)| *b);
        if linear.is_some() || bound - s.value <= options.tol * (1.0 + bound.abs()) {
            break;
        }
        layout.refine(&raw);
    }
    let (cross, objective) = best.ok_or_else(|| Error::Internal("cross-distance LP produced no candidate".into()))?;
    let cross = lower_entries(cross, gamma, d1, d2);
    Ok(CouplingResult { objective: transport_cost(gamma, &cross, cost).min(objective), cross })
}

/// Variables of the cross-distance LP. Each entry is a sum of variables;
/// weighted entries use one segment variable per piece of the tangent
/// minorant.
struct Layout {
    n1: usize,
    n2: usize,
    /// Per entry: tangent points (empty when the entry is a single variable).
    grids: Vec<Vec<f64>>,
    caps: Vec<f64>,
    weights: Vec<f64>,
    cost: Option<CostFunction>,
    slope: f64,
    cap_all: f64,
}

impl Layout {
    fn linear(gamma: &DMatrix<f64>, cap_all: f64, slope: f64) -> Self {
        let (n1, n2) = gamma.shape();
        Self {
            n1,
            n2,
            grids: vec![Vec::new(); n1 * n2],
            caps: vec![cap_all; n1 * n2],
            weights: gamma.iter().copied().collect(),
            cost: None,
            slope,
            cap_all,
        }
    }

    fn piecewise(
        gamma: &DMatrix<f64>,
        cap_all: f64,
        caps: &DMatrix<f64>,
        incumbent: Option<&DMatrix<f64>>,
        points: usize,
        cost: CostFunction,
    ) -> Self {
        let (n1, n2) = gamma.shape();
        let points = points.max(2);
        let grids = (0..n1 * n2)
            .map(|e| {
                if gamma[e] <= 0.0 || caps[e] <= 0.0 {
                    return Vec::new();
                }
                let mut g: Vec<f64> = (0..points).map(|k| caps[e] * k as f64 / (points - 1) as f64).collect();
                if let Some(inc) = incumbent {
                    g.push(inc[e].min(caps[e]));
                }
                normalize(&mut g);
                g
            })
            .collect();
        Self {
            n1,
            n2,
            grids,
            caps: caps.iter().copied().collect(),
            weights: gamma.iter().copied().collect(),
            cost: Some(cost),
            slope: 0.0,
            cap_all,
        }
    }

    /// Variable ids per entry (column-major, matching nalgebra storage).
    fn columns(&self) -> (Vec<Vec<usize>>, Vec<f64>, Vec<(f64, f64)>) {
        let mut ids = Vec::with_capacity(self.grids.len());
        let mut obj = Vec::new();
        let mut bounds = Vec::new();
        for (e, grid) in self.grids.iter().enumerate() {
            let w = self.weights[e];
            match (self.cost, grid.len()) {
                (Some(cost), len) if len >= 1 => {
                    // Piece k runs between consecutive tangent crossings with slope l'(grid[k]).
                    let cap = self.caps[e];
                    let mut v = Vec::with_capacity(len);
                    let mut start = 0.0;
                    for k in 0..len {
                        let end = if k + 1 < len { crossing(cost, grid[k], grid[k + 1]) } else { cap };
                        let end = end.clamp(start, cap);
                        if end > start {
                            v.push(obj.len());
                            obj.push(w * cost.derivative(grid[k]));
                            bounds.push((0.0, end - start));
                        }
                        start = end;
                    }
                    ids.push(v);
                }
                (Some(_), _) if w > 0.0 => ids.push(Vec::new()), // pinned at 0
                _ => {
                    ids.push(vec![obj.len()]);
                    obj.push(if self.cost.is_none() { w * self.slope } else { 0.0 });
                    bounds.push((0.0, self.cap_all));
                }
            }
        }
        (ids, obj, bounds)
    }

    fn program(&self, d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> LinearProgram {
        let (ids, obj, bounds) = self.columns();
        let mut lp = LinearProgram::new(obj);
        for (k, (lo, hi)) in bounds.into_iter().enumerate() {
            lp.set_bounds(k, lo, hi);
        }
        let e = |i: usize, j: usize| i + j * self.n1;
        let mut add = |a: usize, sa: f64, b: usize, sb: f64, rel: Relation, rhs: f64| {
            let mut terms: Vec<(usize, f64)> = ids[a].iter().map(|&v| (v, sa)).collect();
            terms.extend(ids[b].iter().map(|&v| (v, sb)));
            if terms.is_empty() {
                return;
            }
            lp.add_sparse_constraint(terms, rel, rhs);
        };
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                for i2 in 0..self.n1 {
                    if i2 != i {
                        add(e(i, j), 1.0, e(i2, j), -1.0, Relation::Le, d1[(i, i2)]);
                    }
                    if i < i2 {
                        add(e(i, j), 1.0, e(i2, j), 1.0, Relation::Ge, d1[(i, i2)]);
                    }
                }
            }
        }
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                for j2 in 0..self.n2 {
                    if j2 != j {
                        add(e(i, j), 1.0, e(i, j2), -1.0, Relation::Le, d2[(j2, j)]);
                    }
                    if j < j2 {
                        add(e(i, j), 1.0, e(i, j2), 1.0, Relation::Ge, d2[(j, j2)]);
                    }
                }
            }
        }
        lp
    }

    fn cross(&self, x: &[f64]) -> DMatrix<f64> {
        let (ids, _, _) = self.columns();
        DMatrix::from_iterator(self.n1, self.n2, ids.iter().map(|v| v.iter().map(|&k| x[k]).sum::<f64>().max(0.0)))
    }

    /// Adds a tangent at the current value of every weighted entry.
    fn refine(&mut self, cross: &DMatrix<f64>) {
        for (e, grid) in self.grids.iter_mut().enumerate() {
            if grid.is_empty() {
                continue;
            }
            grid.push(cross[e].clamp(0.0, self.caps[e]));
            normalize(grid);
        }
    }
}

/// Abscissa where the tangents of `l` at `a < b` meet.
fn crossing(cost: CostFunction, a: f64, b: f64) -> f64 {
    let (sa, sb) = (cost.derivative(a), cost.derivative(b));
    if sb - sa <= 1e-15 * (1.0 + sb.abs()) {
        return 0.5 * (a + b);
    }
    let z = (cost.value(b) - sb * b - cost.value(a) + sa * a) / (sa - sb);
    z.clamp(a, b)
}

fn normalize(g: &mut Vec<f64>) {
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
}

/// Removes LP round-off: shortest-path closure through the two spaces,
/// then a uniform shift covering any remaining span deficit.
pub(crate) fn repair(cross: &DMatrix<f64>, d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = cross.shape();
    // Left then right composition: min_{i'} d1(i, i') + D(i', j'), then min_{j'}.
    let left = DMatrix::from_fn(n1, n2, |i, j| (0..n1).map(|k| d1[(i, k)] + cross[(k, j)]).fold(f64::INFINITY, f64::min));
    let closed = DMatrix::from_fn(n1, n2, |i, j| (0..n2).map(|k| left[(i, k)] + d2[(k, j)]).fold(f64::INFINITY, f64::min));
    let mut deficit: f64 = 0.0;
    for j in 0..n2 {
        for i in 0..n1 {
            for i2 in i + 1..n1 {
                deficit = deficit.max(d1[(i, i2)] - closed[(i, j)] - closed[(i2, j)]);
            }
        }
    }
    for i in 0..n1 {
        for j in 0..n2 {
            for j2 in j + 1..n2 {
                deficit = deficit.max(d2[(j, j2)] - closed[(i, j)] - closed[(i, j2)]);
            }
        }
    }
    let shift = 0.5 * deficit.max(0.0);
    closed.map(|v| v + shift)
}

/// Lowers entries to their least feasible value given the others, one at a
/// time, zero-weight entries first. `l` is nondecreasing, so this never
/// raises the objective.
fn lower_entries(mut cross: DMatrix<f64>, gamma: &DMatrix<f64>, d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = cross.shape();
    let mut order: Vec<(usize, usize)> = (0..n2).flat_map(|j| (0..n1).map(move |i| (i, j))).collect();
    order.sort_by_key(|&(i, j)| gamma[(i, j)] > 0.0);
    for (i, j) in order {
        {
            let mut lo: f64 = 0.0;
            for k in (0..n1).filter(|&k| k != i) {
                lo = lo.max(cross[(k, j)] - d1[(i, k)]).max(d1[(i, k)] - cross[(k, j)]);
            }
            for k in (0..n2).filter(|&k| k != j) {
                lo = lo.max(cross[(i, k)] - d2[(j, k)]).max(d2[(j, k)] - cross[(i, k)]);
            }
            if lo < cross[(i, j)] {
                cross[(i, j)] = lo;
            }
        }
    }
    cross
}
