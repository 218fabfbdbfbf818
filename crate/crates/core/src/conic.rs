//! Cone constructions: plans over `C(X1) x C(X2)`, their homogeneous
//! marginals, the conic Gromov-Wasserstein objective, and the lift of an
//! optimal Sturm pair to a cone plan.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::mmspace::{marginals, Coupling, MetricMeasureSpace};
use crate::presets::Preset;
use crate::sturm::{sturm_distance, SturmOptions, SturmProblem, SturmSolution};

/// `[x, r]` on the cone over a finite space. All points with radius 0 are
/// the apex; their base is read as point 0 wherever a base is needed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConePoint {
    pub base: usize,
    pub radius: f64,
}

impl ConePoint {
    pub const APEX: ConePoint = ConePoint { base: 0, radius: 0.0 };

    pub fn new(base: usize, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("cone radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self { base, radius })
    }

    pub fn is_apex(&self) -> bool {
        self.radius == 0.0
    }

    /// The base point, with the apex sent to point 0.
    pub fn point(&self) -> usize {
        if self.is_apex() {
            0
        } else {
            self.base
        }
    }
}

impl PartialEq for ConePoint {
    fn eq(&self, other: &Self) -> bool {
        self.radius == other.radius && (self.is_apex() || self.base == other.base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeAtom {
    pub left: ConePoint,
    pub right: ConePoint,
    pub weight: f64,
}

/// A finitely supported measure on `C(X1) x C(X2)` with homogeneity
/// exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePlan {
    atoms: Vec<ConeAtom>,
    p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl ConePlan {
    pub fn new(atoms: Vec<ConeAtom>, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("cone exponent needs p >= 1, got {p}")));
        }
        for a in &atoms {
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(Error::Domain(format!("atom weight must be finite and >= 0, got {}", a.weight)));
            }
            ConePoint::new(a.left.base, a.left.radius)?;
            ConePoint::new(a.right.base, a.right.radius)?;
        }
        Ok(Self { atoms, p })
    }

    pub fn atoms(&self) -> &[ConeAtom] {
        &self.atoms
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| ConeAtom { weight: a.weight * factor, ..a.clone() }).collect(), self.p)
    }

    /// Both homogeneous marginals match `mu1`, `mu2` within `tol`.
    pub fn is_feasible(&self, mu1: &[f64], mu2: &[f64], tol: f64) -> bool {
        let close = |h: Vec<f64>, mu: &[f64]| h.len() == mu.len() && h.iter().zip(mu).all(|(a, b)| (a - b).abs() <= tol);
        close(homogeneous_marginal(self, Side::Left, mu1.len()), mu1)
            && close(homogeneous_marginal(self, Side::Right, mu2.len()), mu2)
    }
}

/// `(x_i)_# (r_i^p alpha)` as a mass vector on `n` points. Atoms whose base
/// is out of range are ignored.
pub fn homogeneous_marginal(alpha: &ConePlan, side: Side, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    for a in &alpha.atoms {
        let point = match side {
            Side::Left => a.left,
            Side::Right => a.right,
        };
        if point.is_apex() || point.base >= n {
            continue;
        }
        h[point.base] += a.weight * point.radius.powf(alpha.p);
    }
    h
}

/// `sum_k sum_k' w_k w_k' H_c((r_k r_k')^p, (s_k s_k')^p)` with
/// `c = l(|d1(x_k, x_k') - d2(y_k, y_k')|)`.
pub fn cgw_objective(
    alpha: &ConePlan,
    mm1: &MetricMeasureSpace,
    mm2: &MetricMeasureSpace,
    f: EntropyFunction,
    cost: CostFunction,
) -> Result<ExtReal> {
    let (d1, d2) = (mm1.dist(), mm2.dist());
    for a in &alpha.atoms {
        if a.left.point() >= mm1.len() || a.right.point() >= mm2.len() {
            return Err(Error::Dimension("cone atom refers to a point outside its space".into()));
        }
    }
    let p = alpha.p;
    let rows: Vec<Result<ExtReal>> = alpha
        .atoms
        .par_iter()
        .map(|a| {
            let mut row = ExtReal::ZERO;
            for b in &alpha.atoms {
                let w = a.weight * b.weight;
                if w == 0.0 {
                    continue;
                }
                let gap = (d1[(a.left.point(), b.left.point())] - d2[(a.right.point(), b.right.point())]).abs();
                let c = ExtReal::new(cost.value(gap));
                let r = (a.left.radius * b.left.radius).powf(p);
                let s = (a.right.radius * b.right.radius).powf(p);
                row += f.marginal_perspective(c, r, s)?.value * w;
            }
            Ok(row)
        })
        .collect();
    rows.into_iter().sum()
}

/// Lifts a plan on `X1 x X2` to a cone plan with homogeneous marginals
/// `(mu1, mu2)`: each `gamma_ij > 0` becomes the atom
/// `([x_i, (mu1_i / g1_i)^(1/p)], [y_j, (mu2_j / g2_j)^(1/p)], gamma_ij)`,
/// and points left without plan mass are paired with the apex.
pub fn lift_optimal_plan(gamma: &Coupling, mu1: &[f64], mu2: &[f64], p: f64) -> Result<ConePlan> {
    let g = gamma.gamma();
    if g.shape() != (mu1.len(), mu2.len()) {
        return Err(Error::Dimension(format!(
            "plan is {}x{} but masses have lengths {} and {}",
            g.nrows(),
            g.ncols(),
            mu1.len(),
            mu2.len()
        )));
    }
    let (g1, g2) = marginals(g);
    for (side, (gm, mu)) in [(1, (&g1, mu1)), (2, (&g2, mu2))] {
        if let Some(i) = (0..mu.len()).find(|&i| gm[i] > 0.0 && mu[i] <= 0.0) {
            return Err(Error::Domain(format!("plan puts mass {} on point {i} of side {side}, which has no mass", gm[i])));
        }
    }
    let mut atoms = Vec::new();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let w = g[(i, j)];
            if w > 0.0 {
                atoms.push(ConeAtom {
                    left: ConePoint::new(i, (mu1[i] / g1[i]).powf(1.0 / p))?,
                    right: ConePoint::new(j, (mu2[j] / g2[j]).powf(1.0 / p))?,
                    weight: w,
                });
            }
        }
    }
    for (i, &m) in mu1.iter().enumerate() {
        if g1[i] <= 0.0 && m > 0.0 {
            atoms.push(ConeAtom { left: ConePoint::new(i, 1.0)?, right: ConePoint::APEX, weight: m });
        }
    }
    for (j, &m) in mu2.iter().enumerate() {
        if g2[j] <= 0.0 && m > 0.0 {
            atoms.push(ConeAtom { left: ConePoint::APEX, right: ConePoint::new(j, 1.0)?, weight: m });
        }
    }
    ConePlan::new(atoms, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConicOptions {
    /// Homogeneity exponent; `1 / a` of the preset when unset.
    pub p: Option<f64>,
    pub tol: f64,
}

impl Default for ConicOptions {
    fn default() -> Self {
        Self { p: None, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CgwReport {
    pub preset: Preset,
    pub p: f64,
    pub sturm_value: f64,
    /// `H(alpha)^a` on the lifted plan: an upper bound for `CGW^a`.
    pub lifted: f64,
    /// `(m1^a + m2^a) * sturm_value`.
    pub bound: f64,
    /// `bound - lifted`.
    pub margin: f64,
    pub holds: bool,
    pub plan: ConePlan,
}

/// Solves the Sturm problem, lifts its plan and compares both sides of
/// `CGW^a <= (m1^a + m2^a) D`.
pub fn check_cgw_inequality(
    mm1: &MetricMeasureSpace,
    mm2: &MetricMeasureSpace,
    preset: Preset,
    sturm: &SturmOptions,
    options: &ConicOptions,
) -> Result<CgwReport> {
    let problem = SturmProblem::new(mm1.clone(), mm2.clone(), preset)?;
    let solution = sturm_distance(&problem, sturm)?;
    cgw_report(mm1, mm2, &solution, options)
}

/// As [`check_cgw_inequality`] for an existing solution.
pub fn cgw_report(
    mm1: &MetricMeasureSpace,
    mm2: &MetricMeasureSpace,
    solution: &SturmSolution,
    options: &ConicOptions,
) -> Result<CgwReport> {
    let preset = solution.preset;
    let a = preset.a();
    let p = options.p.unwrap_or(1.0 / a);
    let sturm_value = solution.value.value();
    let bound = (mm1.total_mass().powf(a) + mm2.total_mass().powf(a)) * sturm_value;
    if solution.value.is_infinite() {
        let plan = ConePlan::new(Vec::new(), p)?;
        return Ok(CgwReport { preset, p, sturm_value, lifted: f64::NAN, bound, margin: f64::INFINITY, holds: true, plan });
    }
    let plan = lift_optimal_plan(&solution.gamma, mm1.mass(), mm2.mass(), p)?;
    let lifted = cgw_objective(&plan, mm1, mm2, preset.entropy(), preset.cost())?.powf(a).value();
    let margin = bound - lifted;
    Ok(CgwReport { preset, p, sturm_value, lifted, bound, margin, holds: margin >= -options.tol * (1.0 + bound.abs()), plan })
}

/// `sum_ij gamma_ij H_{l(D_ij)}(r_i^p, s_j^p)` for a lifted plan: the
/// one-level counterpart of [`cgw_objective`].
pub fn lifted_transport_value(alpha: &ConePlan, cross: &DMatrix<f64>, f: EntropyFunction, cost: CostFunction) -> Result<ExtReal> {
    let mut total = ExtReal::ZERO;
    for a in &alpha.atoms {
        let c = if a.left.is_apex() || a.right.is_apex() {
            ExtReal::ZERO
        } else {
            ExtReal::new(cost.value(cross[(a.left.base, a.right.base)]))
        };
        total += f.marginal_perspective(c, a.left.radius.powf(alpha.p), a.right.radius.powf(alpha.p))?.value * a.weight;
    }
    Ok(total)
}
