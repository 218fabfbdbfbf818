//! Grid oracle for spaces of at most two points.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::coupling::max_entry;
use super::{inner_options, solve_at, SturmDiagnostics, SturmOptions, SturmProblem, SturmSolution};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::mmspace::{Coupling, CrossDistanceMatrix};

/// Grid search over cross blocks, with an exact ET solve at every point.
///
/// Entries range over `[0, max(diam1, diam2)]`: clipping a feasible block at
/// the larger diameter keeps it feasible and never raises the cost. Only
/// the diagonal entries are gridded; the others are set to their least
/// feasible value, which is optimal for a nondecreasing `l`. Grids with
/// step `h` and `h / 2` are nested, so refining never increases the value.
pub fn brute_force_sturm(problem: &SturmProblem, grid_step: f64, options: &SturmOptions) -> Result<SturmSolution> {
    let (mm1, mm2) = (problem.mm1(), problem.mm2());
    let (n1, n2) = (mm1.len(), mm2.len());
    if n1 > 2 || n2 > 2 || n1 == 0 || n2 == 0 {
        return Err(Error::SizeGuard(format!("grid oracle needs at most two points per side, got {n1}x{n2}")));
    }
    if !(grid_step > 0.0) {
        return Err(Error::Domain(format!("grid step must be positive, got {grid_step}")));
    }
    let cap = max_entry(mm1.dist()).max(max_entry(mm2.dist()));
    let mut ticks: Vec<f64> = (0..).map(|k| k as f64 * grid_step).take_while(|&x| x <= cap).collect();
    if ticks.last().map_or(true, |&x| x < cap) {
        ticks.push(cap);
    }
    let a = if n1 == 2 { mm1.dist()[(0, 1)] } else { 0.0 };
    let b = if n2 == 2 { mm2.dist()[(0, 1)] } else { 0.0 };

    let blocks: Vec<DMatrix<f64>> = match (n1, n2) {
        (1, 1) => vec![DMatrix::zeros(1, 1)],
        (1, 2) => ticks.iter().map(|&x| DMatrix::from_row_slice(1, 2, &[x, (b - x).abs()])).collect(),
        (2, 1) => ticks.iter().map(|&x| DMatrix::from_row_slice(2, 1, &[x, (a - x).abs()])).collect(),
        _ => {
            let mut v = Vec::with_capacity(ticks.len() * ticks.len());
            for &x in &ticks {
                for &y in &ticks {
                    let d12 = (y - a).abs().max((x - b).abs());
                    let d21 = (x - a).abs().max((y - b).abs());
                    let m = DMatrix::from_row_slice(2, 2, &[x, d12, d21, y]);
                    let ok = CrossDistanceMatrix::new(m.clone())?.validate(mm1.dist(), mm2.dist(), 1e-12)?.is_valid();
                    if ok {
                        v.push(m);
                    }
                }
            }
            v
        }
    };

    let et = inner_options(options, problem.preset().entropy());
    let eval = |m: &DMatrix<f64>| -> Result<f64> { Ok(solve_at(problem, m, &et)?.value.value()) };
    let values: Vec<Result<f64>> =
        if options.parallel { blocks.par_iter().map(eval).collect() } else { blocks.iter().map(eval).collect() };
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    let (k, _) = best.ok_or_else(|| Error::Internal("empty grid".into()))?;
    let cross = blocks[k].clone();
    let sol = solve_at(problem, &cross, &et)?;
    let breakdown = problem.evaluate(sol.gamma.gamma(), &cross)?;
    let cost: ExtReal = breakdown.total();
    Ok(SturmSolution {
        value: cost.powf(problem.preset().a()),
        cost,
        preset: problem.preset(),
        gamma: Coupling::new(sol.gamma.into_inner())?,
        cross: CrossDistanceMatrix::new(cross)?,
        breakdown,
        seeds_tried: blocks.len(),
        seed_values: Vec::new(),
        diagnostics: SturmDiagnostics {
            method: "grid".into(),
            outer_iterations: 0,
            objective_trace: vec![cost.value()],
            oracle_gap: None,
        },
    })
}
