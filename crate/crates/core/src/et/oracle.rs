//! Grid-search oracle for tiny ET problems.

use nalgebra::DMatrix;

use super::EtProblem;
use crate::error::{Error, Result};

const MAX_ENTRIES: usize = 6;
const MAX_GRID_POINTS: f64 = 2e6;

/// Exhaustive grid over plan entries in `[0, m1 + m2]`, then pattern search
/// down to a thousandth of `grid_step`. The result is the objective of an
/// explicit plan, hence an upper bound on the optimum.
///
/// When the full grid would exceed a few million points the grid is
/// coarsened, and the pattern search recovers the lost resolution.
pub fn brute_force_et(problem: &EtProblem, grid_step: f64) -> Result<f64> {
    let (n1, n2) = problem.shape();
    if n1 * n2 > MAX_ENTRIES {
        return Err(Error::SizeGuard(format!("brute force needs n1 * n2 <= {MAX_ENTRIES}, got {n1}x{n2}")));
    }
    if !(grid_step > 0.0) {
        return Err(Error::Domain(format!("grid step must be positive, got {grid_step}")));
    }
    let (m1, m2) = problem.masses();
    let upper = m1 + m2;
    let free: Vec<(usize, usize)> = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .filter(|&(i, j)| problem.cost()[(i, j)].is_finite())
        .collect();
    let k = free.len();
    let mut gamma = DMatrix::zeros(n1, n2);
    let eval = |x: &[f64], gamma: &mut DMatrix<f64>| {
        for (v, &(i, j)) in x.iter().zip(&free) {
            gamma[(i, j)] = *v;
        }
        problem.evaluate(gamma).total().value()
    };
    if k == 0 || upper == 0.0 {
        return Ok(eval(&[], &mut gamma));
    }

    let per_axis = MAX_GRID_POINTS.powf(1.0 / k as f64).floor().max(2.0);
    let step = grid_step.max(upper / (per_axis - 1.0));
    let ticks = (upper / step).floor() as usize + 1;
    let mut best_x = vec![0.0; k];
    let mut best = eval(&best_x, &mut gamma);
    let mut idx = vec![0usize; k];
    let mut x = vec![0.0; k];
    'grid: loop {
        for (xv, &t) in x.iter_mut().zip(&idx) {
            *xv = t as f64 * step;
        }
        let v = eval(&x, &mut gamma);
        if v < best {
            best = v;
            best_x.copy_from_slice(&x);
        }
        for a in 0..k {
            idx[a] += 1;
            if idx[a] < ticks {
                continue 'grid;
            }
            idx[a] = 0;
        }
        break;
    }

    // Pattern search over coordinate and pairwise directions.
    let mut dirs: Vec<Vec<(usize, f64)>> = Vec::new();
    for a in 0..k {
        dirs.push(vec![(a, 1.0)]);
        dirs.push(vec![(a, -1.0)]);
        for b in a + 1..k {
            for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                dirs.push(vec![(a, sa), (b, sb)]);
            }
        }
    }
    let mut h = step;
    while h >= grid_step * 1e-3 {
        let mut improved = true;
        while improved {
            improved = false;
            for d in &dirs {
                let mut trial = best_x.clone();
                if d.iter().any(|&(a, s)| {
                    trial[a] += s * h;
                    trial[a] < 0.0
                }) {
                    continue;
                }
                let v = eval(&trial, &mut gamma);
                if v < best {
                    best = v;
                    best_x = trial;
                    improved = true;
                }
            }
        }
        h *= 0.5;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EntropyFunction;
    use crate::et::{solve_et, EtOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dirac_pair_closed_form() {
        let d: f64 = 0.9;
        let c = -(d.cos().powi(2)).ln();
        let p = EtProblem::new(DMatrix::from_element(1, 1, c), vec![2.0], vec![0.5], EntropyFunction::Kl).unwrap();
        let v = brute_force_et(&p, 1e-3).unwrap();
        let expected = 2.5 - 2.0 * d.cos();
        assert!((v - expected).abs() < 1e-3);
        assert!(v >= expected - 1e-12);
    }

    #[test]
    fn identical_measures() {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = EtProblem::new(cost, vec![0.5, 1.0], vec![0.5, 1.0], EntropyFunction::PowerLike(2.0)).unwrap();
        assert!(brute_force_et(&p, 0.05).unwrap() < 1e-12);
    }

    #[test]
    fn size_guard() {
        let p = EtProblem::new(DMatrix::zeros(3, 3), vec![1.0; 3], vec![1.0; 3], EntropyFunction::Kl).unwrap();
        assert!(matches!(brute_force_et(&p, 0.1), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn dominates_solver_on_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let kinds = [EntropyFunction::Kl, EntropyFunction::PowerLike(2.0), EntropyFunction::TotalVariation, EntropyFunction::ScaledKl(2.0)];
        for t in 0..50 {
            let (n1, n2) = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3)][t % 5];
            let cost = DMatrix::from_fn(n1, n2, |_, _| rng.gen_range(0.0..2.0));
            let mu1: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.1..1.5)).collect();
            let mu2: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.1..1.5)).collect();
            let f = kinds[t % kinds.len()];
            let p = EtProblem::new(cost, mu1, mu2, f).unwrap();
            let solved = solve_et(&p, &EtOptions::default()).unwrap().value.value();
            let brute = brute_force_et(&p, 0.02).unwrap();
            assert!(brute >= solved - 1e-9, "{f}: brute {brute} < solver {solved}");
            assert!(brute - solved < 1e-3, "{f}: brute {brute} far above solver {solved}");
        }
    }
}
