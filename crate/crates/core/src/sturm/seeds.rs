//! Starting cross blocks for the alternating minimization.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::coupling::max_entry;
use super::exact::{isometry_coupling, walk_partial_isometries};
use super::SturmOptions;
use crate::error::Result;
use crate::mmspace::{canonical_coupling, relation_coupling, MetricMeasureSpace};

const ISOMETRY_BUDGET: usize = 20_000;
const ISOMETRY_SEEDS: usize = 8;

/// Seed blocks for `(mm1, mm2)`. Every family is generated in both
/// orientations, so the set is the same (up to transposition) when the
/// spaces are swapped.
pub(crate) fn seeds(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, options: &SturmOptions) -> Result<Vec<DMatrix<f64>>> {
    let mut out: Vec<DMatrix<f64>> = Vec::new();
    let push = |m: DMatrix<f64>, out: &mut Vec<DMatrix<f64>>| {
        if !out.iter().any(|o| (o - &m).amax() <= 1e-12) {
            out.push(m);
        }
    };
    let cap = max_entry(mm1.dist()).max(max_entry(mm2.dist()));
    for m in oriented(mm1, mm2, options)? {
        push(m.map(|v| v.min(cap)), &mut out);
    }
    for m in oriented(mm2, mm1, options)? {
        push(m.transpose().map(|v| v.min(cap)), &mut out);
    }
    Ok(out)
}

fn oriented(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, options: &SturmOptions) -> Result<Vec<DMatrix<f64>>> {
    let (d1, d2) = (mm1.dist(), mm2.dist());
    let span = max_entry(d1) + max_entry(d2);
    let mut out = Vec::new();

    // Two measures on one space: the identity gluing.
    if d1.shape() == d2.shape() && d1 == d2 {
        out.push(d1.clone());
    }

    // Gluing at basepoints, heaviest points first.
    let heaviest = |mm: &MetricMeasureSpace, k: usize| {
        let mut idx: Vec<usize> = (0..mm.len()).collect();
        idx.sort_by(|&a, &b| mm.mass()[b].total_cmp(&mm.mass()[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    };
    let per_side = (options.max_basepoints as f64).sqrt().ceil().max(1.0) as usize;
    for &b1 in &heaviest(mm1, per_side) {
        for &b2 in &heaviest(mm2, per_side) {
            for factor in [0.0, 0.5, 1.0, 2.0] {
                out.push(canonical_coupling(mm1, mm2, b1, b2, factor * span, 0.0)?.into_inner());
            }
        }
    }

    // Greedy correspondence by relative mass, and its prefixes.
    let rank = |mm: &MetricMeasureSpace| {
        let total = mm.total_mass().max(f64::MIN_POSITIVE);
        let mut idx = mm.support();
        idx.sort_by(|&a, &b| (mm.mass()[b] / total).total_cmp(&(mm.mass()[a] / total)).then(a.cmp(&b)));
        idx
    };
    let greedy: Vec<(usize, usize)> = rank(mm1).into_iter().zip(rank(mm2)).collect();
    for k in 1..=greedy.len() {
        out.push(relation_coupling(d1, d2, &greedy[..k], None)?.into_inner());
    }

    // Largest partial isometries between the supports.
    let (s1, s2) = (mm1.support(), mm2.support());
    let mut found: Vec<(usize, f64, Vec<(usize, usize)>)> = Vec::new();
    let (m1, m2) = (mm1.total_mass().max(f64::MIN_POSITIVE), mm2.total_mass().max(f64::MIN_POSITIVE));
    walk_partial_isometries(d1, d2, &s1, &s2, ISOMETRY_BUDGET, &mut |rel| {
        if rel.is_empty() {
            return;
        }
        let shared: f64 = rel.iter().map(|&(i, j)| (mm1.mass()[i] / m1).min(mm2.mass()[j] / m2)).sum();
        found.push((rel.len(), shared, rel.to_vec()));
        if found.len() > 4 * ISOMETRY_SEEDS {
            found.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
            found.truncate(ISOMETRY_SEEDS);
        }
    });
    found.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    for (_, _, rel) in found.into_iter().take(ISOMETRY_SEEDS) {
        out.push(isometry_coupling(mm1, mm2, &rel)?);
    }

    // Random relations with a random slack above half their distortion.
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (n1, n2) = (mm1.len(), mm2.len());
    for _ in 0..options.restarts {
        let k = rng.gen_range(1..=n1.min(n2));
        let mut left: Vec<usize> = (0..n1).collect();
        let mut right: Vec<usize> = (0..n2).collect();
        left.shuffle(&mut rng);
        right.shuffle(&mut rng);
        let rel: Vec<(usize, usize)> = left.into_iter().zip(right).take(k).collect();
        let half = 0.5 * crate::mmspace::distortion(d1, d2, &rel);
        let eta = half + rng.gen_range(0.0..=0.25) * span;
        out.push(relation_coupling(d1, d2, &rel, Some(eta))?.into_inner());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::CrossDistanceMatrix;

    #[test]
    fn seeds_are_valid_and_swap_invariant() {
        let a = MetricMeasureSpace::from_points(&[vec![0.0], vec![1.0], vec![2.5]], vec![1.0, 0.5, 2.0]).unwrap();
        let b = MetricMeasureSpace::from_points(&[vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.7, 0.3]).unwrap();
        let opts = SturmOptions::default();
        let ab = seeds(&a, &b, &opts).unwrap();
        let ba = seeds(&b, &a, &opts).unwrap();
        assert_eq!(ab.len(), ba.len());
        for m in &ab {
            let report = CrossDistanceMatrix::new(m.clone()).unwrap().validate(a.dist(), b.dist(), 1e-9).unwrap();
            assert!(report.is_valid(), "{report:?}");
            assert!(ba.iter().any(|o| (o.transpose() - m).amax() <= 1e-12));
        }
    }

    #[test]
    fn permuted_copy_gets_a_zero_seed() {
        let a = MetricMeasureSpace::from_points(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![0.4, 0.9], vec![0.8, 0.8]], vec![1.0; 4])
            .unwrap();
        let perm = [3, 1, 0, 2];
        let b = a.permuted(&perm).unwrap();
        let s = seeds(&a, &b, &SturmOptions::default()).unwrap();
        assert!(s.iter().any(|m| (0..4).all(|k| (0..4).any(|j| m[(k, j)] == 0.0))));
    }
}
