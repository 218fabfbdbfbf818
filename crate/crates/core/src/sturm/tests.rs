use super::*;
use crate::entropy::CostFunction;
use crate::et::EtOptions;
use crate::presets::et_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(points: &[f64], mass: &[f64]) -> MetricMeasureSpace {
    let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
    MetricMeasureSpace::from_points(&pts, mass.to_vec()).unwrap()
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> MetricMeasureSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
    let mass = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
    MetricMeasureSpace::from_points(&pts, mass).unwrap()
}

fn solve(a: &MetricMeasureSpace, b: &MetricMeasureSpace, preset: Preset) -> SturmSolution {
    sturm_distance(&SturmProblem::new(a.clone(), b.clone(), preset).unwrap(), &SturmOptions::default()).unwrap()
}

fn check_invariants(problem: &SturmProblem, s: &SturmSolution) {
    for w in s.diagnostics.objective_trace.windows(2) {
        assert!(w[1] <= w[0], "trace increased: {w:?}");
    }
    let recomputed = problem.evaluate(s.gamma.gamma(), s.cross.matrix()).unwrap().total().value();
    let cost = s.value.value().powf(1.0 / problem.preset().a());
    assert!((recomputed - cost).abs() <= 1e-9 * cost.max(1e-12), "{recomputed} vs {cost}");
    let report = s.cross.validate(problem.mm1().dist(), problem.mm2().dist(), DEFAULT_VALIDATION_TOL).unwrap();
    assert!(report.is_valid(), "{report:?}");
}

#[test]
fn singleton_hellinger_kantorovich() {
    for (a, b) in [(1.0, 4.0), (0.25, 1.0), (2.0, 2.0)] {
        let (x, y) = (MetricMeasureSpace::singleton(a).unwrap(), MetricMeasureSpace::singleton(b).unwrap());
        let s = solve(&x, &y, Preset::Hk);
        let expected = a + b - 2.0 * (a * b as f64).sqrt();
        assert!((s.value.value().powi(2) - expected).abs() < 1e-9, "{a},{b}: {}", s.value);
        assert_eq!(s.cross.get(0, 0), 0.0);
    }
}

#[test]
fn permuted_copies_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for preset in [Preset::Hk, Preset::Ghk, Preset::Qpl(2.0), Preset::Bl, Preset::Wp(2.0)] {
        let a = random_space(&mut rng, 4);
        let b = a.permuted(&[2, 0, 3, 1]).unwrap();
        let problem = SturmProblem::new(a, b, preset).unwrap();
        let s = sturm_distance(&problem, &SturmOptions::default()).unwrap();
        assert!(s.value.value() <= 1e-6, "{preset}: {}", s.value);
        check_invariants(&problem, &s);
    }
}

#[test]
fn mass_scaling_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (random_space(&mut rng, 3), random_space(&mut rng, 2));
    let problem = SturmProblem::new(a, b, Preset::Hk).unwrap();
    let base = sturm_distance(&problem, &SturmOptions::default()).unwrap().value.value();
    let scaled = sturm_distance(&problem.scaled(4.0).unwrap(), &SturmOptions::default()).unwrap().value.value();
    assert!((scaled - 2.0 * base).abs() <= 1e-6 * base, "{scaled} vs 2 x {base}");
}

#[test]
fn swapping_sides() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for preset in [Preset::Hk, Preset::Bl, Preset::Lpl(2.0)] {
        let (a, b) = (random_space(&mut rng, 3), random_space(&mut rng, 2));
        let problem = SturmProblem::new(a, b, preset).unwrap();
        let s = sturm_distance(&problem, &SturmOptions::default()).unwrap();
        let t = sturm_distance(&problem.swapped(), &SturmOptions::default()).unwrap();
        check_invariants(&problem, &s);
        assert!((s.value.value() - t.value.value()).abs() <= 1e-7 * (1.0 + s.value.value()), "{preset}: {} vs {}", s.value, t.value);
    }
}

#[test]
fn balanced_distance_examples() {
    let opts = SturmOptions::default();
    let one = MetricMeasureSpace::singleton(2.0).unwrap();
    assert!(sturm_dp(&one, &one, 1.0, &opts).unwrap().value.value().abs() < 1e-12);
    let other = MetricMeasureSpace::singleton(1.0).unwrap();
    assert!(sturm_dp(&one, &other, 2.0, &opts).unwrap().value.is_infinite());

    let a = MetricMeasureSpace::two_point(1.0, [0.5, 0.5]).unwrap();
    let b = MetricMeasureSpace::two_point(2.0, [0.5, 0.5]).unwrap();
    let s = sturm_dp(&a, &b, 1.0, &opts).unwrap();
    assert!(s.value.value() <= 0.5 + 1e-9, "{}", s.value);
    let grid = brute_force_sturm(&SturmProblem::new(a, b, Preset::Wp(1.0)).unwrap(), 1.0 / 64.0, &opts).unwrap();
    assert!((s.value.value() - grid.value.value()).abs() < 1e-6, "{} vs grid {}", s.value, grid.value);
}

#[test]
fn bounded_lipschitz_lift_examples() {
    let opts = SturmOptions::default();
    let one = MetricMeasureSpace::singleton(1.0).unwrap();
    let three = MetricMeasureSpace::singleton(3.0).unwrap();
    assert!(sturm_bl(&one, &one, &opts).unwrap().value.value().abs() < 1e-12);
    assert!((sturm_bl(&one, &three, &opts).unwrap().value.value() - 2.0).abs() < 1e-9);
    // 1-D scan of |θ - 1| + |θ - 3|.
    let scan = (0..=4000).map(|k| k as f64 / 1000.0).map(|t| (t - 1.0f64).abs() + (t - 3.0f64).abs()).fold(f64::INFINITY, f64::min);
    assert!((scan - 2.0).abs() < 1e-12);
    let a = space(&[0.0, 0.4, 1.5], &[1.0, 2.0, 0.5]);
    assert!(sturm_bl(&a, &a.permuted(&[1, 2, 0]).unwrap(), &opts).unwrap().value.value() < 1e-9);
}

#[test]
fn grid_oracle_examples() {
    let opts = SturmOptions::default();
    let (x, y) = (MetricMeasureSpace::singleton(1.0).unwrap(), MetricMeasureSpace::singleton(4.0).unwrap());
    let p = SturmProblem::new(x, y, Preset::Hk).unwrap();
    let g = brute_force_sturm(&p, 1e-2, &opts).unwrap();
    assert!((g.value.value() - 1.0).abs() < 1e-3);

    let a = MetricMeasureSpace::two_point(0.7, [1.0, 0.3]).unwrap();
    let iso = SturmProblem::new(a.clone(), a.permuted(&[1, 0]).unwrap(), Preset::Hk).unwrap();
    assert!(brute_force_sturm(&iso, 1.0 / 32.0, &opts).unwrap().value.value() < 1e-6);

    let b = MetricMeasureSpace::two_point(0.3, [0.5, 0.9]).unwrap();
    let p = SturmProblem::new(a, b, Preset::Ghk).unwrap();
    let mut prev = f64::INFINITY;
    for k in 2..6 {
        let v = brute_force_sturm(&p, 0.5f64.powi(k), &opts).unwrap().value.value();
        assert!(v <= prev + 1e-12, "step 2^-{k}: {v} > {prev}");
        prev = v;
    }

    let big = SturmProblem::new(random_space(&mut ChaCha8Rng::seed_from_u64(1), 3), MetricMeasureSpace::singleton(1.0).unwrap(), Preset::Hk).unwrap();
    assert!(matches!(brute_force_sturm(&big, 0.1, &opts), Err(Error::SizeGuard(_))));
}

#[test]
fn alternating_matches_grid_on_two_point_spaces() {
    let opts = SturmOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for preset in [Preset::Hk, Preset::Ghk, Preset::Bl] {
        let a = MetricMeasureSpace::two_point(rng.gen_range(0.2..1.2), [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)]).unwrap();
        let b = MetricMeasureSpace::two_point(rng.gen_range(0.2..1.2), [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)]).unwrap();
        let p = SturmProblem::new(a, b, preset).unwrap();
        let alt = sturm_distance(&p, &opts).unwrap();
        check_invariants(&p, &alt);
        let grid = brute_force_sturm(&p, 1.0 / 64.0, &opts).unwrap();
        assert!(alt.value.value() <= grid.value.value() + 1e-6, "{preset}: {} vs grid {}", alt.value, grid.value);
    }
}

#[test]
fn delta_configuration_bound_holds() {
    let a = MetricMeasureSpace::two_point(1.0, [1.0, 1.0]).unwrap();
    let b = MetricMeasureSpace::two_point(1.1, [1.0, 1.0]).unwrap();
    let bound = delta_config_bound(&a, &b, 1.0, CostFunction::Power(2.0)).unwrap();
    let s = solve(&a, &b, Preset::Ghk);
    assert!(s.cost.value() <= bound + 1e-12, "{} > {bound}", s.cost);
}

#[test]
fn same_space_is_bounded_by_the_measure_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let base = random_space(&mut rng, 3);
    let mu2: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.5)).collect();
    let other = base.with_mass(mu2.clone()).unwrap();
    for preset in [Preset::Hk, Preset::Ghk, Preset::Bl] {
        let s = solve(&base, &other, preset);
        let m = et_distance(base.dist(), base.mass(), &mu2, preset, &EtOptions::default()).unwrap();
        assert!(s.value.value() <= m.value.value() + 1e-9, "{preset}: {} > {}", s.value, m.value);
    }
}

#[test]
fn shared_pool_orders_presets() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (a, b) = (random_space(&mut rng, 2), random_space(&mut rng, 3));
    let presets = [Preset::Hk, Preset::Ghk, Preset::Qpl(2.0)];
    let s = sturm_distances(&a, &b, &presets, &SturmOptions::default()).unwrap();
    let (hk, ghk, qpl) = (s[0].value.value(), s[1].value.value(), s[2].value.value());
    assert!(ghk <= hk + 1e-9);
    assert!(qpl <= ghk + 1e-9 && ghk <= 2f64.sqrt() * qpl + 1e-9, "{qpl} {ghk}");
}
