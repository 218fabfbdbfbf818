//! Batteries on measures over one space.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

use super::{CheckOptions, Tally};
use crate::entropy::{CostFunction, EntropyFunction};
use crate::et::{bl_cost, bl_dual, sinkhorn_kl_schedule, solve_generic, EtMethod, EtOptions, EtProblem};
use crate::ext::ExtReal;
use crate::presets::{et_distance, Preset};

/// `H_0(r, t)` for `U_p`, written out: `(sqrt r - sqrt t)^2` at `p = 1`,
/// `(r + t - 2^(p/(p-1)) (r^(1-p) + t^(1-p))^(1/(1-p))) / p` above.
pub fn power_h0(p: f64, r: f64, t: f64) -> f64 {
    if p == 1.0 {
        return (r.sqrt() - t.sqrt()).powi(2);
    }
    let q = 1.0 - p;
    (r + t - 2f64.powf(p / (p - 1.0)) * (r.powf(q) + t.powf(q)).powf(1.0 / q)) / p
}

pub(crate) fn rng(options: &CheckOptions, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(options.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Euclidean distances between `n` random points of the unit square.
pub(crate) fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
    DMatrix::from_fn(n, n, |i, j| ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt())
}

/// Masses in `[0.1, 2]`, some of them zero, never all.
pub(crate) fn random_mass(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut m: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.1..2.0) }).collect();
    if m.iter().all(|&x| x == 0.0) {
        m[0] = 1.0;
    }
    m
}

fn same_space_presets() -> Vec<Preset> {
    vec![Preset::Hk, Preset::Ghk, Preset::Qpl(2.0), Preset::Lpl(1.5), Preset::Bl, Preset::Pl(2.0), Preset::Wp(2.0)]
}

pub(super) fn closed_form_h0(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 1);
    for p in [1.0, 1.5, 2.0, 3.0] {
        let Some(f) = t.ok(|| format!("p={p}"), EntropyFunction::power_family(p)) else { continue };
        for _ in 0..200 {
            let (r, s) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
            let case = || format!("p={p} r={r} t={s}");
            let Some(numeric) = t.ok(case, f.marginal_perspective_numeric(ExtReal::ZERO, r, s)) else { continue };
            let (n, c) = (numeric.value.value(), power_h0(p, r, s));
            // Relative, plus the round-off of evaluating the display.
            let allowed = 1e-8 * n.abs().max(c.abs()) + 4.0 * f64::EPSILON * (r + s);
            t.at_most(case, (n - c).abs(), allowed);
        }
    }
}

pub(super) fn dirac_hk(t: &mut Tally, options: &CheckOptions) {
    let quarter = [0.25, 1.0, 4.0];
    for a in quarter {
        for b in quarter {
            for d in [0.0, FRAC_PI_6, FRAC_PI_3, FRAC_PI_2, 2.0] {
                let case = || format!("a={a} b={b} d={d}");
                let dist = DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]);
                let Some(r) = t.ok(case, et_distance(&dist, &[a, 0.0], &[0.0, b], Preset::Hk, options.et())) else {
                    continue;
                };
                let expected = a + b - 2.0 * (a * b).sqrt() * d.min(FRAC_PI_2).cos();
                t.at_most(case, (r.value.value().powi(2) - expected).abs(), 1e-6);
            }
        }
    }
}

pub(super) fn homogeneity(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 3);
    let presets = same_space_presets();
    for k in 0..50 {
        let preset = presets[k % presets.len()];
        let n = rng.gen_range(2..=6);
        let dist = random_dist(&mut rng, n);
        let mu1 = random_mass(&mut rng, n);
        let mut mu2 = random_mass(&mut rng, n);
        if let Preset::Wp(_) = preset {
            let s = mu1.iter().sum::<f64>() / mu2.iter().sum::<f64>();
            mu2.iter_mut().for_each(|x| *x *= s);
        }
        let case = || format!("measures #{k} {preset} n={n}");
        let Some(base) = t.ok(case, et_distance(&dist, &mu1, &mu2, preset, options.et())) else { continue };
        let base = base.value.value();
        for m in [0.5, 4.0] {
            let scale = |v: &[f64]| v.iter().map(|x| x * m).collect::<Vec<_>>();
            let case = || format!("measures #{k} {preset} n={n} M={m}");
            let Some(s) = t.ok(case, et_distance(&dist, &scale(&mu1), &scale(&mu2), preset, options.et())) else {
                continue;
            };
            let (lhs, rhs) = (s.value.value(), m.powf(preset.a()) * base);
            t.at_most(case, (lhs - rhs).abs(), 1e-5 * lhs.max(rhs));
        }
    }
}

pub(super) fn bounds_chain(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 4);
    for k in 0..30 {
        let n = rng.gen_range(2..=6);
        let dist = random_dist(&mut rng, n);
        let (mu1, mu2) = (random_mass(&mut rng, n), random_mass(&mut rng, n));
        let mut value = |preset: Preset| {
            t.ok(|| format!("measures #{k} {preset}"), et_distance(&dist, &mu1, &mu2, preset, options.et()))
                .map(|r| r.value.value())
        };
        let (Some(hk), Some(ghk)) = (value(Preset::Hk), value(Preset::Ghk)) else { continue };
        let qpl: Vec<(f64, Option<f64>)> = [1.5, 2.0, 3.0].into_iter().map(|p| (p, value(Preset::Qpl(p)))).collect();
        chain(t, &format!("measures #{k}"), hk, ghk, &qpl);
    }
}

/// `ghk <= hk` and `qpl:p <= ghk <= sqrt(p) qpl:p`, each with slack `1e-5`.
pub(super) fn chain(t: &mut Tally, label: &str, hk: f64, ghk: f64, qpl: &[(f64, Option<f64>)]) {
    t.at_most(|| format!("{label} ghk<=hk"), ghk, hk + 1e-5);
    for &(p, q) in qpl {
        let Some(q) = q else { continue };
        t.at_most(|| format!("{label} qpl:{p}<=ghk"), q, ghk + 1e-5);
        t.at_most(|| format!("{label} ghk<=sqrt(p) qpl:{p}"), ghk, p.sqrt() * q + 1e-5);
    }
}

pub(super) fn bl_duality(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 8);
    for k in 0..30 {
        let n = rng.gen_range(2..=8);
        // Spread the points so that some distances exceed 2.
        let dist = random_dist(&mut rng, n) * 3.0;
        let (mu1, mu2) = (random_mass(&mut rng, n), random_mass(&mut rng, n));
        let case = || format!("measures #{k} n={n}");
        let Some(problem) =
            t.ok(case, EtProblem::from_distances(&dist, CostFunction::Linear, mu1.clone(), mu2.clone(), EntropyFunction::TotalVariation))
        else {
            continue;
        };
        let (Some(primal), Some(dual)) = (t.ok(case, bl_cost(&problem)), t.ok(case, bl_dual(&mu1, &mu2, &dist))) else {
            continue;
        };
        t.at_most(case, (primal.value.value() - dual).abs(), 1e-7);
    }
    for d in [0.0, 0.25, 1.0, 1.5, 2.0, 3.0, 10.0] {
        let case = || format!("dirac pair d={d}");
        let dist = DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]);
        let Some(r) = t.ok(case, et_distance(&dist, &[1.0, 0.0], &[0.0, 1.0], Preset::Bl, options.et())) else { continue };
        t.at_most(case, (r.value.value() - d.min(2.0)).abs(), 1e-12);
    }
}

pub(super) fn scaling_vs_barrier(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 13);
    let et = options.et();
    let generic = EtOptions { method: EtMethod::Generic, ..et.clone() };
    for k in 0..50 {
        let (n1, n2) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let pts = |rng: &mut ChaCha8Rng, n: usize| -> Vec<[f64; 2]> {
            (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect()
        };
        let (x, y) = (pts(&mut rng, n1), pts(&mut rng, n2));
        let cost = DMatrix::from_fn(n1, n2, |i, j| (x[i][0] - y[j][0]).powi(2) + (x[i][1] - y[j][1]).powi(2));
        let (mu1, mu2) = (random_mass(&mut rng, n1), random_mass(&mut rng, n2));
        let f = if k % 5 == 4 { EntropyFunction::ScaledKl(rng.gen_range(0.5..4.0)) } else { EntropyFunction::Kl };
        let case = || format!("kl #{k} {n1}x{n2} {f}");
        let Some(problem) = t.ok(case, EtProblem::new(cost, mu1, mu2, f)) else { continue };
        let sink = t.ok(case, sinkhorn_kl_schedule(&problem, &et.epsilon_schedule, et.max_iter, et.sinkhorn_tol));
        let barrier = t.ok(case, solve_generic(&problem, &generic));
        let (Some(s), Some(b)) = (sink, barrier) else { continue };
        let (s, b) = (s.value.value(), b.value.value());
        t.at_most(case, (s - b).abs(), 1e-5 * s.abs().max(b.abs()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h0_display_examples() {
        assert!((power_h0(1.0, 1.0, 4.0) - 1.0).abs() < 1e-15);
        // p = 2: r + t - 4 rt / (r + t), halved.
        let (r, s) = (1.0, 3.0);
        assert!((power_h0(2.0, r, s) - 0.5 * (r + s - 4.0 * r * s / (r + s))).abs() < 1e-14);
        assert!(power_h0(3.0, 2.0, 2.0).abs() < 1e-14);
        assert!((power_h0(2.0, 0.0, 3.0) - 1.5).abs() < 1e-15);
    }
}
