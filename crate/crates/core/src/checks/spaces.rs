//! Batteries on pairs of metric measure spaces.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::measure::{chain, random_dist, rng};
use super::{CheckOptions, Tally};
use crate::conic::{check_cgw_inequality, homogeneous_marginal, ConicOptions, Side};
use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::Result;
use crate::fixtures::tiny_spaces;
use crate::mmspace::MetricMeasureSpace;
use crate::presets::Preset;
use crate::sturm::{
    brute_force_sturm, delta_config_bound, mass_scaling_bound, sturm_distance, sturm_distances, SturmProblem,
    SturmSolution,
};

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> MetricMeasureSpace {
    let mass = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    MetricMeasureSpace::new(random_dist(rng, n), mass).expect("euclidean points form a metric space")
}

fn solve(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, preset: Preset, options: &CheckOptions) -> Result<SturmSolution> {
    sturm_distance(&SturmProblem::new(mm1.clone(), mm2.clone(), preset)?, &options.sturm)
}

pub(super) fn homogeneity(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 103);
    let presets = [Preset::Hk, Preset::Ghk, Preset::Bl, Preset::Qpl(2.0), Preset::Lpl(2.0)];
    for k in 0..20 {
        let preset = presets[k % presets.len()];
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let (mm1, mm2) = (random_space(&mut rng, n1), random_space(&mut rng, n2));
        let case = || format!("spaces #{k} {preset} {n1}x{n2}");
        let Some(problem) = t.ok(case, SturmProblem::new(mm1, mm2, preset)) else { continue };
        let Some(base) = t.ok(case, sturm_distance(&problem, &options.sturm)) else { continue };
        let base = base.value.value();
        for m in [0.5, 4.0] {
            let case = || format!("spaces #{k} {preset} {n1}x{n2} M={m}");
            let Some(s) = t.ok(case, problem.scaled(m).and_then(|p| sturm_distance(&p, &options.sturm))) else {
                continue;
            };
            let (lhs, rhs) = (s.value.value(), m.powf(preset.a()) * base);
            t.at_most(case, (lhs - rhs).abs(), 1e-5 * lhs.max(rhs));
        }
    }
}

pub(super) fn bounds_chain(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 104);
    let presets = [Preset::Hk, Preset::Ghk, Preset::Qpl(1.5), Preset::Qpl(2.0), Preset::Qpl(3.0)];
    for k in 0..10 {
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let (mm1, mm2) = (random_space(&mut rng, n1), random_space(&mut rng, n2));
        let label = format!("spaces #{k} {n1}x{n2}");
        let Some(s) = t.ok(|| label.clone(), sturm_distances(&mm1, &mm2, &presets, &options.sturm)) else { continue };
        let v: Vec<f64> = s.iter().map(|s| s.value.value()).collect();
        chain(t, &label, v[0], v[1], &[(1.5, Some(v[2])), (2.0, Some(v[3])), (3.0, Some(v[4]))]);
    }
}

pub(super) fn permuted_copies(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 105);
    let presets = [
        Preset::Hk,
        Preset::Ghk,
        Preset::Qpl(2.0),
        Preset::Lpl(2.0),
        Preset::Pl(2.0),
        Preset::Bl,
        Preset::Wp(1.0),
        Preset::Wp(2.0),
    ];
    for k in 0..20 {
        let n = rng.gen_range(2..=3);
        let mm = random_space(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let Some(copy) = t.ok(|| format!("spaces #{k}"), mm.permuted(&perm)) else { continue };
        for preset in presets {
            let case = || format!("spaces #{k} {preset} n={n} perm={perm:?}");
            if let Some(s) = t.ok(case, solve(&mm, &copy, preset, options)) {
                t.at_most(case, s.value.value(), 1e-6);
            }
        }
    }
}

/// Presets for which the grid oracle is tabulated on the fixtures.
const ORACLE_PRESETS: [Preset; 3] = [Preset::Hk, Preset::Ghk, Preset::Bl];

type Table = Arc<Vec<Vec<Result<f64>>>>;

/// Grid-oracle values between all fixtures, symmetric, computed once per
/// `(preset, step, options)` and process.
fn oracle_table(preset: Preset, options: &CheckOptions) -> Table {
    static CACHE: OnceLock<Mutex<HashMap<String, Table>>> = OnceLock::new();
    let key = format!("{preset}/{}/{:?}", options.oracle_step, options.sturm);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("oracle cache").get(&key) {
        return t.clone();
    }
    let fixtures = tiny_spaces();
    let n = fixtures.len();
    let mut table: Vec<Vec<Result<f64>>> = (0..n).map(|_| (0..n).map(|_| Ok(0.0)).collect()).collect();
    for i in 0..n {
        for j in i..n {
            let v = SturmProblem::new(fixtures[i].1.clone(), fixtures[j].1.clone(), preset)
                .and_then(|p| brute_force_sturm(&p, options.oracle_step, &options.sturm))
                .map(|s| s.value.value());
            table[j][i] = v.clone();
            table[i][j] = v;
        }
    }
    let table = Arc::new(table);
    cache.lock().expect("oracle cache").insert(key, table.clone());
    table
}

/// Closed forms available on the fixtures: identical spaces, and two Diracs.
fn closed_form(preset: Preset, a: &MetricMeasureSpace, b: &MetricMeasureSpace, same: bool) -> Option<f64> {
    if same {
        return Some(0.0);
    }
    if a.len() != 1 || b.len() != 1 {
        return None;
    }
    let (r, s) = (a.total_mass(), b.total_mass());
    match preset {
        Preset::Hk | Preset::Ghk => Some((r + s - 2.0 * (r * s).sqrt()).max(0.0).sqrt()),
        Preset::Bl => Some((r - s).abs()),
        _ => None,
    }
}

const GRID_TOL: f64 = 1e-3;

pub(super) fn oracle_gap(t: &mut Tally, options: &CheckOptions) {
    let fixtures = tiny_spaces();
    for preset in ORACLE_PRESETS {
        let table = oracle_table(preset, options);
        for i in 0..fixtures.len() {
            for j in i..fixtures.len() {
                let ((na, a), (nb, b)) = (&fixtures[i], &fixtures[j]);
                let case = || format!("{preset} {na} vs {nb}");
                let oracle = match &table[i][j] {
                    Ok(v) => *v,
                    Err(e) => {
                        t.error(case, e);
                        continue;
                    }
                };
                if let Some(s) = t.ok(case, solve(a, b, preset, options)) {
                    t.at_most(|| format!("{} (solver vs oracle)", case()), s.value.value(), oracle + GRID_TOL);
                }
                if let Some(exact) = closed_form(preset, a, b, i == j) {
                    t.at_most(|| format!("{} (oracle vs closed form)", case()), (oracle - exact).abs(), GRID_TOL);
                }
            }
        }
    }
}

pub(super) fn triangle(t: &mut Tally, options: &CheckOptions) {
    let fixtures = tiny_spaces();
    let n = fixtures.len();
    for preset in ORACLE_PRESETS {
        let table = oracle_table(preset, options);
        let mut values = vec![vec![0.0; n]; n];
        let mut complete = true;
        for i in 0..n {
            for j in 0..n {
                match &table[i][j] {
                    Ok(v) => values[i][j] = *v,
                    Err(e) => {
                        if i <= j {
                            t.error(|| format!("{preset} {} vs {}", fixtures[i].0, fixtures[j].0), e);
                        }
                        complete = false;
                    }
                }
            }
        }
        if !complete {
            continue;
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let case = || format!("{preset} {} / {} / {}", fixtures[a].0, fixtures[b].0, fixtures[c].0);
                    t.at_most(case, values[a][c], values[a][b] + values[b][c] + 3e-3);
                }
            }
        }
    }
}

/// `values[k] <= values[k + 1]` up to round-off of the solves.
fn nondecreasing(t: &mut Tally, label: &str, ns: &[f64], values: &[f64]) {
    for k in 1..values.len() {
        let (lo, hi) = (values[k - 1], values[k]);
        t.at_most(|| format!("{label} n={} <= n={}", ns[k - 1], ns[k]), lo, hi + 1e-9 * (1.0 + hi));
    }
}

pub(super) fn pure_entropy_limit(t: &mut Tally, options: &CheckOptions) {
    let fixtures = tiny_spaces();
    let ns = [1.0, 10.0, 100.0, 1000.0];
    for p in [1.0, 2.0] {
        let Some(f) = t.ok(|| format!("p={p}"), EntropyFunction::power_family(p)) else { continue };
        let mut presets: Vec<Preset> = ns.iter().map(|&n| Preset::Custom { a: 0.5, entropy: f, cost: CostFunction::Scaled(n) }).collect();
        presets.push(Preset::Pl(p));
        for i in 0..fixtures.len() {
            for j in i..fixtures.len() {
                let ((na, a), (nb, b)) = (&fixtures[i], &fixtures[j]);
                let label = format!("p={p} {na} vs {nb}");
                let Some(s) = t.ok(|| label.clone(), sturm_distances(a, b, &presets, &options.sturm)) else { continue };
                let v: Vec<f64> = s.iter().map(|s| s.value.value()).collect();
                nondecreasing(t, &label, &ns, &v[..ns.len()]);
                let (last, limit) = (v[ns.len() - 1], v[ns.len()]);
                t.at_most(|| format!("{label} |n=1000 - limit|"), (last - limit).abs(), 1e-3);
            }
        }
    }
}

pub(super) fn balanced_limit(t: &mut Tally, options: &CheckOptions) {
    let fixtures = tiny_spaces();
    let ns = [1.0, 10.0, 100.0, 1000.0];
    for p in [1.0, 2.0] {
        let mut presets: Vec<Preset> = ns
            .iter()
            .map(|&n| Preset::Custom { a: 1.0 / p, entropy: EntropyFunction::ScaledKl(n), cost: CostFunction::Power(p) })
            .collect();
        presets.push(Preset::Wp(p));
        for i in 0..fixtures.len() {
            for j in i..fixtures.len() {
                let ((na, a), (nb, b)) = (&fixtures[i], &fixtures[j]);
                if (a.total_mass() - b.total_mass()).abs() > 1e-12 {
                    continue;
                }
                let label = format!("p={p} {na} vs {nb}");
                let Some(s) = t.ok(|| label.clone(), sturm_distances(a, b, &presets, &options.sturm)) else { continue };
                let v: Vec<f64> = s.iter().map(|s| s.value.value()).collect();
                nondecreasing(t, &label, &ns, &v[..ns.len()]);
                let dp = v[ns.len()];
                for (k, &n) in ns.iter().enumerate() {
                    t.at_most(|| format!("{label} n={n} <= balanced"), v[k], dp + 1e-3);
                }
            }
        }
    }
}

pub(super) fn conic_bound(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 111);
    let conic = ConicOptions::default();
    for k in 0..50 {
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let (mm1, mm2) = (random_space(&mut rng, n1), random_space(&mut rng, n2));
        for preset in [Preset::Hk, Preset::Ghk] {
            let case = || format!("spaces #{k} {preset} {n1}x{n2}");
            let Some(r) = t.ok(case, check_cgw_inequality(&mm1, &mm2, preset, &options.sturm, &conic)) else { continue };
            t.at_most(case, r.lifted, r.bound + 1e-5);
            for (side, mm) in [(Side::Left, &mm1), (Side::Right, &mm2)] {
                let h = homogeneous_marginal(&r.plan, side, mm.len());
                let err = h.iter().zip(mm.mass()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                t.at_most(|| format!("{} {side:?} marginal", case()), err, 1e-9);
            }
        }
    }
}

pub(super) fn a_priori_bounds(t: &mut Tally, options: &CheckOptions) {
    let mut rng = rng(options, 112);
    let presets = [Preset::Hk, Preset::Ghk, Preset::Bl, Preset::Qpl(2.0), Preset::Lpl(2.0)];
    let within = |cost: f64, bound: f64| bound * (1.0 + 1e-9) + 1e-12 - cost;

    for k in 0..20 {
        let preset = presets[k % presets.len()];
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(0.2..1.5);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let moved: Vec<Vec<f64>> = pts.iter().map(|x| x.iter().map(|c| c + rng.gen_range(-0.1..0.1)).collect()).collect();
        let case = || format!("configurations #{k} {preset} n={n}");
        let spaces = MetricMeasureSpace::from_points(&pts, vec![m; n])
            .and_then(|a| Ok((a, MetricMeasureSpace::from_points(&moved, vec![m; n])?)));
        let Some((mm1, mm2)) = t.ok(case, spaces) else { continue };
        let Some(bound) = t.ok(case, delta_config_bound(&mm1, &mm2, m, preset.cost())) else { continue };
        if let Some(s) = t.ok(case, solve(&mm1, &mm2, preset, options)) {
            t.slack(case, within(s.cost.value(), bound));
        }
    }

    let big_n = 4.0;
    for k in 0..20 {
        let preset = presets[k % presets.len()];
        let n = rng.gen_range(1..=4);
        let mm = random_space(&mut rng, n);
        let factor = if rng.gen_bool(0.5) { rng.gen_range(0.3..0.95) } else { rng.gen_range(1.05..3.9) };
        let case = || format!("rescaling #{k} {preset} n={n} M={factor}");
        let Some(bound) = t.ok(case, mass_scaling_bound(&mm, factor, big_n, preset.entropy())) else { continue };
        let Some(scaled) = t.ok(case, mm.scaled(factor)) else { continue };
        if let Some(s) = t.ok(case, solve(&mm, &scaled, preset, options)) {
            t.slack(case, within(s.cost.value(), bound));
        }
    }
}
