//! Right-hand sides of two a-priori upper bounds on the Sturm cost.

use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::{Error, Result};
use crate::ext::ext_mul;
use crate::mmspace::MetricMeasureSpace;

/// `M n l(sup |d_ij - d'_ij|)` for two `n`-point configurations whose atoms
/// all carry mass `m`. Bounds the Sturm cost from above.
pub fn delta_config_bound(mm1: &MetricMeasureSpace, mm2: &MetricMeasureSpace, m: f64, cost: CostFunction) -> Result<f64> {
    let n = mm1.len();
    if mm2.len() != n {
        return Err(Error::Dimension(format!("configurations of sizes {n} and {}", mm2.len())));
    }
    if !(m >= 0.0) {
        return Err(Error::Domain(format!("atom mass must be nonnegative, got {m}")));
    }
    let uniform = |mm: &MetricMeasureSpace| mm.mass().iter().all(|&x| (x - m).abs() <= 1e-12 * m.max(1.0));
    if !uniform(mm1) || !uniform(mm2) {
        return Err(Error::Domain(format!("both configurations need every atom at mass {m}")));
    }
    let sup = (mm1.dist() - mm2.dist()).amax();
    Ok(ext_mul(m * n as f64, cost.value(sup)))
}

/// `C mu(X) |M - 1|` with `C = max{F(1/N)/(1 - 1/N), F(N)/(N - 1)}`, bounding
/// the cost between `mm` and its copy with masses scaled by `factor`.
pub fn mass_scaling_bound(mm: &MetricMeasureSpace, factor: f64, big_n: f64, entropy: EntropyFunction) -> Result<f64> {
    if !(big_n > 1.0 && factor > 1.0 / big_n && factor < big_n) {
        return Err(Error::Domain(format!("need 1/N < M < N, got M = {factor}, N = {big_n}")));
    }
    let c = entropy.tv_bound_constant(big_n)?;
    Ok(ext_mul(c, mm.total_mass() * (factor - 1.0).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_configurations_give_zero() {
        let a = MetricMeasureSpace::two_point(1.0, [1.0, 1.0]).unwrap();
        assert_eq!(delta_config_bound(&a, &a, 1.0, CostFunction::Power(2.0)).unwrap(), 0.0);
        assert_eq!(mass_scaling_bound(&a, 1.0, 2.0, EntropyFunction::Kl).unwrap(), 0.0);
    }

    #[test]
    fn two_point_configurations() {
        let a = MetricMeasureSpace::two_point(1.0, [1.0, 1.0]).unwrap();
        let b = MetricMeasureSpace::two_point(1.1, [1.0, 1.0]).unwrap();
        let v = delta_config_bound(&a, &b, 1.0, CostFunction::Power(2.0)).unwrap();
        assert!((v - 0.02).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        let a = MetricMeasureSpace::two_point(1.0, [1.0, 2.0]).unwrap();
        assert!(delta_config_bound(&a, &a, 1.0, CostFunction::Linear).is_err());
        assert!(mass_scaling_bound(&a, 3.0, 2.0, EntropyFunction::Kl).is_err());
    }
}
