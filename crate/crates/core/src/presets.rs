//! Named `(a, F, l)` triples and the measure-level distance they induce.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::entropy::{CostFunction, EntropyFunction};
use crate::error::{Error, Result};
use crate::et::{pure_entropy_cost, solve_et, EtOptions, EtProblem, EtSolution};
use crate::ext::ExtReal;
use crate::mmspace::MetricMeasureSpace;

/// A distance preset. The string form (`hk`, `qpl:2`, ...) is the one used
/// on the command line and in result records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Hellinger-Kantorovich: `(1/2, KL, -log cos^2)`.
    Hk,
    /// Gaussian Hellinger-Kantorovich: `(1/2, KL, d^2)`.
    Ghk,
    /// Quadratic power-like, `1 < p <= 3`: `(1/2, U_p, d^2)`.
    Qpl(f64),
    /// Linear power-like, `p > 1`: `(1/2, U_p, d)`.
    Lpl(f64),
    /// Pure-entropy limit, `p >= 1`: `(1/2, U_p, 0 | inf)`.
    Pl(f64),
    /// Bounded Lipschitz: `(1, |s - 1|, d)`.
    Bl,
    /// Wasserstein, `p >= 1`: `(1/p, I_1, d^p)`.
    Wp(f64),
    Custom { a: f64, entropy: EntropyFunction, cost: CostFunction },
}

impl Preset {
    pub fn qpl(p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 3.0) {
            return Err(Error::Preset(format!("qpl needs 1 < p <= 3, got {p}")));
        }
        Ok(Self::Qpl(p))
    }

    pub fn lpl(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Preset(format!("lpl needs p > 1, got {p}")));
        }
        Ok(Self::Lpl(p))
    }

    pub fn pl(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Preset(format!("pl needs p >= 1, got {p}")));
        }
        Ok(Self::Pl(p))
    }

    pub fn wp(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Preset(format!("wp needs p >= 1, got {p}")));
        }
        Ok(Self::Wp(p))
    }

    pub fn custom(a: f64, entropy: EntropyFunction, cost: CostFunction) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Preset(format!("exponent a must lie in (0, 1], got {a}")));
        }
        Ok(Self::Custom { a, entropy, cost })
    }

    /// Rejects out-of-range parameters in a directly constructed value.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Hk | Self::Ghk | Self::Bl => Ok(self),
            Self::Qpl(p) => Self::qpl(p),
            Self::Lpl(p) => Self::lpl(p),
            Self::Pl(p) => Self::pl(p),
            Self::Wp(p) => Self::wp(p),
            Self::Custom { a, entropy, cost } => Self::custom(a, entropy, cost),
        }
    }

    pub fn a(&self) -> f64 {
        match *self {
            Self::Bl => 1.0,
            Self::Wp(p) => 1.0 / p,
            Self::Custom { a, .. } => a,
            _ => 0.5,
        }
    }

    pub fn entropy(&self) -> EntropyFunction {
        match *self {
            Self::Hk | Self::Ghk => EntropyFunction::Kl,
            Self::Qpl(p) | Self::Lpl(p) => EntropyFunction::PowerLike(p),
            Self::Pl(p) => EntropyFunction::power_family(p).unwrap_or(EntropyFunction::Kl),
            Self::Bl => EntropyFunction::TotalVariation,
            Self::Wp(_) => EntropyFunction::Indicator,
            Self::Custom { entropy, .. } => entropy,
        }
    }

    pub fn cost(&self) -> CostFunction {
        match *self {
            Self::Hk => CostFunction::HkLog,
            Self::Ghk | Self::Qpl(_) => CostFunction::Power(2.0),
            Self::Lpl(_) | Self::Bl => CostFunction::Linear,
            Self::Pl(_) => CostFunction::PureEntropyLimit,
            Self::Wp(p) => CostFunction::Power(p),
            Self::Custom { cost, .. } => cost,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Hk => "hk".into(),
            Self::Ghk => "ghk".into(),
            Self::Qpl(p) => format!("qpl:{p}"),
            Self::Lpl(p) => format!("lpl:{p}"),
            Self::Pl(p) => format!("pl:{p}"),
            Self::Bl => "bl".into(),
            Self::Wp(p) => format!("wp:{p}"),
            Self::Custom { a, entropy, cost } => format!("custom:a={a},f={entropy},l={cost}"),
        }
    }

    /// Parses the names produced by [`Preset::name`].
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let num = || -> Result<f64> {
            arg.ok_or_else(|| Error::Preset(format!("{name} needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Preset(format!("bad parameter in '{name}'")))
        };
        match (head, arg) {
            ("hk", None) => Ok(Self::Hk),
            ("ghk", None) => Ok(Self::Ghk),
            ("bl", None) => Ok(Self::Bl),
            ("qpl", _) => Self::qpl(num()?),
            ("lpl", _) => Self::lpl(num()?),
            ("pl", _) => Self::pl(num()?),
            ("wp", _) => Self::wp(num()?),
            ("custom", Some(spec)) => parse_custom(spec),
            _ => Err(Error::Preset(format!("unknown preset '{name}'"))),
        }
    }
}

fn parse_custom(spec: &str) -> Result<Preset> {
    let (mut a, mut f, mut l) = (None, None, None);
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Preset(format!("custom preset field '{part}' is not key=value")))?;
        match key.trim() {
            "a" => a = Some(value.trim().parse::<f64>().map_err(|_| Error::Preset(format!("bad exponent '{value}'")))?),
            "f" => f = Some(EntropyFunction::parse(value.trim()).map_err(|e| Error::Preset(e.to_string()))?),
            "l" => l = Some(CostFunction::parse(value.trim()).map_err(|e| Error::Preset(e.to_string()))?),
            other => return Err(Error::Preset(format!("unknown custom preset field '{other}'"))),
        }
    }
    match (a, f, l) {
        (Some(a), Some(f), Some(l)) => Preset::custom(a, f, l),
        _ => Err(Error::Preset("custom preset needs a=, f= and l=".into())),
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for Preset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A measure-level distance together with the plan realizing it.
#[derive(Debug, Clone)]
pub struct EtDistance {
    /// The ET cost raised to the preset exponent.
    pub value: ExtReal,
    pub preset: Preset,
    pub solution: EtSolution,
}

/// Distance between two measures on one space.
pub fn et_distance(
    dist: &DMatrix<f64>,
    mu1: &[f64],
    mu2: &[f64],
    preset: Preset,
    options: &EtOptions,
) -> Result<EtDistance> {
    let preset = preset.validated()?;
    let n = dist.nrows();
    if dist.ncols() != n || mu1.len() != n || mu2.len() != n {
        return Err(Error::Dimension(format!(
            "measures of lengths {} and {} on a {}x{} distance matrix",
            mu1.len(),
            mu2.len(),
            dist.nrows(),
            dist.ncols()
        )));
    }
    let problem = EtProblem::from_distances(dist, preset.cost(), mu1.to_vec(), mu2.to_vec(), preset.entropy())?;
    let solution = solve_et(&problem, options)?;
    let cost = match preset {
        Preset::Pl(_) => pure_entropy_cost(mu1, mu2, preset.entropy())?,
        _ => solution.value,
    };
    Ok(EtDistance { value: cost.powf(preset.a()), preset, solution })
}

/// [`et_distance`] for two mass vectors placed on `space`.
pub fn et_distance_on(
    space: &MetricMeasureSpace,
    mu1: &[f64],
    mu2: &[f64],
    preset: Preset,
    options: &EtOptions,
) -> Result<EtDistance> {
    et_distance(space.dist(), mu1, mu2, preset, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn pair(d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0])
    }

    #[test]
    fn names_round_trip() {
        for name in ["hk", "ghk", "qpl:2", "lpl:1.5", "pl:1", "bl", "wp:2", "custom:a=0.5,f=scaled-kl:10,l=pow:2"] {
            let p = Preset::parse(name).unwrap();
            assert_eq!(Preset::parse(&p.name()).unwrap(), p, "{name}");
        }
        let json = serde_json::to_string(&Preset::Qpl(1.5)).unwrap();
        assert_eq!(json, "\"qpl:1.5\"");
        assert_eq!(serde_json::from_str::<Preset>(&json).unwrap(), Preset::Qpl(1.5));
    }

    #[test]
    fn parameter_ranges() {
        assert!(Preset::parse("qpl:3").is_ok());
        assert!(Preset::parse("qpl:3.5").is_err());
        assert!(Preset::parse("qpl:1").is_err());
        assert!(Preset::parse("lpl:1").is_err());
        assert!(Preset::parse("wp:0.5").is_err());
        assert!(Preset::parse("custom:a=2,f=kl,l=lin").is_err());
        assert!(Preset::parse("nope").is_err());
        assert!(Preset::Qpl(4.0).validated().is_err());
    }

    #[test]
    fn hk_dirac_pair_at_quarter_period() {
        let d = et_distance(&pair(FRAC_PI_2), &[1.0, 0.0], &[0.0, 1.0], Preset::Hk, &EtOptions::default()).unwrap();
        assert!((d.value.value() - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn ghk_dirac_pair() {
        for d in [0.3, 1.0, 2.5] {
            let v = et_distance(&pair(d), &[1.0, 0.0], &[0.0, 1.0], Preset::Ghk, &EtOptions::default()).unwrap();
            let expected = 2.0 - 2.0 * (-d * d / 2.0).exp();
            assert!((v.value.value().powi(2) - expected).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn wasserstein_dirac_pair() {
        let v = et_distance(&pair(1.7), &[1.0, 0.0], &[0.0, 1.0], Preset::Wp(2.0), &EtOptions::default()).unwrap();
        assert!((v.value.value() - 1.7).abs() < 1e-12);
        let unequal = et_distance(&pair(1.7), &[1.0, 0.0], &[0.0, 2.0], Preset::Wp(2.0), &EtOptions::default()).unwrap();
        assert!(unequal.value.is_infinite());
    }

    #[test]
    fn pure_entropy_preset_ignores_transport() {
        let v = et_distance(&pair(0.1), &[4.0, 0.0], &[0.0, 1.0], Preset::Pl(1.0), &EtOptions::default()).unwrap();
        assert!((v.value.value() - 5f64.sqrt()).abs() < 1e-12);
        assert!((v.solution.value.value() - 5.0).abs() < 1e-9);
    }
}
