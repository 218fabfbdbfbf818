//! Entropy functions `F`, cost profiles `l`, and the quantities derived from
//! them: Csiszar divergences, perspective and reverse entropies, and the
//! marginal perspective function `H_c(r, t)`.
//!
//! Every entropy in the catalog is convex, lower semicontinuous, and
//! vanishes at `s = 1`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{ext_mul, ExtReal};

/// Relative slack accepted by the indicator entropy around `s = 1`.
pub const INDICATOR_TOL: f64 = 1e-9;

/// Catalog of admissible entropy functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "kebab-case")]
pub enum EntropyFunction {
    /// `U_1(s) = s log s - s + 1`.
    Kl,
    /// `U_p(s) = (s^p - p(s - 1) - 1) / (p(p - 1))`, `p > 1`.
    PowerLike(f64),
    /// `|s - 1|`.
    TotalVariation,
    /// `0` at `s = 1`, `+inf` elsewhere.
    Indicator,
    /// `n * U_1`.
    ScaledKl(f64),
    /// `|s - 1|` on `[0, n]`, `(s - 1)^2 / (n - 1)` beyond.
    PiccoliRossiReg(f64),
}

impl EntropyFunction {
    pub fn power_like(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("power-like entropy needs p > 1, got {p}")));
        }
        Ok(Self::PowerLike(p))
    }

    pub fn scaled_kl(n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain(format!("scaled KL needs n > 0, got {n}")));
        }
        Ok(Self::ScaledKl(n))
    }

    pub fn piccoli_rossi(n: f64) -> Result<Self> {
        if !(n > 1.0) || !n.is_finite() {
            return Err(Error::Domain(format!("regularized TV needs n > 1, got {n}")));
        }
        Ok(Self::PiccoliRossiReg(n))
    }

    /// `U_p` for `p >= 1`, with `U_1` the KL entropy.
    pub fn power_family(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Self::Kl)
        } else {
            Self::power_like(p)
        }
    }

    /// Parses catalog names: `kl`, `power:p`, `tv`, `indicator`,
    /// `scaled-kl:n`, `pr-reg:n`.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, arg) = split_param(name);
        let num = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::Preset(format!("{what} needs a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::Preset(format!("bad parameter in {name}")))
        };
        match (head, arg) {
            ("kl", None) => Ok(Self::Kl),
            ("tv", None) => Ok(Self::TotalVariation),
            ("indicator", None) => Ok(Self::Indicator),
            ("power", _) => Self::power_like(num("power")?),
            ("scaled-kl", _) => Self::scaled_kl(num("scaled-kl")?),
            ("pr-reg", _) => Self::piccoli_rossi(num("pr-reg")?),
            _ => Err(Error::Preset(format!("unknown entropy '{name}'"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Kl => "kl".into(),
            Self::PowerLike(p) => format!("power:{p}"),
            Self::TotalVariation => "tv".into(),
            Self::Indicator => "indicator".into(),
            Self::ScaledKl(n) => format!("scaled-kl:{n}"),
            Self::PiccoliRossiReg(n) => format!("pr-reg:{n}"),
        }
    }

    /// `F(s)` without domain checks; `+inf` is encoded as `f64::INFINITY`.
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Self::Kl => kl(s),
            Self::ScaledKl(n) => n * kl(s),
            Self::PowerLike(p) => (s.powf(p) - p * (s - 1.0) - 1.0) / (p * (p - 1.0)),
            Self::TotalVariation => (s - 1.0).abs(),
            Self::Indicator => {
                if (s - 1.0).abs() <= INDICATOR_TOL {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::PiccoliRossiReg(n) => {
                if s <= n {
                    (s - 1.0).abs()
                } else {
                    (s - 1.0) * (s - 1.0) / (n - 1.0)
                }
            }
        }
    }

    /// `F(s)` for `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<ExtReal> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("entropy evaluated at negative argument {s}")));
        }
        Ok(ExtReal::new(self.value(s)))
    }

    /// Recession constant `lim F(s)/s` as `s -> inf`.
    pub fn recession(&self) -> f64 {
        match self {
            Self::TotalVariation => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// `F(0)`.
    pub fn at_zero(&self) -> f64 {
        match *self {
            Self::Kl | Self::TotalVariation | Self::PiccoliRossiReg(_) => 1.0,
            Self::ScaledKl(n) => n,
            Self::PowerLike(p) => 1.0 / p,
            Self::Indicator => f64::INFINITY,
        }
    }

    pub fn is_superlinear(&self) -> bool {
        self.recession().is_infinite()
    }

    /// Twice differentiable on `(0, inf)`; these kinds go through the
    /// smooth solvers.
    pub fn is_smooth(&self) -> bool {
        matches!(self, Self::Kl | Self::ScaledKl(_) | Self::PowerLike(_))
    }

    /// Points where `F` is not differentiable.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            Self::TotalVariation => vec![1.0],
            Self::PiccoliRossiReg(n) => vec![1.0, n],
            _ => Vec::new(),
        }
    }

    /// Multiplier `n` when `F = n * U_1`.
    pub fn kl_weight(&self) -> Option<f64> {
        match *self {
            Self::Kl => Some(1.0),
            Self::ScaledKl(n) => Some(n),
            _ => None,
        }
    }

    /// `F'(s)` for smooth kinds and `s > 0`.
    pub fn derivative(&self, s: f64) -> Option<f64> {
        match *self {
            Self::Kl => Some(s.ln()),
            Self::ScaledKl(n) => Some(n * s.ln()),
            Self::PowerLike(p) => Some((s.powf(p - 1.0) - 1.0) / (p - 1.0)),
            _ => None,
        }
    }

    /// `F''(s)` for smooth kinds and `s > 0`.
    pub fn second_derivative(&self, s: f64) -> Option<f64> {
        match *self {
            Self::Kl => Some(1.0 / s),
            Self::ScaledKl(n) => Some(n / s),
            Self::PowerLike(p) => Some(s.powf(p - 2.0)),
            _ => None,
        }
    }

    /// Perspective `t F(r/t)`, extended by `F'_inf r` at `t = 0`, as `f64`.
    pub fn perspective_f64(&self, r: f64, t: f64) -> f64 {
        if t > 0.0 {
            if r == 0.0 {
                t * self.at_zero()
            } else {
                t * self.value(r / t)
            }
        } else {
            ext_mul(self.recession(), r)
        }
    }

    /// Perspective function `F^(r, t)`; in particular `F^(0, 0) = 0`.
    pub fn perspective(&self, r: f64, t: f64) -> Result<ExtReal> {
        check_nonneg(&[r, t])?;
        Ok(ExtReal::new(self.perspective_f64(r, t)))
    }

    /// Reverse entropy `R(t) = F^(1, t)`.
    pub fn reverse_entropy(&self, t: f64) -> Result<ExtReal> {
        self.perspective(1.0, t)
    }

    /// Discrete Csiszar divergence `D_F(gamma || mu)`.
    pub fn divergence(&self, gamma: &[f64], mu: &[f64]) -> Result<ExtReal> {
        if gamma.len() != mu.len() {
            return Err(Error::Dimension(format!(
                "divergence of vectors with lengths {} and {}",
                gamma.len(),
                mu.len()
            )));
        }
        check_nonneg(gamma)?;
        check_nonneg(mu)?;
        Ok(ExtReal::new(self.divergence_f64(gamma, mu)))
    }

    pub(crate) fn divergence_f64(&self, gamma: &[f64], mu: &[f64]) -> f64 {
        gamma.iter().zip(mu).map(|(&g, &m)| self.perspective_f64(g, m)).sum()
    }

    /// Constant `C` with `F(s) <= C |s - 1|` on `[1/N, N]`, taken from the
    /// chords of `F` through `s = 1`.
    pub fn tv_bound_constant(&self, big_n: f64) -> Result<f64> {
        if !(big_n > 1.0) {
            return Err(Error::Domain(format!("N must exceed 1, got {big_n}")));
        }
        let lo = 1.0 / big_n;
        Ok((self.value(lo) / (1.0 - lo)).max(self.value(big_n) / (big_n - 1.0)))
    }

    /// Marginal perspective function `H_c(r, t)`.
    ///
    /// Uses a closed form when one exists and falls back to the numeric
    /// minimization over `theta` otherwise.
    pub fn marginal_perspective(&self, c: ExtReal, r: f64, t: f64) -> Result<MarginalPerspectiveValue> {
        check_nonneg(&[c.value(), r, t])?;
        Ok(self
            .marginal_perspective_closed_form(c, r, t)
            .unwrap_or_else(|| self.marginal_perspective_numeric_unchecked(c, r, t)))
    }

    /// Closed-form `H_c(r, t)`, if the catalog has one for this `(F, c)`.
    pub fn marginal_perspective_closed_form(&self, c: ExtReal, r: f64, t: f64) -> Option<MarginalPerspectiveValue> {
        if r == 0.0 && t == 0.0 {
            return Some(MarginalPerspectiveValue::new(0.0, Some(0.0)));
        }
        if c.is_infinite() {
            return Some(MarginalPerspectiveValue::new(ext_mul(self.at_zero(), r + t), Some(0.0)));
        }
        let c = c.value();
        match *self {
            Self::Kl | Self::ScaledKl(_) => {
                let n = self.kl_weight().unwrap_or(1.0);
                let theta = (r * t).sqrt() * (-c / (2.0 * n)).exp();
                Some(MarginalPerspectiveValue::new(n * (r + t - 2.0 * theta), Some(theta)))
            }
            Self::PowerLike(p) if c == 0.0 => {
                if r == 0.0 || t == 0.0 {
                    return Some(MarginalPerspectiveValue::new((r + t) / p, Some(0.0)));
                }
                if r == t {
                    return Some(MarginalPerspectiveValue::new(0.0, Some(r)));
                }
                let harmonic = (r.powf(1.0 - p) + t.powf(1.0 - p)).powf(1.0 / (1.0 - p));
                let value = (r + t - 2f64.powf(p / (p - 1.0)) * harmonic) / p;
                let theta = (2.0 / (r.powf(1.0 - p) + t.powf(1.0 - p))).powf(1.0 / (p - 1.0));
                Some(MarginalPerspectiveValue::new(value.max(0.0), Some(theta)))
            }
            Self::Indicator => {
                let value = if (r - t).abs() <= INDICATOR_TOL * r.max(t) { r.max(t) * c } else { f64::INFINITY };
                Some(MarginalPerspectiveValue::new(value, Some(r.max(t))))
            }
            _ => None,
        }
    }

    /// Numeric `H_c(r, t)`: golden-section search on `log theta`, refined by
    /// bisection on the derivative for smooth kinds, compared against the
    /// `theta -> 0` boundary value `F(0)(r + t)`.
    pub fn marginal_perspective_numeric(&self, c: ExtReal, r: f64, t: f64) -> Result<MarginalPerspectiveValue> {
        check_nonneg(&[c.value(), r, t])?;
        Ok(self.marginal_perspective_numeric_unchecked(c, r, t))
    }

    fn marginal_perspective_numeric_unchecked(&self, c: ExtReal, r: f64, t: f64) -> MarginalPerspectiveValue {
        let boundary = ext_mul(self.at_zero(), r + t);
        if (r == 0.0 && t == 0.0) || c.is_infinite() {
            return MarginalPerspectiveValue::new(boundary, Some(0.0));
        }
        let c = c.value();
        let g = |theta: f64| self.perspective_f64(theta, r) + self.perspective_f64(theta, t) + theta * c;

        let lo = THETA_MIN.ln();
        let hi = (THETA_SPAN * r.max(t).max(1.0)).ln();
        let (mut u, mut best) = golden_section(|u| g(u.exp()), lo, hi, GOLDEN_TOL);

        // Piecewise-linear kinds attain their minimum at a kink.
        for s in self.kinks() {
            for theta in [s * r, s * t] {
                if theta > 0.0 {
                    let v = g(theta);
                    if v < best {
                        best = v;
                        u = theta.ln();
                    }
                }
            }
        }

        if self.is_smooth() && r > 0.0 && t > 0.0 {
            let dg = |theta: f64| {
                self.derivative(theta / r).unwrap_or(0.0) + self.derivative(theta / t).unwrap_or(0.0) + c
            };
            if let Some(theta) = bisect_increasing(dg, lo, hi) {
                let v = g(theta);
                if v <= best {
                    best = v;
                    u = theta.ln();
                }
            }
        }

        if boundary <= best {
            MarginalPerspectiveValue::new(boundary, Some(0.0))
        } else {
            MarginalPerspectiveValue::new(best, Some(u.exp()))
        }
    }
}

impl fmt::Display for EntropyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

const THETA_MIN: f64 = 1e-12;
const THETA_SPAN: f64 = 1e6;
const GOLDEN_TOL: f64 = 1e-10;

fn kl(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        s * s.ln() - s + 1.0
    }
}

fn check_nonneg(xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !(**x >= 0.0)) {
        Some(x) => Err(Error::Domain(format!("expected a nonnegative argument, got {x}"))),
        None => Ok(()),
    }
}

fn split_param(name: &str) -> (&str, Option<&str>) {
    match name.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (name.trim(), None),
    }
}

/// Minimizes a unimodal function on `[a, b]`; returns `(argmin, min)`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a) > tol * (1.0 + a.abs().max(b.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Root of a nondecreasing function of `theta`, searched over
/// `log theta in [lo, hi]`. `None` when there is no sign change.
fn bisect_increasing(df: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo.exp(), hi.exp());
    if df(a) >= 0.0 || df(b) <= 0.0 {
        return None;
    }
    for _ in 0..400 {
        let m = if b / a > 4.0 { (a * b).sqrt() } else { 0.5 * (a + b) };
        if m <= a || m >= b {
            break;
        }
        if df(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Value of `H_c(r, t)` together with the optimal `theta` when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalPerspectiveValue {
    pub value: ExtReal,
    pub argmin_theta: Option<f64>,
}

impl MarginalPerspectiveValue {
    fn new(value: f64, argmin_theta: Option<f64>) -> Self {
        Self { value: ExtReal::new(value), argmin_theta }
    }
}

/// Cost profiles `l(d)` applied to distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "kebab-case")]
pub enum CostFunction {
    /// `-log(cos^2 d)` for `d < pi/2`, `+inf` otherwise.
    HkLog,
    /// `d^p`, `p >= 1`.
    Power(f64),
    /// `d`.
    Linear,
    /// `n d`.
    Scaled(f64),
    /// `0` at `d = 0`, `+inf` elsewhere.
    PureEntropyLimit,
}

impl CostFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("power cost needs p >= 1, got {p}")));
        }
        Ok(Self::Power(p))
    }

    pub fn scaled(n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain(format!("scaled cost needs n > 0, got {n}")));
        }
        Ok(Self::Scaled(n))
    }

    /// Parses `hk`, `pow:p`, `lin`, `scaled:n`, `pure`.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, arg) = split_param(name);
        let num = || -> Result<f64> {
            arg.ok_or_else(|| Error::Preset(format!("{name} needs a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::Preset(format!("bad parameter in {name}")))
        };
        match (head, arg) {
            ("hk", None) => Ok(Self::HkLog),
            ("lin", None) => Ok(Self::Linear),
            ("pure", None) => Ok(Self::PureEntropyLimit),
            ("pow", _) => Self::power(num()?),
            ("scaled", _) => Self::scaled(num()?),
            _ => Err(Error::Preset(format!("unknown cost '{name}'"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::HkLog => "hk".into(),
            Self::Power(p) => format!("pow:{p}"),
            Self::Linear => "lin".into(),
            Self::Scaled(n) => format!("scaled:{n}"),
            Self::PureEntropyLimit => "pure".into(),
        }
    }

    /// `l(d)` as `f64` (`+inf` allowed).
    pub fn value(&self, d: f64) -> f64 {
        match *self {
            Self::HkLog => {
                if d < FRAC_PI_2 {
                    -2.0 * d.cos().ln()
                } else {
                    f64::INFINITY
                }
            }
            Self::Power(p) => d.powf(p),
            Self::Linear => d,
            Self::Scaled(n) => n * d,
            Self::PureEntropyLimit => {
                if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn eval(&self, d: f64) -> Result<ExtReal> {
        if !(d >= 0.0) {
            return Err(Error::Domain(format!("cost evaluated at negative distance {d}")));
        }
        Ok(ExtReal::new(self.value(d)))
    }

    /// Supremum of the distances with finite cost.
    pub fn finite_radius(&self) -> f64 {
        match self {
            Self::HkLog => FRAC_PI_2,
            Self::PureEntropyLimit => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// `l'(d)` (right derivative at 0) inside the finite radius.
    pub fn derivative(&self, d: f64) -> f64 {
        match *self {
            Self::HkLog => 2.0 * d.tan(),
            Self::Power(p) if p == 1.0 => 1.0,
            Self::Power(p) => p * d.powf(p - 1.0),
            Self::Linear => 1.0,
            Self::Scaled(n) => n,
            Self::PureEntropyLimit => 0.0,
        }
    }

    /// Slope when `l` is linear.
    pub fn linear_slope(&self) -> Option<f64> {
        match *self {
            Self::Linear => Some(1.0),
            Self::Scaled(n) => Some(n),
            Self::Power(p) if p == 1.0 => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
