//! Finite metric measure spaces, transport plans and cross-distance blocks of
//! pseudo-metric couplings.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default absolute tolerance for metric and coupling validation.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// A finite metric measure space `(X, d, mu)`.
///
/// Zero-mass points are kept; [`MetricMeasureSpace::support`] computes the
/// positive-mass indices on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    dist: DMatrix<f64>,
    mass: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl MetricMeasureSpace {
    /// Builds a space after structural checks (shape, finiteness, nonnegative
    /// mass). Metric axioms are checked separately by
    /// [`MetricMeasureSpace::validate_metric`].
    pub fn new(dist: DMatrix<f64>, mass: Vec<f64>) -> Result<Self> {
        if dist.nrows() != dist.ncols() {
            return Err(Error::Dimension(format!(
                "distance matrix is {}x{}, expected square",
                dist.nrows(),
                dist.ncols()
            )));
        }
        if dist.nrows() != mass.len() {
            return Err(Error::Dimension(format!(
                "distance matrix has {} points but mass vector has {} entries",
                dist.nrows(),
                mass.len()
            )));
        }
        if dist.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("distance entries must be finite".into()));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::Domain(format!("mass[{i}] = {m} is not a nonnegative real")));
            }
        }
        Ok(Self { dist, mass, labels: None })
    }

    pub fn from_rows(dist: &[Vec<f64>], mass: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        if dist.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("distance rows have unequal lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| dist[i][j]), mass)
    }

    /// Euclidean distances between the given points.
    pub fn from_points(points: &[Vec<f64>], mass: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("points have unequal dimensions".into()));
        }
        let n = points.len();
        let dist = DMatrix::from_fn(n, n, |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        });
        Self::new(dist, mass)
    }

    /// A one-point space carrying mass `m`.
    pub fn singleton(m: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(1, 1), vec![m])
    }

    /// A two-point space at distance `d` with masses `m`.
    pub fn two_point(d: f64, m: [f64; 2]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]), m.to_vec())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mass[i] > 0.0).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Same metric, masses multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::new(self.dist.clone(), self.mass.iter().map(|m| m * factor).collect())?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Same metric with a replacement mass vector.
    pub fn with_mass(&self, mass: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.dist.clone(), mass)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Relabels points: new point `k` is old point `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Domain("not a permutation".into()));
        }
        let dist = DMatrix::from_fn(n, n, |i, j| self.dist[(perm[i], perm[j])]);
        let mass = perm.iter().map(|&p| self.mass[p]).collect();
        let mut out = Self::new(dist, mass)?;
        out.labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        Ok(out)
    }

    /// Checks symmetry, zero diagonal, nonnegativity and every triangle
    /// inequality. Violations above `tol` are reported.
    pub fn validate_metric(&self, tol: f64) -> ValidationReport {
        let n = self.len();
        let d = &self.dist;
        let mut report = ValidationReport::default();
        for i in 0..n {
            report.check(Violation::Diagonal { i }, d[(i, i)].abs(), tol);
            for j in 0..n {
                report.check(Violation::Negative { i, j }, -d[(i, j)], tol);
                if i < j {
                    report.check(Violation::Symmetry { i, j }, (d[(i, j)] - d[(j, i)]).abs(), tol);
                }
            }
        }
        for i in 0..n {
            for k in (i + 1)..n {
                for j in 0..n {
                    if j == i || j == k {
                        continue;
                    }
                    let excess = d[(i, k)] - d[(i, j)] - d[(j, k)];
                    report.check(Violation::Triangle { i, j, k }, excess, tol);
                }
            }
        }
        report
    }
}

/// A single violated constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    Diagonal { i: usize },
    Negative { i: usize, j: usize },
    Symmetry { i: usize, j: usize },
    /// `d[i][k] > d[i][j] + d[j][k]`.
    Triangle { i: usize, j: usize, k: usize },
    /// `D[i][j] > d1[i][i2] + D[i2][j]`.
    CrossRowShift { i: usize, i2: usize, j: usize },
    /// `D[i][j] > D[i][j2] + d2[j2][j]`.
    CrossColShift { i: usize, j: usize, j2: usize },
    /// `d1[i][i2] > D[i][j] + D[i2][j]`.
    CrossRowSpan { i: usize, i2: usize, j: usize },
    /// `d2[j][j2] > D[i][j] + D[i][j2]`.
    CrossColSpan { i: usize, j: usize, j2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationEntry {
    pub violation: Violation,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<ViolationEntry>,
}

impl ValidationReport {
    fn check(&mut self, violation: Violation, magnitude: f64, tol: f64) {
        if magnitude > tol {
            self.violations.push(ViolationEntry { violation, magnitude });
        }
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max)
    }
}

/// A nonnegative transport plan on `X1 x X2` without marginal constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    gamma: DMatrix<f64>,
}

impl Coupling {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        for i in 0..gamma.nrows() {
            for j in 0..gamma.ncols() {
                let v = gamma[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
            }
        }
        Ok(Self { gamma })
    }

    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self { gamma: DMatrix::zeros(n1, n2) }
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.gamma
    }

    pub fn total_mass(&self) -> f64 {
        self.gamma.sum()
    }

    /// Row sums and column sums.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        marginals(&self.gamma)
    }
}

/// Row sums and column sums of a plan matrix.
pub fn marginals(gamma: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let rows = (0..gamma.nrows()).map(|i| gamma.row(i).sum()).collect();
    let cols = (0..gamma.ncols()).map(|j| gamma.column(j).sum()).collect();
    (rows, cols)
}

/// The `X1 x X2` block of a pseudo-metric on the disjoint union `X1 ⊔ X2`
/// that restricts to `d1` and `d2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDistanceMatrix {
    cross: DMatrix<f64>,
}

impl CrossDistanceMatrix {
    pub fn new(cross: DMatrix<f64>) -> Result<Self> {
        for i in 0..cross.nrows() {
            for j in 0..cross.ncols() {
                let v = cross[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
            }
        }
        Ok(Self { cross })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.cross
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cross[(i, j)]
    }

    /// Checks the four families of triangle inequalities with one crossing.
    pub fn validate(&self, d1: &DMatrix<f64>, d2: &DMatrix<f64>, tol: f64) -> Result<ValidationReport> {
        let (n1, n2) = self.cross.shape();
        if d1.shape() != (n1, n1) || d2.shape() != (n2, n2) {
            return Err(Error::Dimension(format!(
                "cross block {n1}x{n2} does not match spaces of sizes {} and {}",
                d1.nrows(),
                d2.nrows()
            )));
        }
        let c = &self.cross;
        let mut report = ValidationReport::default();
        for j in 0..n2 {
            for i in 0..n1 {
                for i2 in 0..n1 {
                    if i2 == i {
                        continue;
                    }
                    report.check(
                        Violation::CrossRowShift { i, i2, j },
                        c[(i, j)] - d1[(i, i2)] - c[(i2, j)],
                        tol,
                    );
                    if i < i2 {
                        report.check(
                            Violation::CrossRowSpan { i, i2, j },
                            d1[(i, i2)] - c[(i, j)] - c[(i2, j)],
                            tol,
                        );
                    }
                }
            }
        }
        for i in 0..n1 {
            for j in 0..n2 {
                for j2 in 0..n2 {
                    if j2 == j {
                        continue;
                    }
                    report.check(
                        Violation::CrossColShift { i, j, j2 },
                        c[(i, j)] - c[(i, j2)] - d2[(j2, j)],
                        tol,
                    );
                    if j < j2 {
                        report.check(
                            Violation::CrossColSpan { i, j, j2 },
                            d2[(j, j2)] - c[(i, j)] - c[(i, j2)],
                            tol,
                        );
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Gluing at a pair of basepoints: `D[i][j] = d1(i, b1) + c + d2(b2, j) + delta`.
pub fn canonical_coupling(
    mm1: &MetricMeasureSpace,
    mm2: &MetricMeasureSpace,
    basepoint1: usize,
    basepoint2: usize,
    c: f64,
    delta: f64,
) -> Result<CrossDistanceMatrix> {
    if basepoint1 >= mm1.len() || basepoint2 >= mm2.len() {
        return Err(Error::Domain(format!(
            "basepoints ({basepoint1}, {basepoint2}) out of range for sizes ({}, {})",
            mm1.len(),
            mm2.len()
        )));
    }
    if !(c >= 0.0) || !(delta >= 0.0) {
        return Err(Error::Domain("offsets c and delta must be nonnegative".into()));
    }
    let (d1, d2) = (mm1.dist(), mm2.dist());
    CrossDistanceMatrix::new(DMatrix::from_fn(mm1.len(), mm2.len(), |i, j| {
        d1[(i, basepoint1)] + c + d2[(basepoint2, j)] + delta
    }))
}

/// Distortion of a relation: `max |d1(i, i') - d2(j, j')|` over related pairs.
pub fn distortion(d1: &DMatrix<f64>, d2: &DMatrix<f64>, relation: &[(usize, usize)]) -> f64 {
    let mut dis: f64 = 0.0;
    for &(i, j) in relation {
        for &(i2, j2) in relation {
            dis = dis.max((d1[(i, i2)] - d2[(j, j2)]).abs());
        }
    }
    dis
}

/// Coupling induced by a nonempty relation `R`:
/// `D[x][y] = min_{(i,j) in R} d1(x, i) + eta + d2(j, y)`.
///
/// Valid whenever `eta >= dis(R) / 2`; `eta = None` uses exactly half the
/// distortion.
pub fn relation_coupling(
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    relation: &[(usize, usize)],
    eta: Option<f64>,
) -> Result<CrossDistanceMatrix> {
    if relation.is_empty() {
        return Err(Error::Domain("relation must be nonempty".into()));
    }
    let (n1, n2) = (d1.nrows(), d2.nrows());
    if relation.iter().any(|&(i, j)| i >= n1 || j >= n2) {
        return Err(Error::Domain("relation index out of range".into()));
    }
    let half_dis = 0.5 * distortion(d1, d2, relation);
    let eta = eta.unwrap_or(half_dis);
    if eta < half_dis {
        return Err(Error::Domain(format!("eta {eta} below half distortion {half_dis}")));
    }
    CrossDistanceMatrix::new(DMatrix::from_fn(n1, n2, |x, y| {
        relation
            .iter()
            .map(|&(i, j)| d1[(x, i)] + eta + d2[(j, y)])
            .fold(f64::INFINITY, f64::min)
    }))
}
