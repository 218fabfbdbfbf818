//! Result records and their round-trip check.

use etdist_core::et::{Breakdown, EtProblem};
use etdist_core::sturm::{SturmProblem, SturmSolution};
use etdist_core::{EtDistance, MetricMeasureSpace, Preset};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::json::Ext;

/// Relative agreement required between a record's value and the objective
/// re-evaluated from its plan.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Two measures on one space.
    Measure,
    /// Two metric measure spaces.
    Sturm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub transport: Ext,
    pub divergence1: Ext,
    pub divergence2: Ext,
    pub total: Ext,
}

impl From<&Breakdown> for BreakdownRecord {
    fn from(b: &Breakdown) -> Self {
        Self {
            transport: Ext(b.transport.value()),
            divergence1: Ext(b.divergence1.value()),
            divergence2: Ext(b.divergence2.value()),
            total: Ext(b.total().value()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub value: Ext,
    pub preset: String,
    pub a: f64,
    pub mode: Mode,
    pub gamma: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_dist: Option<Vec<Vec<f64>>>,
    pub breakdown: BreakdownRecord,
    pub diagnostics: serde_json::Value,
    pub version: String,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], shape: (usize, usize), what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(CliError::Validation(format!("{what} must be {}x{}", shape.0, shape.1)));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

impl ResultRecord {
    pub fn measure(d: &EtDistance) -> Self {
        Self {
            value: Ext(d.value.value()),
            preset: d.preset.name(),
            a: d.preset.a(),
            mode: Mode::Measure,
            gamma: rows(d.solution.gamma.gamma()),
            cross_dist: None,
            breakdown: (&d.solution.breakdown).into(),
            diagnostics: serde_json::to_value(&d.solution.diagnostics).expect("diagnostics serialize"),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn sturm(s: &SturmSolution) -> Self {
        let mut diagnostics = serde_json::to_value(&s.diagnostics).expect("diagnostics serialize");
        diagnostics["seeds_tried"] = s.seeds_tried.into();
        Self {
            value: Ext(s.value.value()),
            preset: s.preset.name(),
            a: s.preset.a(),
            mode: Mode::Sturm,
            gamma: rows(s.gamma.gamma()),
            cross_dist: Some(rows(s.cross.matrix())),
            breakdown: (&s.breakdown).into(),
            diagnostics,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// `objective(gamma [, cross_dist])^a`, recomputed from the record.
    pub fn reevaluate(&self, a: &MetricMeasureSpace, b: &MetricMeasureSpace) -> Result<f64, CliError> {
        let preset = Preset::parse(&self.preset)?;
        let gamma = matrix(&self.gamma, (a.len(), b.len()), "gamma")?;
        let breakdown = match self.mode {
            Mode::Measure => {
                EtProblem::from_distances(a.dist(), preset.cost(), a.mass().to_vec(), b.mass().to_vec(), preset.entropy())?
                    .evaluate(&gamma)
            }
            Mode::Sturm => {
                let cross = self
                    .cross_dist
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("a sturm record needs cross_dist".into()))?;
                let cross = matrix(cross, (a.len(), b.len()), "cross_dist")?;
                SturmProblem::new(a.clone(), b.clone(), preset)?.evaluate(&gamma, &cross)?
            }
        };
        Ok(breakdown.total().powf(preset.a()).value())
    }

    /// Serializes, parses back and re-evaluates; fails when the value is
    /// not reproduced.
    pub fn verify(&self, a: &MetricMeasureSpace, b: &MetricMeasureSpace) -> Result<(), CliError> {
        let text = crate::json::to_string(self);
        let back: ResultRecord =
            serde_json::from_str(&text).map_err(|e| CliError::Solver(format!("record does not parse back: {e}")))?;
        if back != *self {
            return Err(CliError::Solver("record changed in a serialize/parse round trip".into()));
        }
        let again = back.reevaluate(a, b)?;
        let value = back.value.0;
        let agree = if value.is_infinite() || again.is_infinite() {
            value == again
        } else {
            (again - value).abs() <= VERIFY_TOL * value.abs().max(again.abs()) + 1e-12
        };
        if !agree {
            return Err(CliError::Solver(format!("re-evaluated objective {again} does not reproduce value {value}")));
        }
        Ok(())
    }
}

