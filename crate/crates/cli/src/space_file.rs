//! Space files: a distance matrix or Euclidean points, plus masses.

use std::path::Path;

use etdist_core::MetricMeasureSpace;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest violation of the metric axioms accepted on load.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixForm {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub dist: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsForm {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub points: Vec<Vec<f64>>,
    pub metric: Metric,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceFile {
    Matrix(MatrixForm),
    Points(PointsForm),
}

impl SpaceFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!(
                "not a space file ({e}); expected {{\"dist\", \"mass\"}} or {{\"points\", \"metric\", \"mass\"}}"
            ))
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    /// Builds the space and checks the metric axioms.
    pub fn to_space(&self) -> Result<MetricMeasureSpace, CliError> {
        let (space, labels) = match self {
            SpaceFile::Matrix(MatrixForm { labels, dist, mass }) => (MetricMeasureSpace::from_rows(dist, mass.clone())?, labels),
            SpaceFile::Points(PointsForm { labels, points, metric: Metric::Euclidean, mass }) => {
                if points.len() != mass.len() {
                    return Err(CliError::Validation(format!("{} points but {} masses", points.len(), mass.len())));
                }
                (MetricMeasureSpace::from_points(points, mass.clone())?, labels)
            }
        };
        let space = match labels {
            Some(l) => space.with_labels(l.clone())?,
            None => space,
        };
        let report = space.validate_metric(METRIC_TOL);
        if !report.is_valid() {
            return Err(CliError::Validation(format!(
                "distances are not a metric: worst violation {:.3e} ({} entries)",
                report.max_violation(),
                report.violations.len()
            )));
        }
        Ok(space)
    }
}

pub fn load(path: &Path) -> Result<MetricMeasureSpace, CliError> {
    SpaceFile::read(path)?.to_space().map_err(|e| e.context(&path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    #[test]
    fn both_forms_parse() {
        let m = SpaceFile::parse(r#"{"labels": ["a", "b"], "dist": [[0, 1.5], [1.5, 0]], "mass": [1, 2]}"#).unwrap();
        let s = m.to_space().unwrap();
        assert_eq!(s.dist()[(0, 1)], 1.5);
        assert_eq!(s.labels().unwrap(), ["a", "b"]);
        let p = SpaceFile::parse(r#"{"points": [[0, 0], [3, 4]], "metric": "euclidean", "mass": [1, 1]}"#).unwrap();
        assert_eq!(p.to_space().unwrap().dist()[(1, 0)], 5.0);
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            r#"{"dist": [[0, 1], [1, 0]]}"#,
            r#"{"dist": [[0, 1], [1, 0]], "mass": [1, 1], "extra": 1}"#,
            r#"{"points": [[0]], "metric": "manhattan", "mass": [1]}"#,
            "[1, 2]",
        ] {
            assert!(matches!(SpaceFile::parse(bad), Err(CliError::Validation(_))), "{bad}");
        }
        for bad in [
            r#"{"dist": [[0, 1], [2, 0]], "mass": [1, 1]}"#,
            r#"{"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "mass": [1, 1, 1]}"#,
            r#"{"dist": [[0, 1], [1, 0]], "mass": [1, -1]}"#,
            r#"{"dist": [[0, 1], [1, 0]], "mass": [1]}"#,
            r#"{"labels": ["a"], "dist": [[0, 1], [1, 0]], "mass": [1, 1]}"#,
            r#"{"points": [[0], [1]], "metric": "euclidean", "mass": [1]}"#,
        ] {
            let f = SpaceFile::parse(bad).unwrap();
            assert!(matches!(f.to_space(), Err(CliError::Validation(_))), "{bad}");
        }
    }

    #[test]
    fn serialization_round_trips_bit_for_bit() {
        let f = SpaceFile::Points(PointsForm {
            labels: None,
            points: vec![vec![0.1, 1.0 / 3.0], vec![2f64.sqrt(), -7.25e-9]],
            metric: Metric::Euclidean,
            mass: vec![0.7, 1e-3],
        });
        let text = json::to_string(&f);
        assert_eq!(SpaceFile::parse(&text).unwrap(), f);
        let g = SpaceFile::Matrix(MatrixForm { labels: Some(vec!["x".into()]), dist: vec![vec![0.0]], mass: vec![std::f64::consts::PI] });
        assert_eq!(SpaceFile::parse(&json::to_string(&g)).unwrap(), g);
    }
}
