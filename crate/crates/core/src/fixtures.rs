//! Bundled spaces of one or two points, small enough for the grid oracle.

use crate::mmspace::MetricMeasureSpace;

/// `(name, space)` for the eight bundled fixtures. Three groups share a
/// total mass (1, 2 and 0.5 or 1.5), so balanced presets have finite
/// values inside each group.
pub fn tiny_spaces() -> Vec<(&'static str, MetricMeasureSpace)> {
    let one = |m: f64| MetricMeasureSpace::singleton(m).expect("valid fixture");
    let two = |d: f64, m: [f64; 2]| MetricMeasureSpace::two_point(d, m).expect("valid fixture");
    vec![
        ("dirac-1", one(1.0)),
        ("dirac-2", one(2.0)),
        ("dirac-0.5", one(0.5)),
        ("pair-1-even", two(1.0, [0.5, 0.5])),
        ("pair-0.8-skew", two(0.8, [0.25, 0.75])),
        ("pair-0.5", two(0.5, [0.5, 1.5])),
        ("pair-1.2", two(1.2, [1.2, 0.8])),
        ("pair-0.3", two(0.3, [1.0, 0.5])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_metric_and_small() {
        let all = tiny_spaces();
        assert_eq!(all.len(), 8);
        for (name, mm) in &all {
            assert!(mm.len() <= 2, "{name}");
            assert!(mm.validate_metric(1e-12).is_valid(), "{name}");
        }
    }
}
