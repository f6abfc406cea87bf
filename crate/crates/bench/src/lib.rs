//! Shared fixtures for the criterion benchmarks.

use lowreg_core::{builtin_metric, test_curve, Curve, MetricField};

/// A built-in metric and test curve pair, by name.
pub fn fixture(metric: &str, curve: &str) -> (MetricField, Curve) {
    let field = builtin_metric(metric).expect("built-in metric");
    let curve = test_curve(curve).expect("test curve");
    (field, curve)
}
