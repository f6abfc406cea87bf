//! Length structures of continuous Riemannian metrics on box domains.
//!
//! The crate computes arc length, induced (chord-sum) length, intrinsic
//! distance, metric derivatives and the variational distance between
//! curves, together with mollification of metrics and the piecewise-smooth
//! approximation of absolutely continuous curves.

pub mod approx;
pub mod curve;
pub mod error;
pub mod expr;
pub mod length;
pub mod linalg;
pub mod metric;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod solver;
pub mod suites;

pub use approx::{
    derivative_equality_report, metric_derivative, mollified_distance_check, mollify_metric,
    mollify_with_width, smooth_approximation, DerivativeEqualityReport, MetricDerivative,
    MetricDerivativeConfig, MollifiedDistanceReport, MollifiedMetric, MollifyConfig, SmoothApproxResult,
};
pub use curve::{cantor_value, Curve, CurveKind, CurveMap, CurveSpec, CurveSpecKind, Partition};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr, Vars};
pub use length::{
    arc_length, induced_length, induced_length_profile, metric_arc_length, variational_distance,
    LengthResult, RefinementConfig, RefinementLevel, VariationalDistance,
};
pub use linalg::Mat;
pub use metric::{
    build_metric, comparison_bounds, metric_norm, pointwise_factor_pair, BoxDomain,
    ComparisonBounds, GridData, MetricField, MetricKind, MetricSpec, Regularity,
};
pub use quadrature::QuadratureConfig;
pub use report::{CaseKind, VerificationCase, VerificationReport};
pub use rng::SplitMix64;
pub use solver::{
    distance, empirical_equivalence, grid_distance, refine_polyline, snowflake_check,
    verify_metric_axioms, DistanceConfig, DistanceEstimate, DistanceMap, DistanceResult,
    EquivalenceReport, EuclideanDistance, SnowflakeDistance, AxiomReport, SnowflakeReport,
    SolverDistance,
};
pub use suites::{builtin_metric, run_suite, test_curve, SuiteConfig, BUILTIN_METRICS, SUITE_NAMES, TEST_CURVES};
