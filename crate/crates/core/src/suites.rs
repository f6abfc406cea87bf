//! Verification suites with their built-in metrics and test curves.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::approx::{
    derivative_equality_report, mollified_distance_check, mollify_metric, smooth_approximation,
    MetricDerivativeConfig, MollifyConfig,
};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::length::{arc_length, induced_length, metric_arc_length, variational_distance, RefinementConfig};
use crate::linalg::dist;
use crate::metric::{BoxDomain, MetricField, MetricSpec};
use crate::quadrature::QuadratureConfig;
use crate::report::{CaseKind, VerificationCase, VerificationReport};
use crate::rng::SplitMix64;
use crate::solver::{
    distance, empirical_equivalence, snowflake_check, verify_metric_axioms, DistanceConfig, EuclideanDistance,
    SnowflakeDistance, SolverDistance,
};

pub const SUITE_NAMES: [&str; 10] = [
    "smooth-equality",
    "continuous-equality",
    "cantor-gap",
    "mollify-sandwich",
    "derivative-equality",
    "lipschitz-dac",
    "density-lambda-eta",
    "equivalence-constants",
    "metric-axioms",
    "snowflake-counterexample",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Record per-case wall time. Off by default so reports are byte-stable.
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 42, timing: false }
    }
}

const INDUCED_DEPTH: usize = 10;
const CANTOR_DEPTH: usize = 12;

/// Side of the square [−2, 2]² carrying the built-in metrics.
pub fn builtin_domain() -> BoxDomain {
    BoxDomain::cube(2, -2.0, 2.0)
}

fn builtin_spec(name: &str) -> Option<MetricSpec> {
    let bx = builtin_domain();
    let spec = match name {
        "euclidean" => MetricSpec::euclidean(&bx),
        "diag-1-4" => MetricSpec::constant(&bx, &[vec![1.0, 0.0], vec![0.0, 4.0]]),
        "exp-conformal" => MetricSpec::conformal(&bx, "exp(x1)"),
        "abs-conformal" => MetricSpec::conformal(&bx, "1 + abs(x1)"),
        "sqrt-conformal" => MetricSpec::conformal(&bx, "1 + sqrt(abs(x1))"),
        "four-identity" => MetricSpec::constant(&bx, &[vec![4.0, 0.0], vec![0.0, 4.0]]),
        _ => return None,
    };
    Some(spec.named(name))
}

pub const BUILTIN_METRICS: [&str; 6] =
    ["euclidean", "diag-1-4", "exp-conformal", "abs-conformal", "sqrt-conformal", "four-identity"];

/// Built-in metric by name: euclidean, diag(1,4), e^{2x1}·I, (1+|x1|)²·I,
/// (1+|x1|^{1/2})²·I and 4·I, all on [−2, 2]².
pub fn builtin_metric(name: &str) -> Result<MetricField> {
    let spec = builtin_spec(name).ok_or_else(|| Error::Invalid(format!("unknown built-in metric `{name}`")))?;
    MetricField::from_spec(&spec)
}

pub const TEST_CURVES: [&str; 5] = ["segment", "semicircle", "parabola", "kinked", "polyline"];

/// Piecewise-smooth test curves inside [−1.5, 1.5]².
pub fn test_curve(name: &str) -> Result<Curve> {
    match name {
        "segment" => Curve::expr(&["2*t - 1", "1.3*t - 0.5"], Some(&["2", "1.3"]), &[]),
        "semicircle" => Curve::expr(
            &["0.8*cos(3.141592653589793*t)", "0.8*sin(3.141592653589793*t)"],
            Some(&["-0.8*3.141592653589793*sin(3.141592653589793*t)", "0.8*3.141592653589793*cos(3.141592653589793*t)"]),
            &[],
        ),
        "parabola" => Curve::expr(&["2*t - 1", "(2*t - 1)^2 - 0.5"], Some(&["2", "4*(2*t - 1)"]), &[]),
        "kinked" => Curve::expr(&["2*t - 1", "abs(2*t - 1) - 0.5"], None, &[0.5]),
        "polyline" => Curve::polyline(
            vec![vec![-1.2, -0.8], vec![-0.3, 0.9], vec![0.4, -0.2], vec![1.1, 0.6]],
            None,
        ),
        _ => Err(Error::Invalid(format!("unknown test curve `{name}`"))),
    }
}

struct Suite<'a> {
    name: &'a str,
    cfg: &'a SuiteConfig,
    cases: Vec<VerificationCase>,
    clock: Instant,
}

impl<'a> Suite<'a> {
    fn new(name: &'a str, cfg: &'a SuiteConfig) -> Self {
        Suite { name, cfg, cases: Vec::new(), clock: Instant::now() }
    }

    fn push(&mut self, mut case: VerificationCase) {
        if self.cfg.timing {
            case.millis = Some(self.clock.elapsed().as_millis() as u64);
        }
        self.clock = Instant::now();
        self.cases.push(case);
    }

    fn check(&mut self, name: &str, observed: Result<f64>, expected: f64, tolerance: f64, kind: CaseKind) {
        let case = match observed {
            Ok(v) => VerificationCase::new(self.name, name, v, expected, tolerance, kind),
            Err(e) => VerificationCase::failed(self.name, name, expected, tolerance, kind, &e.to_string()),
        };
        self.push(case);
    }

    fn within(&mut self, name: &str, observed: Result<f64>, expected: f64, tolerance: f64) {
        self.check(name, observed, expected, tolerance, CaseKind::Within);
    }

    fn at_most(&mut self, name: &str, observed: Result<f64>, bound: f64, tolerance: f64) {
        self.check(name, observed, bound, tolerance, CaseKind::AtMost);
    }

    fn at_least(&mut self, name: &str, observed: Result<f64>, bound: f64, tolerance: f64) {
        self.check(name, observed, bound, tolerance, CaseKind::AtLeast);
    }

    fn flag(&mut self, name: &str, ok: Result<bool>) {
        self.within(name, ok.map(|b| if b { 1.0 } else { 0.0 }), 1.0, 0.0);
    }

    fn fail(&mut self, name: &str, err: &Error) {
        self.push(VerificationCase::failed(self.name, name, 0.0, 0.0, CaseKind::Within, &err.to_string()));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Runs one suite, or every suite for "all".
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<VerificationReport> {
    if name == "all" {
        let mut report = VerificationReport::new("all", json!({ "seed": cfg.seed, "suites": SUITE_NAMES }));
        for s in SUITE_NAMES {
            report.cases.extend(run_one(s, cfg)?.cases);
        }
        return Ok(report);
    }
    run_one(name, cfg)
}

fn run_one(name: &str, cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut s = Suite::new(name, cfg);
    let params = match name {
        "smooth-equality" => smooth_equality(&mut s),
        "continuous-equality" => continuous_equality(&mut s),
        "cantor-gap" => cantor_gap(&mut s),
        "mollify-sandwich" => mollify_sandwich(&mut s),
        "derivative-equality" => derivative_equality(&mut s),
        "lipschitz-dac" => lipschitz_dac(&mut s),
        "density-lambda-eta" => density_lambda_eta(&mut s),
        "equivalence-constants" => equivalence_constants(&mut s),
        "metric-axioms" => metric_axioms(&mut s),
        "snowflake-counterexample" => snowflake(&mut s),
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    let mut report = VerificationReport::new(name, json!({ "seed": cfg.seed, "params": params }));
    report.cases = s.cases;
    Ok(report)
}

// Arc length, induced length and (optionally) metric arc length for one pair.
fn equality_cases(s: &mut Suite, metric: &str, curve: &str, tol: f64, with_metric_arc: bool) {
    let tag = format!("{metric}:{curve}");
    let setup = builtin_metric(metric).and_then(|f| Ok((f, test_curve(curve)?)));
    let (field, c) = match setup {
        Ok(v) => v,
        Err(e) => return s.fail(&format!("setup:{tag}"), &e),
    };
    let d = SolverDistance::new(&field, DistanceConfig::default());
    let l = arc_length(&field, &c, &QuadratureConfig::smooth());
    let ld = induced_length(&d, &c, &RefinementConfig::fixed_depth(INDUCED_DEPTH));
    let (l, ld) = match (l, ld) {
        (Ok(l), Ok(ld)) => (l, ld),
        (Err(e), _) | (_, Err(e)) => return s.fail(&format!("lengths:{tag}"), &e),
    };
    s.at_most(&format!("l_vs_ld:{tag}"), Ok(rel(l.value, ld.value)), 0.0, tol);
    if with_metric_arc {
        let quad = QuadratureConfig { abs_tol: 1e-4, rel_tol: 1e-4, max_panels: 64 };
        match metric_arc_length(&d, &c, &quad, &MetricDerivativeConfig::default()) {
            Ok(lt) => {
                s.at_most(&format!("l_vs_lmetric:{tag}"), Ok(rel(l.value, lt.value)), 0.0, tol);
                s.at_most(&format!("ld_vs_lmetric:{tag}"), Ok(rel(ld.value, lt.value)), 0.0, tol);
            }
            Err(e) => s.fail(&format!("l_vs_lmetric:{tag}"), &e),
        }
    }
    let slack = l.estimated_error + ld.estimated_error + 1e-9;
    s.at_most(&format!("ld_le_l:{tag}"), Ok(ld.value - l.value), 0.0, slack);
}

fn smooth_equality(s: &mut Suite) -> serde_json::Value {
    let metrics = ["euclidean", "diag-1-4", "exp-conformal"];
    for m in metrics {
        for c in TEST_CURVES {
            equality_cases(s, m, c, 5e-3, false);
        }
    }
    json!({ "metrics": metrics, "curves": TEST_CURVES, "depth": INDUCED_DEPTH, "tolerance": 5e-3 })
}

fn continuous_equality(s: &mut Suite) -> serde_json::Value {
    let metrics = ["abs-conformal", "sqrt-conformal"];
    for m in metrics {
        for c in TEST_CURVES {
            equality_cases(s, m, c, 1e-2, true);
        }
    }
    json!({ "metrics": metrics, "curves": TEST_CURVES, "depth": INDUCED_DEPTH, "tolerance": 1e-2 })
}

fn cantor_gap(s: &mut Suite) -> serde_json::Value {
    let field = MetricField::euclidean(&BoxDomain::cube(2, 0.0, 1.0));
    let c = Curve::cantor_graph();
    let l = arc_length(&field, &c, &QuadratureConfig::smooth()).map(|r| r.value);
    s.within("arc_length", l.as_ref().map(|v| *v).map_err(clone_err), 1.0, 1e-6);
    let ld = induced_length(&EuclideanDistance, &c, &RefinementConfig::fixed_depth(CANTOR_DEPTH));
    match &ld {
        Ok(r) => {
            let trace = r.trace.as_deref().unwrap_or(&[]);
            s.within("induced_length_depth12", Ok(r.value), 1.975, 0.025);
            s.flag("induced_length_monotone", Ok(trace.windows(2).all(|w| w[1].chord_sum >= w[0].chord_sum - 1e-12)));
        }
        Err(e) => s.fail("induced_length_depth12", e),
    }
    let quad = QuadratureConfig { abs_tol: 1e-4, rel_tol: 1e-4, max_panels: 64 };
    let lt = metric_arc_length(&EuclideanDistance, &c, &quad, &MetricDerivativeConfig::default());
    s.within("metric_arc_length", lt.map(|r| r.value), 1.0, 2e-2);
    let gap = match (&l, &ld) {
        (Ok(l), Ok(ld)) => Ok(ld.value - l),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    s.at_least("gap_persists", gap, 0.95, 0.0);
    let rejected = variational_distance(&field, &c, &Curve::segment(&[0.0, 0.0], &[1.0, 1.0]), &EuclideanDistance, &QuadratureConfig::smooth());
    s.flag("dac_rejects_non_ac", Ok(matches!(rejected, Err(Error::NotAbsolutelyContinuous(_)))));
    json!({ "depth": CANTOR_DEPTH, "cantorDepth": crate::curve::CANTOR_DEPTH, "knotLevel": crate::curve::CANTOR_KNOT_LEVEL })
}

fn clone_err(e: &Error) -> Error {
    Error::Invalid(e.to_string())
}

fn mollify_sandwich(s: &mut Suite) -> serde_json::Value {
    let seed = s.cfg.seed;
    let field = match builtin_metric("abs-conformal") {
        Ok(f) => f,
        Err(e) => {
            s.fail("setup", &e);
            return json!({});
        }
    };
    let mut widths = Vec::new();
    for n in [5usize, 10] {
        let mut cfg = MollifyConfig::new(n);
        cfg.seed = seed;
        let mol = match mollify_metric(&field, &cfg) {
            Ok(m) => m,
            Err(e) => {
                s.fail(&format!("mollify:n{n}"), &e);
                continue;
            }
        };
        widths.push(mol.kernel_width);
        let (lo, hi) = mol.band();
        let mut rng = SplitMix64::new(seed).fork(n as u64);
        match mol.ratio_samples(1000, &mut rng) {
            Ok(r) => {
                let min = r.iter().copied().fold(f64::INFINITY, f64::min);
                let max = r.iter().copied().fold(0.0, f64::max);
                s.at_least(&format!("norm_ratio_min:n{n}"), Ok(min), lo, 1e-3);
                s.at_most(&format!("norm_ratio_max:n{n}"), Ok(max), hi, 1e-3);
            }
            Err(e) => s.fail(&format!("norm_ratio:n{n}"), &e),
        }
        let mut rng = SplitMix64::new(seed).fork(100 + n as u64);
        match mollified_distance_check(&mol, 10, &DistanceConfig::default(), &mut rng) {
            Ok(r) => {
                for (i, p) in r.pairs.iter().enumerate() {
                    s.at_least(&format!("distance_ratio_lo:n{n}:{i}"), Ok(p.dn), lo * p.d, p.slack);
                    s.at_most(&format!("distance_ratio_hi:n{n}:{i}"), Ok(p.dn), hi * p.d, p.slack);
                }
            }
            Err(e) => s.fail(&format!("distance:n{n}"), &e),
        }
    }
    json!({ "metric": "abs-conformal", "targets": [5, 10], "gridRes": 64, "samples": 1000, "pairs": 10, "kernelWidths": widths })
}

fn derivative_equality(s: &mut Suite) -> serde_json::Value {
    let metrics = ["exp-conformal", "abs-conformal", "sqrt-conformal"];
    let curves = ["segment", "semicircle", "parabola"];
    let ts: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
    let cfg = MetricDerivativeConfig::default();
    for m in metrics {
        for c in curves {
            let tag = format!("{m}:{c}");
            let r = builtin_metric(m).and_then(|f| {
                let curve = test_curve(c)?;
                let d = SolverDistance::new(&f, DistanceConfig::default());
                derivative_equality_report(&f, &curve, &ts, &d, &cfg)
            });
            match r {
                Ok(r) => {
                    s.at_most(&format!("max_diff:{tag}"), Ok(r.max_diff), 0.0, 1e-2);
                    s.at_most(&format!("minimality:{tag}"), Ok(r.max_excess), 0.0, 1e-3);
                }
                Err(e) => s.fail(&format!("max_diff:{tag}"), &e),
            }
        }
    }
    json!({ "metrics": metrics, "curves": curves, "samples": 20, "derivative": cfg })
}

// γ(t) = a + b·t + c·sin(k·t) per component, with its derivative.
fn random_curve(rng: &mut SplitMix64, base: Option<&[[f64; 4]; 2]>) -> ([[f64; 4]; 2], Curve) {
    let mut coef = [[0.0; 4]; 2];
    for (i, row) in coef.iter_mut().enumerate() {
        *row = match base {
            None => [rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3), rng.uniform(1.0, 6.0)],
            Some(b) => {
                let b = b[i];
                [
                    b[0] + rng.uniform(-0.05, 0.05),
                    b[1] + rng.uniform(-0.05, 0.05),
                    b[2] + rng.uniform(-0.05, 0.05),
                    b[3] + rng.uniform(-0.5, 0.5),
                ]
            }
        };
    }
    let comps: Vec<String> = coef.iter().map(|[a, b, c, k]| format!("{a} + {b}*t + {c}*sin({k}*t)")).collect();
    let derivs: Vec<String> = coef.iter().map(|[_, b, c, k]| format!("{b} + {c}*{k}*cos({k}*t)")).collect();
    let comps: Vec<&str> = comps.iter().map(String::as_str).collect();
    let derivs: Vec<&str> = derivs.iter().map(String::as_str).collect();
    let curve = Curve::expr(&comps, Some(&derivs), &[]).expect("generated expressions parse");
    (coef, curve)
}

fn lipschitz_dac(s: &mut Suite) -> serde_json::Value {
    let quad = QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-13, max_panels: 20_000 };
    let solver = DistanceConfig { grid_res: 16, polyline_points: 9, levels: 1, ..DistanceConfig::default() };
    let pairs = 100;
    for m in ["euclidean", "abs-conformal"] {
        let field = match builtin_metric(m) {
            Ok(f) => f,
            Err(e) => {
                s.fail(&format!("setup:{m}"), &e);
                continue;
            }
        };
        let d = SolverDistance::new(&field, solver);
        let mut rng = SplitMix64::new(s.cfg.seed).fork(0x11b5);
        let mut violations = 0usize;
        let mut worst = f64::NEG_INFINITY;
        let mut failure = None;
        for i in 0..pairs {
            let (coef, g) = random_curve(&mut rng, None);
            // Every other pair is a small perturbation.
            let (_, sg) = random_curve(&mut rng, (i % 2 == 1).then_some(&coef));
            let r = (|| -> Result<f64> {
                let lg = arc_length(&field, &g, &quad)?.value;
                let ls = arc_length(&field, &sg, &quad)?.value;
                let dac = variational_distance(&field, &g, &sg, &d, &quad)?.value;
                Ok((lg - ls).abs() - dac)
            })();
            match r {
                Ok(excess) => {
                    worst = worst.max(excess);
                    if excess > 1e-9 {
                        violations += 1;
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    violations += 1;
                }
            }
        }
        s.within(&format!("violations:{m}"), Ok(violations as f64), 0.0, 0.0);
        match failure {
            Some(e) => s.fail(&format!("evaluation:{m}"), &e),
            None => s.at_most(&format!("worst_excess:{m}"), Ok(worst), 0.0, 1e-9),
        }
    }
    json!({ "metrics": ["euclidean", "abs-conformal"], "pairs": pairs, "solver": solver, "quadrature": quad })
}

fn density_lambda_eta(s: &mut Suite) -> serde_json::Value {
    let field = match builtin_metric("abs-conformal") {
        Ok(f) => f,
        Err(e) => {
            s.fail("setup", &e);
            return json!({});
        }
    };
    let curves = [
        ("kinked", Curve::expr(&["t", "abs(t - 0.5)"], None, &[0.5])),
        ("two-thirds", Curve::expr(&["t", "t^(2/3)"], Some(&["1", "(2/3)*t^(-1/3)"]), &[])),
    ];
    let d = SolverDistance::new(&field, DistanceConfig::default());
    let quad = QuadratureConfig::smooth();
    let etas = [1e-1, 1e-2];
    for (name, c) in curves {
        let c = match c {
            Ok(c) => c,
            Err(e) => {
                s.fail(&format!("setup:{name}"), &e);
                continue;
            }
        };
        let mut measured = Vec::new();
        for eta in etas {
            let tag = format!("{name}:eta={eta}");
            match smooth_approximation(&field, &c, eta, std::slice::from_ref(&field.domain), &d, &quad) {
                Ok(r) => {
                    s.at_most(&format!("dac:{tag}"), Ok(r.dac_measured), r.dac_bound, 1e-6);
                    let ends = (|| -> Result<f64> {
                        Ok(dist(&r.curve.eval(0.0)?, &c.eval(0.0)?).max(dist(&r.curve.eval(1.0)?, &c.eval(1.0)?)))
                    })();
                    s.at_most(&format!("endpoints:{tag}"), ends, 0.0, 1e-12);
                    measured.push(r.dac_measured);
                }
                Err(e) => s.fail(&format!("dac:{tag}"), &e),
            }
        }
        if measured.len() == 2 {
            s.at_most(&format!("nonincreasing:{name}"), Ok(measured[1] - measured[0]), 0.0, 0.0);
        }
    }
    json!({ "metric": "abs-conformal", "etas": etas, "charts": 1 })
}

fn equivalence_constants(s: &mut Suite) -> serde_json::Value {
    let bx = BoxDomain::cube(2, -1.0, 1.0);
    let cfg = DistanceConfig::default();
    let pairs = 40;
    let r = builtin_metric("abs-conformal").and_then(|g| {
        let h = builtin_metric("euclidean")?;
        let mut rng = SplitMix64::new(s.cfg.seed).fork(0xe9);
        empirical_equivalence(&g, &h, &bx, pairs, &cfg, &mut rng)
    });
    match r {
        Ok(r) => {
            s.at_least("abs_vs_euclidean_min", Ok(r.c_emp), 1.0, 1e-2);
            s.at_most("abs_vs_euclidean_max", Ok(r.c_emp_upper), 2.0, 1e-2);
            s.flag("abs_vs_euclidean_band", Ok(r.pass));
        }
        Err(e) => s.fail("abs_vs_euclidean", &e),
    }
    let r = builtin_metric("four-identity").and_then(|g| {
        let h = builtin_metric("euclidean")?;
        let mut rng = SplitMix64::new(s.cfg.seed).fork(0x4e);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..pairs {
            let p = bx.sample(&mut rng);
            let q = bx.sample(&mut rng);
            let ratio = distance(&g, &p, &q, &cfg)?.value / distance(&h, &p, &q, &cfg)?.value;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        Ok((lo, hi))
    });
    match r {
        Ok((lo, hi)) => {
            s.within("four_vs_euclidean_min", Ok(lo), 2.0, 1e-6);
            s.within("four_vs_euclidean_max", Ok(hi), 2.0, 1e-6);
        }
        Err(e) => s.fail("four_vs_euclidean", &e),
    }
    json!({ "box": [[-1.0, -1.0], [1.0, 1.0]], "pairs": pairs, "solver": cfg })
}

fn metric_axioms(s: &mut Suite) -> serde_json::Value {
    let cfg = DistanceConfig::default();
    let points = 100;
    for m in BUILTIN_METRICS {
        let r = builtin_metric(m).and_then(|f| {
            let mut rng = SplitMix64::new(s.cfg.seed).fork(0xa1);
            let pts: Vec<Vec<f64>> = (0..points).map(|_| f.domain.sample(&mut rng)).collect();
            verify_metric_axioms(&f, &pts, &cfg)
        });
        match r {
            Ok(r) => {
                s.within(&format!("identity:{m}"), Ok(r.identity_max), 0.0, 0.0);
                s.at_least(&format!("symmetry:{m}"), Ok(r.symmetry_margin), 0.0, 0.0);
                s.at_least(&format!("triangle:{m}"), Ok(r.triangle_margin), 0.0, 0.0);
                s.at_least(&format!("lower_bound:{m}"), Ok(r.lower_margin), 0.0, 0.0);
                s.at_least(&format!("upper_bound:{m}"), Ok(r.upper_margin), 0.0, 0.0);
            }
            Err(e) => s.fail(&format!("axioms:{m}"), &e),
        }
    }
    json!({ "metrics": BUILTIN_METRICS, "points": points, "solver": cfg })
}

fn snowflake(s: &mut Suite) -> serde_json::Value {
    match snowflake_check(&EuclideanDistance, &SnowflakeDistance, &[0.0], &[1.0]) {
        Ok(r) => {
            let at = r.ratios.iter().find(|(sep, _)| *sep == 1e-6).map(|(_, v)| *v);
            let closed_form = 1.0 / 1e-6f64.sqrt();
            match at {
                Some(v) => s.within("ratio_at_1e-6", Ok(v), closed_form, 1e-9 * closed_form),
                None => s.fail("ratio_at_1e-6", &Error::Invalid("separation 1e-6 not probed".into())),
            }
            s.flag("reports_non_equivalence", Ok(!r.equivalent));
        }
        Err(e) => s.fail("snowflake", &e),
    }
    json!({ "x": [0.0], "dir": [1.0] })
}
