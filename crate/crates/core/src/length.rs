//! Arc length, induced length, metric arc length and the variational
//! distance between curves.

use serde::{Deserialize, Serialize};

use crate::approx::{metric_derivative, MetricDerivativeConfig};
use crate::curve::{Curve, Partition};
use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::solver::DistanceMap;

/// Fraction of quadrature nodes with undefined derivative tolerated as a null set.
pub const AC_SCREEN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LengthResult {
    pub value: f64,
    pub estimated_error: f64,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<RefinementLevel>>,
}

/// One level of nested partition refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefinementLevel {
    pub depth: usize,
    pub chord_count: usize,
    pub chord_sum: f64,
    /// Sum of the per-chord error estimates.
    pub chord_error: f64,
    #[serde(skip)]
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefinementConfig {
    /// Stop once a level adds less than this to the chord sum.
    pub tol: f64,
    pub max_depth: usize,
    /// Keep each level's partition in the trace.
    pub keep_partitions: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig { tol: 1e-4, max_depth: 14, keep_partitions: false }
    }
}

impl RefinementConfig {
    /// Run every level up to `depth` regardless of the increment.
    pub fn fixed_depth(depth: usize) -> Self {
        RefinementConfig { tol: 0.0, max_depth: depth, keep_partitions: false }
    }
}

fn check_dims(field: &MetricField, curve: &Curve) -> Result<()> {
    if field.dim() != curve.dim() {
        return Err(Error::Dimension { expected: field.dim(), got: curve.dim() });
    }
    Ok(())
}

/// L(γ) = ∫₀¹ ‖γ′(t)‖_g dt, split at the curve's knots.
pub fn arc_length(field: &MetricField, curve: &Curve, quad: &QuadratureConfig) -> Result<LengthResult> {
    check_dims(field, curve)?;
    let r = integrate(
        |t| match curve.derivative(t)? {
            Some(v) => field.norm(&curve.eval(t)?, &v).map(Some),
            None => Ok(None),
        },
        curve.knots(),
        quad,
    )?;
    let warning = (r.undefined_fraction() > AC_SCREEN_FRACTION).then(|| {
        format!(
            "derivative undefined at {} of {} quadrature nodes; the curve may not be absolutely continuous",
            r.undefined_nodes, r.evaluations
        )
    });
    Ok(LengthResult {
        value: r.value,
        estimated_error: r.error,
        evaluations: r.evaluations,
        warning,
        trace: None,
    })
}

fn chord_sum(d: &dyn DistanceMap, curve: &Curve, ts: &[f64]) -> Result<(Vec<f64>, f64)> {
    let pts: Vec<Vec<f64>> = ts.iter().map(|&t| curve.eval(t)).collect::<Result<_>>()?;
    let mut chords = Vec::with_capacity(ts.len() - 1);
    let mut err = 0.0;
    for w in pts.windows(2) {
        let e = d.distance(&w[0], &w[1])?;
        chords.push(e.value);
        err += e.error;
    }
    Ok((chords, err))
}

/// L_d(γ) approximated by chord sums over nested dyadic partitions merged
/// with the curve's knots.
pub fn induced_length(d: &dyn DistanceMap, curve: &Curve, cfg: &RefinementConfig) -> Result<LengthResult> {
    let mut trace: Vec<RefinementLevel> = Vec::new();
    let mut evaluations = 0;
    for depth in 0..=cfg.max_depth {
        let part = Partition::dyadic_with_knots(depth, curve.knots());
        let (chords, err) = chord_sum(d, curve, part.breakpoints())?;
        evaluations += chords.len();
        let sum: f64 = chords.iter().sum();
        if let Some(prev) = trace.last() {
            // Solver error plus summation rounding.
            let slack = 2.0 * (prev.chord_error + err) + 1e-12 * sum.abs();
            if sum < prev.chord_sum - slack {
                return Err(Error::InconsistentDistance {
                    depth,
                    drop: prev.chord_sum - sum,
                    slack,
                });
            }
        }
        let increment = trace.last().map(|p| sum - p.chord_sum);
        trace.push(RefinementLevel {
            depth,
            chord_count: chords.len(),
            chord_sum: sum,
            chord_error: err,
            partition: cfg.keep_partitions.then_some(part),
        });
        if increment.is_some_and(|inc| inc < cfg.tol) {
            break;
        }
    }
    let last = trace.last().expect("at least one level");
    let increment = if trace.len() > 1 { (last.chord_sum - trace[trace.len() - 2].chord_sum).abs() } else { 0.0 };
    Ok(LengthResult {
        value: last.chord_sum,
        estimated_error: increment + last.chord_error,
        evaluations,
        warning: None,
        trace: Some(trace),
    })
}

/// t ↦ L_d(γ|[0,t]) at each `ts`, from one chord set on the partition at
/// `cfg.max_depth` merged with knots and `ts`.
pub fn induced_length_profile(
    d: &dyn DistanceMap,
    curve: &Curve,
    ts: &[f64],
    cfg: &RefinementConfig,
) -> Result<Vec<f64>> {
    for w in ts.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Invalid("profile times must be sorted".into()));
        }
    }
    if let Some(&t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Parameter(t));
    }
    let mut extra = curve.knots().to_vec();
    extra.extend_from_slice(ts);
    let part = Partition::dyadic_with_knots(cfg.max_depth, &extra);
    let bp = part.breakpoints();
    let (chords, _) = chord_sum(d, curve, bp)?;
    let mut cumulative = Vec::with_capacity(bp.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for c in &chords {
        acc += c;
        cumulative.push(acc);
    }
    Ok(ts
        .iter()
        .map(|t| {
            let i = bp.partition_point(|b| b < t);
            cumulative[i]
        })
        .collect())
}

/// L̃(γ) = ∫₀¹ |γ̇|(t) dt with the metric derivative estimated at each node.
pub fn metric_arc_length(
    d: &dyn DistanceMap,
    curve: &Curve,
    quad: &QuadratureConfig,
    deriv: &MetricDerivativeConfig,
) -> Result<LengthResult> {
    let mut failed = 0;
    let mut total = 0;
    let r = integrate(
        |t| {
            let m = metric_derivative(d, curve, t, deriv)?;
            total += 1;
            if !m.converged {
                failed += 1;
            }
            Ok(Some(m.value))
        },
        curve.knots(),
        quad,
    )?;
    if failed as f64 > 0.01 * total as f64 {
        return Err(Error::DerivativeDiagnostic { failed, total });
    }
    let warning = (failed > 0).then(|| format!("metric derivative did not converge at {failed} of {total} nodes"));
    Ok(LengthResult { value: r.value, estimated_error: r.error, evaluations: r.evaluations, warning, trace: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariationalDistance {
    pub value: f64,
    pub sup_term: f64,
    pub integral_term: f64,
    /// Parameter where the sup term was attained.
    pub sup_at: f64,
    pub estimated_error: f64,
}

/// Uniform samples for the sup term, taken together with the knots.
pub const SUP_SAMPLES: usize = 1024;

fn screen(curve: &Curve, label: &str) -> Result<()> {
    if !curve.declared_ac() {
        return Err(Error::NotAbsolutelyContinuous(format!("{label} is declared non-AC")));
    }
    Ok(())
}

/// D_ac(γ, σ) = sup_t d(γ(t), σ(t)) + ∫₀¹ |‖γ′(t)‖_g − ‖σ′(t)‖_g| dt.
///
/// Each speed is measured at its own base point. Point pairs are passed to
/// `d` in a canonical order, so the result is exactly symmetric.
pub fn variational_distance(
    field: &MetricField,
    gamma: &Curve,
    sigma: &Curve,
    d: &dyn DistanceMap,
    quad: &QuadratureConfig,
) -> Result<VariationalDistance> {
    check_dims(field, gamma)?;
    check_dims(field, sigma)?;
    screen(gamma, "first curve")?;
    screen(sigma, "second curve")?;

    let mut breaks: Vec<f64> = gamma.knots().iter().chain(sigma.knots()).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let speed = |c: &Curve, t: f64| -> Result<Option<f64>> {
        match c.derivative(t)? {
            Some(v) => field.norm(&c.eval(t)?, &v).map(Some),
            None => Ok(None),
        }
    };
    let integral = integrate(
        |t| {
            Ok(match (speed(gamma, t)?, speed(sigma, t)?) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            })
        },
        &breaks,
        quad,
    )?;
    if integral.undefined_fraction() > AC_SCREEN_FRACTION {
        return Err(Error::NotAbsolutelyContinuous(format!(
            "derivative undefined at {} of {} quadrature nodes",
            integral.undefined_nodes, integral.evaluations
        )));
    }

    let gap = |t: f64| -> Result<(f64, f64)> {
        let a = gamma.eval(t)?;
        let b = sigma.eval(t)?;
        let (p, q) = if lex_less(&b, &a) { (b, a) } else { (a, b) };
        let e = d.distance(&p, &q)?;
        Ok((e.value, e.error))
    };
    let bound = |t: f64| -> Result<Option<f64>> {
        let a = gamma.eval(t)?;
        let b = sigma.eval(t)?;
        let (p, q) = if lex_less(&b, &a) { (b, a) } else { (a, b) };
        Ok(d.upper_bound(&p, &q))
    };

    let mut ts: Vec<f64> = (0..SUP_SAMPLES).map(|i| i as f64 / (SUP_SAMPLES - 1) as f64).collect();
    ts.extend_from_slice(&breaks);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let n = ts.len();
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (i, &t) in ts.iter().enumerate() {
        order.push((i, bound(t)?.unwrap_or(f64::INFINITY)));
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut values: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut best = f64::NEG_INFINITY;
    for &(i, ub) in &order {
        if ub <= best {
            break;
        }
        let v = gap(ts[i])?;
        best = best.max(v.0);
        values[i] = Some(v);
    }
    let mut ranked: Vec<(usize, f64, f64)> =
        values.iter().enumerate().filter_map(|(i, v)| v.map(|(a, e)| (i, a, e))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (mut sup, mut sup_at, mut sup_err) = (ranked[0].1, ts[ranked[0].0], ranked[0].2);
    for &(i, _, _) in ranked.iter().take(3) {
        let lo = ts[i.saturating_sub(1)];
        let hi = ts[(i + 1).min(n - 1)];
        let (t, v, e) = golden_max(&gap, lo, hi)?;
        if v > sup {
            sup = v;
            sup_at = t;
            sup_err = e;
        }
    }
    Ok(VariationalDistance {
        value: sup + integral.value,
        sup_term: sup,
        integral_term: integral.value,
        sup_at,
        estimated_error: sup_err + integral.error,
    })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

fn golden_max(f: &dyn Fn(f64) -> Result<(f64, f64)>, mut a: f64, mut b: f64) -> Result<(f64, f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut e = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fe = f(e)?;
    for _ in 0..20 {
        if fc.0 >= fe.0 {
            b = e;
            e = c;
            fe = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + INV_PHI * (b - a);
            fe = f(e)?;
        }
    }
    Ok(if fc.0 >= fe.0 { (c, fc.0, fc.1) } else { (e, fe.0, fe.1) })
}
