//! Parametrized paths on [0, 1] with almost-everywhere derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr, Vars};

/// Default ternary scan depth of the Cantor function.
pub const CANTOR_DEPTH: usize = 40;

/// Default removed-interval level whose endpoints become Cantor-graph knots.
pub const CANTOR_KNOT_LEVEL: usize = 8;

/// Cantor function by ternary-digit scan, truncated after `depth` digits.
///
/// Stops at the first digit 1. Each step `x ← 3x − digit` is a monotone
/// map in floating point, so the result is nondecreasing in `t`.
pub fn cantor_value(t: f64, depth: usize) -> f64 {
    cantor_scan(t, depth).0
}

// (value, met a digit 1)
fn cantor_scan(t: f64, depth: usize) -> (f64, bool) {
    if t <= 0.0 {
        return (0.0, false);
    }
    if t >= 1.0 {
        return (1.0, false);
    }
    let mut x = t;
    let mut value = 0.0;
    let mut bit = 0.5;
    for _ in 0..depth {
        let y = 3.0 * x;
        let d = y.floor().min(2.0);
        x = y - d;
        if d == 1.0 {
            return (value + bit, true);
        }
        if d == 2.0 {
            value += bit;
        }
        bit *= 0.5;
    }
    (value, false)
}

/// Endpoints of the removed middle-third intervals up to `level`, with 0 and 1.
pub fn cantor_knots(level: usize) -> Vec<f64> {
    let mut intervals = vec![(0u64, 1u64, 1u64)]; // (lo, hi, denominator)
    let mut knots = vec![0.0, 1.0];
    for _ in 0..level {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for (lo, hi, den) in intervals {
            let (lo3, hi3, den3) = (3 * lo, 3 * hi, 3 * den);
            let a = lo3 + (hi3 - lo3) / 3;
            let b = lo3 + 2 * (hi3 - lo3) / 3;
            knots.push(a as f64 / den3 as f64);
            knots.push(b as f64 / den3 as f64);
            next.push((lo3, a, den3));
            next.push((b, hi3, den3));
        }
        intervals = next;
    }
    knots.sort_by(f64::total_cmp);
    knots
}

/// User-supplied curve body for derived constructions.
pub trait CurveMap: Send + Sync + fmt::Debug {
    fn eval(&self, t: f64) -> Result<Vec<f64>>;
    /// `None` where the derivative does not exist.
    fn derivative(&self, t: f64) -> Result<Option<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    PiecewiseExpr,
    Polyline,
    CantorGraph,
    Composite,
}

#[derive(Debug)]
enum Body {
    Expr { comps: Vec<Expr>, derivs: Option<Vec<Expr>> },
    Polyline { vertices: Vec<Vec<f64>>, params: Vec<f64> },
    Cantor { depth: usize },
    Restrict { base: Curve, a: f64, b: f64 },
    Concat { first: Curve, second: Curve },
    Reparam { base: Curve, phi: Expr, dphi: Expr },
    Custom { map: Arc<dyn CurveMap> },
}

/// Immutable curve γ : [0, 1] → R^n. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct Curve {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    dim: usize,
    knots: Vec<f64>,
    declared_ac: bool,
    kind: CurveKind,
    body: Body,
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Parameter(t))
    }
}

fn normalize_knots(extra: &[f64]) -> Result<Vec<f64>> {
    let mut knots = vec![0.0, 1.0];
    for &k in extra {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::Invalid(format!("knot {k} outside [0, 1]")));
        }
        knots.push(k);
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    Ok(knots)
}

impl Curve {
    fn new(dim: usize, knots: Vec<f64>, declared_ac: bool, kind: CurveKind, body: Body) -> Curve {
        Curve { inner: Arc::new(Inner { dim, knots, declared_ac, kind, body }) }
    }

    /// Curve given by component expressions in `t`, with optional derivative
    /// expressions; otherwise derivatives come from finite differences.
    pub fn expr(components: &[&str], derivatives: Option<&[&str]>, knots: &[f64]) -> Result<Curve> {
        let owned: Vec<String> = components.iter().map(|s| s.to_string()).collect();
        let d: Option<Vec<String>> = derivatives.map(|d| d.iter().map(|s| s.to_string()).collect());
        Curve::from_spec(&CurveSpec {
            kind: CurveSpecKind::Expr,
            components: Some(owned),
            derivatives: d,
            vertices: None,
            knots: Some(knots.to_vec()),
            depth: None,
            knot_level: None,
        })
    }

    /// Piecewise-linear path; `params` defaults to uniform spacing.
    pub fn polyline(vertices: Vec<Vec<f64>>, params: Option<Vec<f64>>) -> Result<Curve> {
        if vertices.len() < 2 {
            return Err(Error::Invalid("polyline needs at least two vertices".into()));
        }
        let dim = vertices[0].len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Invalid(format!("curve dimension {dim} not in 1..=3")));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: v.len() });
        }
        let m = vertices.len() - 1;
        let params = match params {
            Some(p) => {
                if p.len() != vertices.len() {
                    return Err(Error::Invalid(format!(
                        "polyline has {} vertices but {} parameters",
                        vertices.len(),
                        p.len()
                    )));
                }
                if p[0] != 0.0 || p[m] != 1.0 || p.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Invalid(
                        "polyline parameters must increase strictly from 0 to 1".into(),
                    ));
                }
                p
            }
            None => (0..=m).map(|i| i as f64 / m as f64).collect(),
        };
        Ok(Curve::new(
            dim,
            params.clone(),
            true,
            CurveKind::Polyline,
            Body::Polyline { vertices, params },
        ))
    }

    pub fn segment(p: &[f64], q: &[f64]) -> Curve {
        Curve::polyline(vec![p.to_vec(), q.to_vec()], None).expect("segment")
    }

    /// Graph t ↦ (t, Γ(t)) of the Cantor function.
    pub fn cantor_graph() -> Curve {
        Curve::cantor_graph_with(CANTOR_DEPTH, CANTOR_KNOT_LEVEL)
    }

    pub fn cantor_graph_with(depth: usize, knot_level: usize) -> Curve {
        Curve::new(
            2,
            cantor_knots(knot_level),
            false,
            CurveKind::CantorGraph,
            Body::Cantor { depth: depth.max(1) },
        )
    }

    pub fn custom(dim: usize, map: Arc<dyn CurveMap>, knots: &[f64], declared_ac: bool) -> Result<Curve> {
        Ok(Curve::new(
            dim,
            normalize_knots(knots)?,
            declared_ac,
            CurveKind::Composite,
            Body::Custom { map },
        ))
    }

    pub fn from_spec(spec: &CurveSpec) -> Result<Curve> {
        match spec.kind {
            CurveSpecKind::Expr => {
                let comps = spec
                    .components
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("expr curve needs `components`".into()))?;
                if !(1..=3).contains(&comps.len()) {
                    return Err(Error::Invalid(format!(
                        "curve dimension {} not in 1..=3",
                        comps.len()
                    )));
                }
                let parse_all = |v: &[String]| -> Result<Vec<Expr>> {
                    v.iter()
                        .map(|s| {
                            let e = parse_expression(s)?;
                            if e.max_coordinate() > 0 {
                                return Err(Error::Invalid(format!(
                                    "curve component `{s}` may only use t"
                                )));
                            }
                            Ok(e)
                        })
                        .collect()
                };
                let parsed = parse_all(comps)?;
                let derivs = match &spec.derivatives {
                    Some(d) => {
                        if d.len() != comps.len() {
                            return Err(Error::Dimension { expected: comps.len(), got: d.len() });
                        }
                        Some(parse_all(d)?)
                    }
                    None => None,
                };
                let knots = normalize_knots(spec.knots.as_deref().unwrap_or(&[]))?;
                let c = Curve::new(
                    comps.len(),
                    knots,
                    true,
                    CurveKind::PiecewiseExpr,
                    Body::Expr { comps: parsed, derivs },
                );
                for i in 0..=16 {
                    let p = c.eval(i as f64 / 16.0)?;
                    if p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Invalid(format!("curve is not finite at t = {}", i as f64 / 16.0)));
                    }
                }
                Ok(c)
            }
            CurveSpecKind::Polyline => {
                let v = spec
                    .vertices
                    .clone()
                    .ok_or_else(|| Error::Invalid("polyline curve needs `vertices`".into()))?;
                Curve::polyline(v, spec.knots.clone())
            }
            CurveSpecKind::CantorGraph => Ok(Curve::cantor_graph_with(
                spec.depth.unwrap_or(CANTOR_DEPTH),
                spec.knot_level.unwrap_or(CANTOR_KNOT_LEVEL),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Sorted breakpoints, always containing 0 and 1.
    pub fn knots(&self) -> &[f64] {
        &self.inner.knots
    }

    pub fn kind(&self) -> CurveKind {
        self.inner.kind
    }

    /// False for constructions known not to be absolutely continuous.
    pub fn declared_ac(&self) -> bool {
        self.inner.declared_ac
    }

    pub fn is_knot(&self, t: f64) -> bool {
        let k = &self.inner.knots;
        let i = k.partition_point(|&x| x < t);
        let near = |j: usize| k.get(j).is_some_and(|&x| (x - t).abs() <= 1e-14);
        near(i) || (i > 0 && near(i - 1))
    }

    /// γ(t).
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        check_t(t)?;
        self.eval_unchecked(t)
    }

    fn eval_unchecked(&self, t: f64) -> Result<Vec<f64>> {
        match &self.inner.body {
            Body::Expr { comps, .. } => {
                let v = Vars::t(t);
                comps.iter().map(|e| e.eval(&v)).collect()
            }
            Body::Polyline { vertices, params } => {
                let i = segment_index(params, t);
                let s = (t - params[i]) / (params[i + 1] - params[i]);
                Ok(vertices[i]
                    .iter()
                    .zip(&vertices[i + 1])
                    .map(|(a, b)| if s == 1.0 { *b } else { a + s * (b - a) })
                    .collect())
            }
            Body::Cantor { depth } => Ok(vec![t, cantor_value(t, *depth)]),
            Body::Restrict { base, a, b } => base.eval_unchecked((a + (b - a) * t).clamp(*a, *b)),
            Body::Concat { first, second } => {
                if t <= 0.5 {
                    first.eval_unchecked((2.0 * t).min(1.0))
                } else {
                    second.eval_unchecked((2.0 * t - 1.0).clamp(0.0, 1.0))
                }
            }
            Body::Reparam { base, phi, .. } => {
                let s = phi.eval(&Vars::t(t))?.clamp(0.0, 1.0);
                base.eval_unchecked(s)
            }
            Body::Custom { map } => map.eval(t),
        }
    }

    /// γ′(t), or `None` at knots and on the declared null set.
    pub fn derivative(&self, t: f64) -> Result<Option<Vec<f64>>> {
        check_t(t)?;
        if self.is_knot(t) {
            return Ok(None);
        }
        self.derivative_off_knots(t)
    }

    fn derivative_off_knots(&self, t: f64) -> Result<Option<Vec<f64>>> {
        match &self.inner.body {
            Body::Expr { comps, derivs } => match derivs {
                Some(d) => {
                    let v = Vars::t(t);
                    let out: Vec<f64> = d.iter().map(|e| e.eval(&v)).collect::<Result<_>>()?;
                    Ok(out.iter().all(|x| x.is_finite()).then_some(out))
                }
                None => self.finite_difference(comps, t).map(Some),
            },
            Body::Polyline { vertices, params } => {
                let i = segment_index(params, t);
                let h = params[i + 1] - params[i];
                Ok(Some(vertices[i].iter().zip(&vertices[i + 1]).map(|(a, b)| (b - a) / h).collect()))
            }
            Body::Cantor { depth } => {
                Ok(cantor_scan(t, *depth).1.then(|| vec![1.0, 0.0]))
            }
            Body::Restrict { base, a, b } => {
                let s = a + (b - a) * t;
                Ok(base.derivative(s)?.map(|v| v.into_iter().map(|x| x * (b - a)).collect()))
            }
            Body::Concat { first, second } => {
                let (c, s) = if t < 0.5 { (first, 2.0 * t) } else { (second, 2.0 * t - 1.0) };
                Ok(c.derivative(s)?.map(|v| v.into_iter().map(|x| 2.0 * x).collect()))
            }
            Body::Reparam { base, phi, dphi } => {
                let vars = Vars::t(t);
                let dp = match dphi.eval(&vars) {
                    Ok(v) if v.is_finite() => v,
                    _ => return Ok(None),
                };
                if dp == 0.0 {
                    return Ok(Some(vec![0.0; self.dim()]));
                }
                let s = phi.eval(&vars)?.clamp(0.0, 1.0);
                Ok(base.derivative(s)?.map(|v| v.into_iter().map(|x| x * dp).collect()))
            }
            Body::Custom { map } => map.derivative(t),
        }
    }

    // Five-point stencils inside the smooth piece containing t.
    fn finite_difference(&self, comps: &[Expr], t: f64) -> Result<Vec<f64>> {
        let k = &self.inner.knots;
        let i = segment_index(k, t);
        let (lo, hi) = (k[i], k[i + 1]);
        // Shrink toward nearby knots so singular endpoints are resolved.
        let room = (t - lo).min(hi - t) / 2.5;
        let h = (1e-3f64).min((hi - lo) / 8.0).min(room.max(1e-7));
        let f = |s: f64| -> Result<Vec<f64>> {
            let v = Vars::t(s);
            comps.iter().map(|e| e.eval(&v)).collect()
        };
        let (offsets, weights): (&[f64], &[f64]) = if t - 2.0 * h >= lo && t + 2.0 * h <= hi {
            (&[-2.0, -1.0, 1.0, 2.0], &[1.0, -8.0, 8.0, -1.0])
        } else if t - 2.0 * h < lo {
            (&[0.0, 1.0, 2.0, 3.0, 4.0], &[-25.0, 48.0, -36.0, 16.0, -3.0])
        } else {
            (&[0.0, -1.0, -2.0, -3.0, -4.0], &[25.0, -48.0, 36.0, -16.0, 3.0])
        };
        let mut out = vec![0.0; comps.len()];
        for (o, w) in offsets.iter().zip(weights) {
            let p = f(t + o * h)?;
            for (acc, v) in out.iter_mut().zip(p) {
                *acc += w * v;
            }
        }
        Ok(out.into_iter().map(|v| v / (12.0 * h)).collect())
    }

    /// γ restricted to [a, b], rescaled to [0, 1].
    pub fn restrict(&self, a: f64, b: f64) -> Result<Curve> {
        check_t(a)?;
        check_t(b)?;
        if !(a < b) {
            return Err(Error::Invalid(format!("restriction needs a < b, got [{a}, {b}]")));
        }
        let inner: Vec<f64> = self
            .knots()
            .iter()
            .filter(|&&k| k > a && k < b)
            .map(|k| (k - a) / (b - a))
            .collect();
        Ok(Curve::new(
            self.dim(),
            normalize_knots(&inner)?,
            self.declared_ac(),
            CurveKind::Composite,
            Body::Restrict { base: self.clone(), a, b },
        ))
    }

    /// `self` on [0, ½] followed by `other` on [½, 1].
    pub fn concat(&self, other: &Curve) -> Result<Curve> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        let end = self.eval(1.0)?;
        let start = other.eval(0.0)?;
        let gap = crate::linalg::dist(&end, &start);
        if gap > 1e-9 {
            return Err(Error::Join { gap });
        }
        let mut knots: Vec<f64> = self.knots().iter().map(|k| 0.5 * k).collect();
        knots.extend(other.knots().iter().map(|k| 0.5 + 0.5 * k));
        Ok(Curve::new(
            self.dim(),
            normalize_knots(&knots)?,
            self.declared_ac() && other.declared_ac(),
            CurveKind::Composite,
            Body::Concat { first: self.clone(), second: other.clone() },
        ))
    }

    /// γ ∘ φ for a weakly increasing φ onto [0, 1] with derivative φ′.
    pub fn reparametrize(&self, phi: &str, dphi: &str) -> Result<Curve> {
        let phi = parse_expression(phi)?;
        let dphi = parse_expression(dphi)?;
        let at = |e: &Expr, t: f64| e.eval(&Vars::t(t));
        if (at(&phi, 0.0)?).abs() > 1e-12 || (at(&phi, 1.0)? - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("reparametrization must map 0 to 0 and 1 to 1".into()));
        }
        let mut prev = 0.0;
        for i in 1..=1024 {
            let v = at(&phi, i as f64 / 1024.0)?;
            if v < prev - 1e-12 {
                return Err(Error::Invalid("reparametrization is not monotone".into()));
            }
            prev = v;
        }
        // Preimages of the base knots, by bisection on the monotone φ.
        let mut knots = Vec::new();
        for &k in self.knots() {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if at(&phi, mid)? < k {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            knots.push(hi);
        }
        Ok(Curve::new(
            self.dim(),
            normalize_knots(&knots)?,
            self.declared_ac(),
            CurveKind::Composite,
            Body::Reparam { base: self.clone(), phi, dphi },
        ))
    }

    /// Samples on a uniform grid merged with the knots.
    pub fn sample_params(&self, n: usize) -> Vec<f64> {
        let mut ts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        ts.extend_from_slice(self.knots());
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

fn segment_index(params: &[f64], t: f64) -> usize {
    let m = params.len() - 1;
    params.partition_point(|&p| p <= t).clamp(1, m) - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSpecKind {
    Expr,
    Polyline,
    CantorGraph,
}

/// JSON description of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveSpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knot_level: Option<usize>,
}

/// Strictly increasing breakpoints 0 = t₀ < … < t_N = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Partition> {
        if breakpoints.len() < 2
            || breakpoints[0] != 0.0
            || *breakpoints.last().unwrap() != 1.0
            || breakpoints.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Invalid("partition must increase strictly from 0 to 1".into()));
        }
        Ok(Partition { breakpoints })
    }

    /// Knots merged with the dyadic grid of level `depth`.
    pub fn dyadic_with_knots(depth: usize, knots: &[f64]) -> Partition {
        let n = 1usize << depth;
        let mut b: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        b.extend(knots.iter().copied().filter(|k| (0.0..=1.0).contains(k)));
        b.sort_by(f64::total_cmp);
        b.dedup();
        Partition { breakpoints: b }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when every breakpoint of `self` is one of `finer`'s.
    pub fn is_refined_by(&self, finer: &Partition) -> bool {
        self.breakpoints
            .iter()
            .all(|b| finer.breakpoints.binary_search_by(|x| x.total_cmp(b)).is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_examples() {
        for depth in [1, 5, 40] {
            assert_eq!(cantor_value(1.0 / 3.0, depth), 0.5);
            assert_eq!(cantor_value(0.5, depth), 0.5);
        }
        assert_eq!(cantor_value(0.0, 40), 0.0);
        assert_eq!(cantor_value(1.0, 40), 1.0);
        assert_eq!(cantor_value(2.0 / 3.0, 40), 0.5);
        assert_eq!(cantor_value(0.25, 40), cantor_value(0.25, 41));
    }

    #[test]
    fn cantor_knot_count() {
        let k = cantor_knots(8);
        assert_eq!(k.len(), 512);
        assert!(k.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cantor_knots(1), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn cantor_graph_points() {
        let c = Curve::cantor_graph();
        assert_eq!(c.eval(0.5).unwrap(), vec![0.5, 0.5]);
        assert_eq!(c.eval(1.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(c.derivative(0.5).unwrap(), Some(vec![1.0, 0.0]));
        assert_eq!(c.derivative(0.0).unwrap(), None);
        assert!(!c.declared_ac());
        assert!(matches!(c.eval(1.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn segment_and_kink() {
        let s = Curve::segment(&[0.0, 0.0], &[3.0, 4.0]);
        assert_eq!(s.eval(0.5).unwrap(), vec![1.5, 2.0]);
        assert_eq!(s.derivative(0.37).unwrap(), Some(vec![3.0, 4.0]));
        let k = Curve::expr(&["t", "abs(t - 0.5)"], None, &[0.5]).unwrap();
        assert_eq!(k.derivative(0.5).unwrap(), None);
        let d = k.derivative(0.499).unwrap().unwrap();
        assert!((d[0] - 1.0).abs() < 1e-10 && (d[1] + 1.0).abs() < 1e-10, "{d:?}");
        let d = k.derivative(0.75).unwrap().unwrap();
        assert!((d[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn finite_differences_match_analytic() {
        let fd = Curve::expr(&["sin(3*t)", "t^3"], None, &[]).unwrap();
        for t in [0.0, 0.001, 0.3, 0.9995, 1.0] {
            if t == 0.0 || t == 1.0 {
                assert_eq!(fd.derivative(t).unwrap(), None);
                continue;
            }
            let d = fd.derivative(t).unwrap().unwrap();
            assert!((d[0] - 3.0 * (3.0 * t).cos()).abs() < 1e-9, "{t}");
            assert!((d[1] - 3.0 * t * t).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn restrict_concat_reparam() {
        let s = Curve::segment(&[0.0, 0.0], &[3.0, 4.0]);
        let r = s.restrict(0.0, 0.5).unwrap();
        assert_eq!(r.eval(1.0).unwrap(), vec![1.5, 2.0]);
        assert_eq!(r.derivative(0.2).unwrap(), Some(vec![1.5, 2.0]));

        let a = Curve::segment(&[0.0, 0.0], &[1.0, 0.0]);
        let b = Curve::segment(&[1.0, 0.0], &[1.0, 1.0]);
        let l = a.concat(&b).unwrap();
        assert_eq!(l.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(l.eval(0.75).unwrap(), vec![1.0, 0.5]);
        let c = Curve::segment(&[2.0, 0.0], &[3.0, 0.0]);
        assert!(matches!(a.concat(&c), Err(Error::Join { .. })));

        let q = s.reparametrize("t^2", "2*t").unwrap();
        assert_eq!(q.eval(0.5).unwrap(), s.eval(0.25).unwrap());
        assert_eq!(q.derivative(0.5).unwrap(), Some(vec![3.0, 4.0]));
        assert_eq!(q.derivative(0.0).unwrap(), None);
        assert!(s.reparametrize("1 - t", "-1").is_err());
    }

    #[test]
    fn curve_spec_json() {
        let src = r#"{"kind":"expr","components":["t","t^2"],"knots":[0.5]}"#;
        let spec: CurveSpec = serde_json::from_str(src).unwrap();
        let c = Curve::from_spec(&spec).unwrap();
        assert_eq!(c.knots(), &[0.0, 0.5, 1.0]);
        let spec: CurveSpec =
            serde_json::from_str(r#"{"kind":"polyline","vertices":[[0,0],[1,0],[1,1]]}"#).unwrap();
        let c = Curve::from_spec(&spec).unwrap();
        assert_eq!(c.eval(0.75).unwrap(), vec![1.0, 0.5]);
        let spec: CurveSpec = serde_json::from_str(r#"{"kind":"cantor-graph"}"#).unwrap();
        assert_eq!(Curve::from_spec(&spec).unwrap().kind(), CurveKind::CantorGraph);
        let bad: CurveSpec =
            serde_json::from_str(r#"{"kind":"expr","components":["t","x1"]}"#).unwrap();
        assert!(Curve::from_spec(&bad).is_err());
    }

    #[test]
    fn partitions() {
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        let p = Partition::dyadic_with_knots(2, &[0.3]);
        assert_eq!(p.breakpoints(), &[0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        let q = Partition::dyadic_with_knots(3, &[0.3]);
        assert!(p.is_refined_by(&q));
    }
}
