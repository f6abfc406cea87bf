//! Constructive approximations: metric derivatives, mollified metrics and
//! piecewise-smooth approximation of absolutely continuous curves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{Curve, CurveMap};
use crate::error::{Error, Result};
use crate::length::{variational_distance, VariationalDistance};
use crate::linalg::{dist, generalized_eigen_extremes, Mat};
use crate::metric::{build_metric, BoxDomain, DomainSpec, GridData, MetricField, MetricKind, MetricSpec};
use crate::quadrature::{gauss_legendre, integrate, QuadratureConfig};
use crate::rng::SplitMix64;
use crate::solver::{distance, DistanceConfig, DistanceMap};

// ---------------------------------------------------------------------------
// Metric derivative

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricDerivativeConfig {
    pub delta0: f64,
    pub halvings: usize,
    /// Richardson extrapolation on consecutive quotients.
    pub extrapolate: bool,
    /// Extra halvings allowed past `halvings` while the sequence settles.
    pub max_extra: usize,
}

impl Default for MetricDerivativeConfig {
    fn default() -> Self {
        MetricDerivativeConfig { delta0: 1e-2, halvings: 8, extrapolate: true, max_extra: 40 }
    }
}

impl MetricDerivativeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0) || self.halvings < 2 {
            return Err(Error::Invalid("metric derivative needs delta0 > 0 and halvings >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricDerivative {
    pub value: f64,
    pub converged: bool,
    /// Number of increments evaluated.
    pub steps: usize,
    /// Last increment used.
    pub delta: f64,
}

/// Relative agreement of consecutive estimates that counts as convergence.
const DERIVATIVE_RTOL: f64 = 1e-3;

/// |γ̇|(t) = lim d(γ(t+δ), γ(t)) / |δ|, from two-sided quotients at δ₀·2^{−k}.
pub fn metric_derivative(
    d: &dyn DistanceMap,
    curve: &Curve,
    t: f64,
    cfg: &MetricDerivativeConfig,
) -> Result<MetricDerivative> {
    cfg.validate()?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Parameter(t));
    }
    // Stay inside the smooth piece: half the distance to the nearest other knot.
    let room = curve
        .knots()
        .iter()
        .map(|k| (k - t).abs())
        .filter(|g| *g > 1e-14)
        .fold(f64::INFINITY, f64::min);
    let mut delta = cfg.delta0.min(0.5 * room);
    let center = curve.eval(t)?;
    let quotient = |h: f64| -> Result<f64> {
        // Divide by the increments actually represented in floating point.
        let (tf, tb) = (t + h, t - h);
        let fwd = d.distance(&curve.eval(tf)?, &center)?.value;
        let bwd = d.distance(&curve.eval(tb)?, &center)?.value;
        Ok(0.5 * (fwd / (tf - t) + bwd / (t - tb)))
    };

    let mut prev_q = quotient(delta)?;
    let mut prev_e = prev_q;
    let mut steps = 1;
    let limit = cfg.halvings + cfg.max_extra;
    for k in 1..=limit {
        let h = 0.5 * delta;
        if h < 1e-13 {
            break;
        }
        delta = h;
        let q = quotient(delta)?;
        steps += 1;
        let e = if cfg.extrapolate { (4.0 * q - prev_q) / 3.0 } else { q };
        if k >= cfg.halvings && (e - prev_e).abs() <= DERIVATIVE_RTOL * e.abs() {
            return Ok(MetricDerivative { value: e, converged: true, steps, delta });
        }
        prev_q = q;
        prev_e = e;
    }
    Ok(MetricDerivative { value: prev_e, converged: false, steps, delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivativeSample {
    pub t: f64,
    pub metric: f64,
    pub analytic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivativeEqualityReport {
    pub samples: Vec<DerivativeSample>,
    pub max_diff: f64,
    pub mean_diff: f64,
    /// Largest |γ̇|(t) − ‖γ′(t)‖_g; the minimality direction asks for ≤ 1e−3.
    pub max_excess: f64,
    pub pass: bool,
}

pub const DERIVATIVE_EQUALITY_TOL: f64 = 1e-2;
pub const MINIMALITY_TOL: f64 = 1e-3;

/// Compares |γ̇|(t) against ‖γ′(t)‖_g at each of `ts`.
pub fn derivative_equality_report(
    field: &MetricField,
    curve: &Curve,
    ts: &[f64],
    d: &dyn DistanceMap,
    cfg: &MetricDerivativeConfig,
) -> Result<DerivativeEqualityReport> {
    if !curve.declared_ac() {
        return Err(Error::NotAbsolutelyContinuous("curve is declared non-AC".into()));
    }
    let mut samples = Vec::with_capacity(ts.len());
    for &t in ts {
        let v = curve
            .derivative(t)?
            .ok_or_else(|| Error::Invalid(format!("no derivative at t = {t}; sample times must avoid knots")))?;
        let analytic = field.norm(&curve.eval(t)?, &v)?;
        let m = metric_derivative(d, curve, t, cfg)?;
        samples.push(DerivativeSample { t, metric: m.value, analytic, converged: m.converged });
    }
    let diffs: Vec<f64> = samples.iter().map(|s| (s.metric - s.analytic).abs()).collect();
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let mean_diff = if diffs.is_empty() { 0.0 } else { diffs.iter().sum::<f64>() / diffs.len() as f64 };
    let max_excess = samples.iter().map(|s| s.metric - s.analytic).fold(f64::NEG_INFINITY, f64::max);
    let pass = max_diff < DERIVATIVE_EQUALITY_TOL && max_excess <= MINIMALITY_TOL;
    Ok(DerivativeEqualityReport { samples, max_diff, mean_diff, max_excess, pass })
}

// ---------------------------------------------------------------------------
// Mollification

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MollifyConfig {
    pub target_index: usize,
    pub grid_res: usize,
    /// Random points added to the node and cell-center check.
    pub check_samples: usize,
    pub seed: u64,
    pub bisection_steps: usize,
}

impl MollifyConfig {
    pub fn new(target_index: usize) -> Self {
        MollifyConfig { target_index, grid_res: 64, check_samples: 1000, seed: 42, bisection_steps: 12 }
    }

    /// The band [(n−1)/n, (n+1)/n].
    pub fn band(&self) -> (f64, f64) {
        let n = self.target_index as f64;
        ((n - 1.0) / n, (n + 1.0) / n)
    }
}

/// Kernel support radius in stencil steps.
const STENCIL_STEPS: i64 = 12;

#[derive(Debug, Clone)]
pub struct MollifiedMetric {
    pub base: MetricField,
    pub kernel_width: f64,
    pub grid_res: usize,
    pub target_index: usize,
    pub effective_domain: BoxDomain,
    /// The sampled-grid field gₙ.
    pub field: MetricField,
    /// Extremes of ‖v‖_{gₙ}/‖v‖_g seen while accepting the width.
    pub ratio_range: (f64, f64),
}

impl MollifiedMetric {
    pub fn band(&self) -> (f64, f64) {
        let n = self.target_index as f64;
        ((n - 1.0) / n, (n + 1.0) / n)
    }

    /// Ratios ‖v‖_{gₙ}/‖v‖_g at random points of the effective domain.
    pub fn ratio_samples(&self, count: usize, rng: &mut SplitMix64) -> Result<Vec<f64>> {
        let n = self.base.dim();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let q = self.effective_domain.sample(rng);
            let v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            out.push(self.field.norm(&q, &v)? / self.base.norm(&q, &v)?);
        }
        Ok(out)
    }
}

fn kernel_stencil(n: usize, eps: f64) -> Vec<(Vec<f64>, f64)> {
    let h = eps / STENCIL_STEPS as f64;
    let span = (2 * STENCIL_STEPS + 1) as usize;
    let mut out = Vec::new();
    for k in 0..span.pow(n as u32) {
        let mut rem = k;
        let mut y = vec![0.0; n];
        for slot in y.iter_mut() {
            *slot = ((rem % span) as i64 - STENCIL_STEPS) as f64 * h;
            rem /= span;
        }
        let r2 = y.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
        if r2 < 1.0 {
            out.push((y, (1.0 - r2).powi(4)));
        }
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

/// Convolution of `field` with the bump of radius `eps` (stencil spacing
/// eps/12), sampled on a grid
/// over the domain shrunk by `eps` and interpolated.
pub fn mollify_with_width(field: &MetricField, eps: f64, grid_res: usize) -> Result<MetricField> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("kernel width must be positive, got {eps}")));
    }
    let n = field.dim();
    let inner = field
        .domain
        .shrink(eps)
        .map_err(|_| Error::Resolution(format!("kernel width {eps} leaves no effective domain")))?;
    let stencil = kernel_stencil(n, eps);
    let nodes = inner.grid(grid_res);
    let ncomp = n * (n + 1) / 2;
    let mut components = vec![Vec::with_capacity(nodes.len()); ncomp];
    let mut q = vec![0.0; n];
    for x in &nodes {
        let mut acc = Mat::zeros(n);
        for (y, w) in &stencil {
            for i in 0..n {
                q[i] = x[i] + y[i];
            }
            field.domain.clamp(&mut q);
            acc.add_scaled(&field.eval(&q)?, *w);
        }
        let mut c = 0;
        for i in 0..n {
            for j in i..n {
                components[c].push(acc.a[i][j]);
                c += 1;
            }
        }
    }
    let spec = MetricSpec {
        kind: MetricKind::SampledGrid,
        dim: n,
        domain: DomainSpec { min: inner.min.clone(), max: inner.max.clone() },
        omega: None,
        entries: None,
        grid: Some(GridData {
            shape: vec![grid_res.max(2); n],
            min: inner.min.clone(),
            max: inner.max.clone(),
            components,
        }),
        regularity: None,
        name: Some(format!("mollified({}, eps={eps})", field.name)),
    };
    build_metric(&spec)
}

fn ratio_extremes(base: &MetricField, cand: &MetricField, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in points {
        let (a, b) = generalized_eigen_extremes(&cand.eval(p)?, &base.eval(p)?)
            .ok_or_else(|| Error::NotPositiveDefinite { point: p.clone(), eigenvalue: f64::NAN })?;
        lo = lo.min(a.max(0.0).sqrt());
        hi = hi.max(b.sqrt());
    }
    Ok((lo, hi))
}

fn check_points(bx: &BoxDomain, grid_res: usize, samples: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let mut pts = bx.grid(grid_res);
    let cells = grid_res.max(2) - 1;
    let half: Vec<f64> = (0..bx.dim()).map(|i| 0.5 * bx.side(i) / cells as f64).collect();
    if let Ok(centers) = BoxDomain::new(
        bx.min.iter().zip(&half).map(|(m, h)| m + h).collect(),
        bx.max.iter().zip(&half).map(|(m, h)| m - h).collect(),
    ) {
        pts.extend(centers.grid(cells));
    }
    pts.extend((0..samples).map(|_| bx.sample(rng)));
    pts
}

/// gₙ with the widest kernel whose norm ratios stay in [(n−1)/n, (n+1)/n].
pub fn mollify_metric(field: &MetricField, cfg: &MollifyConfig) -> Result<MollifiedMetric> {
    if cfg.target_index < 2 {
        return Err(Error::Invalid("target index must be at least 2".into()));
    }
    if cfg.grid_res < 4 {
        return Err(Error::Invalid("mollification grid needs at least 4 nodes per axis".into()));
    }
    let (band_lo, band_hi) = cfg.band();
    let spacing = field.domain.min_side() / (cfg.grid_res - 1) as f64;
    let attempt = |eps: f64| -> Result<Option<(MetricField, (f64, f64))>> {
        let cand = mollify_with_width(field, eps, cfg.grid_res)?;
        let mut rng = SplitMix64::new(cfg.seed).fork(0x6d6f6c6c);
        let pts = check_points(&cand.domain, cfg.grid_res, cfg.check_samples, &mut rng);
        let r = ratio_extremes(field, &cand, &pts)?;
        Ok((r.0 >= band_lo && r.1 <= band_hi).then_some((cand, r)))
    };

    let (mut lo, mut hi) = (2.0 * spacing, 0.25 * field.domain.min_side());
    if lo >= hi {
        return Err(Error::Resolution(format!("grid of {} nodes is too coarse for this domain", cfg.grid_res)));
    }
    let mut best = attempt(hi)?.map(|ok| (hi, ok));
    if best.is_none() {
        let Some(ok) = attempt(lo)? else {
            return Err(Error::Resolution(format!(
                "no kernel width down to {lo:e} meets the n = {} band; increase the grid resolution",
                cfg.target_index
            )));
        };
        best = Some((lo, ok));
        for _ in 0..cfg.bisection_steps {
            let mid = 0.5 * (lo + hi);
            match attempt(mid)? {
                Some(ok) => {
                    lo = mid;
                    best = Some((mid, ok));
                }
                None => hi = mid,
            }
        }
    }
    let (eps, (mol, ratio_range)) = best.expect("accepted width");
    Ok(MollifiedMetric {
        base: field.clone(),
        kernel_width: eps,
        grid_res: cfg.grid_res,
        target_index: cfg.target_index,
        effective_domain: mol.domain.clone(),
        field: mol,
        ratio_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistancePairCheck {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub d: f64,
    pub dn: f64,
    pub ratio: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MollifiedDistanceReport {
    pub target_index: usize,
    pub band: (f64, f64),
    pub pairs: Vec<DistancePairCheck>,
    /// max |dₙ/d − 1| over the pairs.
    pub max_deviation: f64,
    pub pass: bool,
}

/// Checks (n−1)/n·d − s ≤ dₙ ≤ (n+1)/n·d + s with s = 3× the combined solver error.
///
/// Both distances are taken over paths in the effective domain, so the base
/// field is restricted to it first.
pub fn mollified_distance_check(
    mol: &MollifiedMetric,
    pairs: usize,
    cfg: &DistanceConfig,
    rng: &mut SplitMix64,
) -> Result<MollifiedDistanceReport> {
    let mut spec = mol.base.spec().clone();
    spec.domain = DomainSpec { min: mol.effective_domain.min.clone(), max: mol.effective_domain.max.clone() };
    let base = MetricField::from_spec(&spec)?;
    let (lo, hi) = mol.band();
    let mut out = Vec::with_capacity(pairs);
    let min_sep = 1e-3 * mol.effective_domain.diameter();
    while out.len() < pairs {
        let p = mol.effective_domain.sample(rng);
        let q = mol.effective_domain.sample(rng);
        if dist(&p, &q) < min_sep {
            continue;
        }
        let a = distance(&base, &p, &q, cfg)?;
        let b = distance(&mol.field, &p, &q, cfg)?;
        let slack = 3.0 * (a.error_estimate + b.error_estimate);
        let pass = lo * a.value - slack <= b.value && b.value <= hi * a.value + slack;
        out.push(DistancePairCheck { p, q, d: a.value, dn: b.value, ratio: b.value / a.value, slack, pass });
    }
    let max_deviation = out.iter().map(|c| (c.ratio - 1.0).abs()).fold(0.0, f64::max);
    let pass = out.iter().all(|c| c.pass);
    Ok(MollifiedDistanceReport { target_index: mol.target_index, band: (lo, hi), pairs: out, max_deviation, pass })
}

// ---------------------------------------------------------------------------
// Piecewise-smooth approximation λ_η

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApproxPiece {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct SmoothApproxResult {
    pub curve: Curve,
    pub eta: f64,
    pub chart_count: usize,
    /// 10·N·η.
    pub dac_bound: f64,
    pub dac_measured: f64,
    pub dac: VariationalDistance,
    pub pieces: Vec<ApproxPiece>,
}

/// Samples per unit parameter used to place the cover partition.
const COVER_SAMPLES: usize = 4096;
const GL_NODES: usize = 32;
const MIN_KERNEL: f64 = 1e-9;

#[derive(Debug)]
struct Mollified1d {
    gamma: Curve,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Mollified1d {
    fn new(gamma: &Curve) -> Self {
        let (nodes, weights) = gauss_legendre(GL_NODES);
        Mollified1d { gamma: gamma.clone(), nodes, weights }
    }

    // ∫ k(s) γ(t − s) ds over |s| ≤ eps, split where t − s crosses a knot.
    fn convolve(&self, t: f64, eps: f64, kernel: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let mut cuts = vec![-eps, eps];
        for &k in self.gamma.knots() {
            let s = t - k;
            if s > -eps && s < eps {
                cuts.push(s);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut acc = vec![0.0; self.gamma.dim()];
        for w in cuts.windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            if h <= 0.0 {
                continue;
            }
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                let s = c + h * x;
                let g = self.gamma.eval((t - s).clamp(0.0, 1.0))?;
                let f = wt * h * kernel(s);
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += f * v;
                }
            }
        }
        Ok(acc)
    }

    fn value(&self, t: f64, eps: f64) -> Result<Vec<f64>> {
        // (315/256)/ε · (1 − (s/ε)²)⁴ integrates to one.
        let c = 315.0 / 256.0 / eps;
        self.convolve(t, eps, |s| {
            let x = s / eps;
            c * (1.0 - x * x).powi(4)
        })
    }

    fn derivative(&self, t: f64, eps: f64) -> Result<Vec<f64>> {
        let c = -8.0 * 315.0 / 256.0 / (eps * eps);
        self.convolve(t, eps, |s| {
            let x = s / eps;
            c * x * (1.0 - x * x).powi(3)
        })
    }
}

#[derive(Debug)]
struct Piece {
    a: f64,
    b: f64,
    delta: f64,
    eps: f64,
    start: Vec<f64>,
    end: Vec<f64>,
    /// γ_ε(a + δ) and γ_ε(b − δ).
    join_a: Vec<f64>,
    join_b: Vec<f64>,
}

#[derive(Debug)]
struct LambdaEta {
    moll: Mollified1d,
    pieces: Vec<Piece>,
}

impl LambdaEta {
    fn piece(&self, t: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.b < t);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }
}

impl CurveMap for LambdaEta {
    fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let p = self.piece(t);
        if t <= p.a + p.delta {
            let s = (t - p.a) / p.delta;
            Ok(p.start.iter().zip(&p.join_a).map(|(x, y)| x + s * (y - x)).collect())
        } else if t >= p.b - p.delta {
            // Written from the far end so that λ(b) = γ(b) exactly.
            let s = (p.b - t) / p.delta;
            Ok(p.end.iter().zip(&p.join_b).map(|(x, y)| x + s * (y - x)).collect())
        } else {
            self.moll.value(t, p.eps)
        }
    }

    fn derivative(&self, t: f64) -> Result<Option<Vec<f64>>> {
        let p = self.piece(t);
        if t < p.a + p.delta {
            Ok(Some(p.start.iter().zip(&p.join_a).map(|(x, y)| (y - x) / p.delta).collect()))
        } else if t > p.b - p.delta {
            Ok(Some(p.join_b.iter().zip(&p.end).map(|(x, y)| (y - x) / p.delta).collect()))
        } else {
            self.moll.derivative(t, p.eps).map(Some)
        }
    }
}

/// Greedy partition of [0, 1] into pieces whose images each lie in one box.
pub fn cover_partition(curve: &Curve, boxes: &[BoxDomain]) -> Result<Vec<f64>> {
    let mut ts: Vec<f64> = (0..=COVER_SAMPLES).map(|i| i as f64 / COVER_SAMPLES as f64).collect();
    ts.extend_from_slice(curve.knots());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pts: Vec<Vec<f64>> = ts.iter().map(|&t| curve.eval(t)).collect::<Result<_>>()?;
    let last = ts.len() - 1;
    let mut breaks = vec![0.0];
    let mut start = 0;
    while start < last {
        let mut reach = None;
        for bx in boxes.iter().filter(|b| b.contains(&pts[start])) {
            let mut k = start;
            while k < last && bx.contains(&pts[k + 1]) {
                k += 1;
            }
            reach = Some(reach.map_or(k, |r: usize| r.max(k)));
        }
        match reach {
            None => return Err(Error::Cover { t: ts[start] }),
            Some(k) if k == start => return Err(Error::Cover { t: ts[start + 1] }),
            Some(k) => {
                breaks.push(ts[k]);
                start = k;
            }
        }
    }
    Ok(breaks)
}

/// Cumulative g-length and Euclidean length on a refined grid of [a, b].
struct Cumulative {
    ts: Vec<f64>,
    g: Vec<f64>,
    e: Vec<f64>,
}

fn cumulative(field: &MetricField, gamma: &Curve, a: f64, b: f64, step: f64, mu0: f64) -> Result<Cumulative> {
    let quad = QuadratureConfig { abs_tol: 1e-3 * step, rel_tol: 1e-10, max_panels: 200 };
    let cell = |lo: f64, hi: f64| -> Result<(f64, f64)> {
        let mut breaks = vec![lo, hi];
        breaks.extend(gamma.knots().iter().copied().filter(|k| *k > lo && *k < hi));
        breaks.sort_by(f64::total_cmp);
        let g = integrate(
            |t| {
                let Some(v) = gamma.derivative(t)? else { return Ok(None) };
                Ok(Some(field.norm(&gamma.eval(t)?, &v)?))
            },
            &breaks,
            &quad,
        )?;
        let e = integrate(
            |t| Ok(gamma.derivative(t)?.map(|v| crate::linalg::norm(&v))),
            &breaks,
            &quad,
        )?;
        Ok((g.value, e.value))
    };
    let mut stack: Vec<(f64, f64)> = Vec::new();
    let cells = 1024;
    for i in (0..cells).rev() {
        let lo = a + (b - a) * i as f64 / cells as f64;
        let hi = if i + 1 == cells { b } else { a + (b - a) * (i + 1) as f64 / cells as f64 };
        stack.push((lo, hi));
    }
    let mut out = Cumulative { ts: vec![a], g: vec![0.0], e: vec![0.0] };
    while let Some((lo, hi)) = stack.pop() {
        let (g, e) = cell(lo, hi)?;
        let coarse = g > step || mu0 * e > step;
        if coarse && hi - lo > 1e-12 && out.ts.len() + stack.len() < 400_000 {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
            continue;
        }
        out.ts.push(hi);
        out.g.push(out.g.last().unwrap() + g);
        out.e.push(out.e.last().unwrap() + e);
    }
    Ok(out)
}

impl Cumulative {
    // Upper bound on sup over windows [s, s + w] ⊂ [a, b] of the increment.
    fn window_sup(&self, vals: &[f64], w: f64) -> f64 {
        let n = self.ts.len();
        let mut best = 0.0f64;
        let mut k = 0;
        for i in 0..n - 1 {
            let target = self.ts[i + 1] + w;
            while k < n - 1 && self.ts[k] < target {
                k += 1;
            }
            best = best.max(vals[k] - vals[i]);
            if k == n - 1 {
                break;
            }
        }
        best
    }
}

/// λ_η: mollified pieces joined to γ by straight lines, with D_ac(γ, λ_η) measured.
pub fn smooth_approximation(
    field: &MetricField,
    gamma: &Curve,
    eta: f64,
    chart_boxes: &[BoxDomain],
    d: &dyn DistanceMap,
    quad: &QuadratureConfig,
) -> Result<SmoothApproxResult> {
    if !(eta > 0.0) {
        return Err(Error::Invalid(format!("eta must be positive, got {eta}")));
    }
    if !gamma.declared_ac() {
        return Err(Error::NotAbsolutelyContinuous("curve is declared non-AC".into()));
    }
    if gamma.dim() != field.dim() {
        return Err(Error::Dimension { expected: field.dim(), got: gamma.dim() });
    }
    let boxes: Vec<BoxDomain> = chart_boxes.iter().filter_map(|b| b.intersect(&field.domain)).collect();
    let breaks = cover_partition(gamma, &boxes)?;
    // Euclidean thresholds carry the factor 1/μ₀ so the g-estimates hold.
    let mu0 = field.bounds()?.mu0;
    let moll = Mollified1d::new(gamma);
    let speed_quad = QuadratureConfig { abs_tol: 1e-3 * eta, rel_tol: 1e-10, max_panels: 4000 };

    let mut pieces = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cum = cumulative(field, gamma, a, b, eta / 8.0, mu0)?;
        let mut delta = 0.49 * (b - a);
        loop {
            let g_ok = cum.window_sup(&cum.g, 2.0 * delta) < eta;
            let e_ok = mu0 * cum.window_sup(&cum.e, 2.0 * delta) < eta;
            if g_ok && e_ok {
                break;
            }
            delta *= 0.5;
            if delta < 1e-12 {
                return Err(Error::Resolution(format!("no join length found on [{a}, {b}]")));
            }
        }

        let (lo, hi) = (a + delta, b - delta);
        let mut inner_breaks = vec![lo, hi];
        inner_breaks.extend(gamma.knots().iter().copied().filter(|k| *k > lo && *k < hi));
        inner_breaks.sort_by(f64::total_cmp);
        let probes: Vec<f64> = (0..=512).map(|i| lo + (hi - lo) * i as f64 / 512.0).collect();
        let mut eps = 0.5 * delta;
        loop {
            let mut uniform = 0.0f64;
            for &t in &probes {
                uniform = uniform.max(dist(&moll.value(t, eps)?, &gamma.eval(t)?));
            }
            let ok_uniform = mu0 * uniform < eta;
            let ok_l1 = ok_uniform && {
                let l1 = integrate(
                    |t| {
                        let Some(v) = gamma.derivative(t)? else { return Ok(None) };
                        let sg = field.norm(&gamma.eval(t)?, &v)?;
                        let se = field.norm(&moll.value(t, eps)?, &moll.derivative(t, eps)?)?;
                        Ok(Some((sg - se).abs()))
                    },
                    &inner_breaks,
                    &speed_quad,
                )?;
                l1.value < eta
            };
            if ok_l1 {
                break;
            }
            eps *= 0.5;
            if eps < MIN_KERNEL {
                return Err(Error::Resolution(format!(
                    "eta = {eta:e} needs a kernel narrower than {MIN_KERNEL:e} on [{a}, {b}]"
                )));
            }
        }
        pieces.push(Piece {
            a,
            b,
            delta,
            eps,
            start: gamma.eval(a)?,
            end: gamma.eval(b)?,
            join_a: moll.value(lo, eps)?,
            join_b: moll.value(hi, eps)?,
        });
    }

    let mut knots = Vec::new();
    for p in &pieces {
        let (lo, hi) = (p.a + p.delta, p.b - p.delta);
        knots.extend([p.a, lo, hi, p.b]);
        // Smoothed corners are narrow; quadrature has to split around them.
        for &k in gamma.knots().iter().filter(|&&k| k > lo && k < hi) {
            knots.extend([(k - p.eps).max(lo), k, (k + p.eps).min(hi)]);
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let summary: Vec<ApproxPiece> =
        pieces.iter().map(|p| ApproxPiece { a: p.a, b: p.b, delta: p.delta, eps: p.eps }).collect();
    let n = pieces.len();
    let lambda = Curve::custom(gamma.dim(), Arc::new(LambdaEta { moll, pieces }), &knots, true)?;
    let dac = variational_distance(field, gamma, &lambda, d, quad)?;
    Ok(SmoothApproxResult {
        curve: lambda,
        eta,
        chart_count: n,
        dac_bound: 10.0 * n as f64 * eta,
        dac_measured: dac.value,
        dac,
        pieces: summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{EuclideanDistance, SolverDistance};

    fn square(r: f64) -> BoxDomain {
        BoxDomain::cube(2, -r, r)
    }

    #[test]
    fn derivative_of_segment_is_constant_speed() {
        let c = Curve::segment(&[0.0, 0.0], &[3.0, 4.0]);
        let m = metric_derivative(&EuclideanDistance, &c, 0.3, &MetricDerivativeConfig::default()).unwrap();
        assert!((m.value - 5.0).abs() < 1e-12, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn derivative_of_cantor_graph_in_removed_interval() {
        let c = Curve::cantor_graph();
        let m = metric_derivative(&EuclideanDistance, &c, 0.5, &MetricDerivativeConfig::default()).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12, "{m:?}");
    }

    #[test]
    fn derivative_under_exponential_metric() {
        let f = MetricField::from_spec(&MetricSpec::conformal(&square(2.0), "exp(x1)")).unwrap();
        let c = Curve::expr(&["t", "0"], None, &[]).unwrap();
        let d = SolverDistance::new(&f, DistanceConfig::default());
        let m = metric_derivative(&d, &c, 0.5, &MetricDerivativeConfig::default()).unwrap();
        assert!((m.value - 0.5f64.exp()).abs() < 1e-3, "{m:?}");
    }

    #[test]
    fn derivative_rejects_endpoints() {
        let c = Curve::segment(&[0.0, 0.0], &[1.0, 0.0]);
        let cfg = MetricDerivativeConfig::default();
        assert!(metric_derivative(&EuclideanDistance, &c, 0.0, &cfg).is_err());
        assert!(metric_derivative(&EuclideanDistance, &c, 1.0, &cfg).is_err());
    }

    #[test]
    fn derivative_equality_for_euclidean_line() {
        let f = MetricField::euclidean(&square(2.0));
        let c = Curve::expr(&["2*t - 1", "0.5*t"], None, &[]).unwrap();
        let ts: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
        let r = derivative_equality_report(&f, &c, &ts, &EuclideanDistance, &MetricDerivativeConfig::default())
            .unwrap();
        assert!(r.max_diff < 1e-6, "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn derivative_equality_for_kinked_conformal_metric() {
        let f = MetricField::from_spec(&MetricSpec::conformal(&square(2.0), "1 + abs(x1)")).unwrap();
        let c = Curve::expr(&["2*t - 1", "0"], None, &[]).unwrap();
        let d = SolverDistance::new(&f, DistanceConfig::default());
        let ts: Vec<f64> = (0..20).map(|i| 0.03 + 0.94 * i as f64 / 19.0).collect();
        let r = derivative_equality_report(&f, &c, &ts, &d, &MetricDerivativeConfig::default()).unwrap();
        for s in &r.samples {
            let oracle = 2.0 * (1.0 + (2.0 * s.t - 1.0).abs());
            assert!((s.analytic - oracle).abs() < 1e-9);
        }
        assert!(r.max_diff < 1e-2, "{r:?}");
        assert!(r.max_excess <= 1e-3);
    }

    #[test]
    fn mollifying_a_constant_is_exact() {
        let f = MetricField::from_spec(&MetricSpec::constant(&square(2.0), &[vec![4.0, 0.0], vec![0.0, 9.0]]))
            .unwrap();
        let mut cfg = MollifyConfig::new(7);
        cfg.grid_res = 16;
        let m = mollify_metric(&f, &cfg).unwrap();
        let g = m.field.eval(&[0.1, -0.3]).unwrap();
        assert!((g.a[0][0] - 4.0).abs() < 1e-12 && (g.a[1][1] - 9.0).abs() < 1e-12);
        assert!(g.a[0][1].abs() < 1e-12);
        assert!((m.ratio_range.0 - 1.0).abs() < 1e-12 && (m.ratio_range.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mollified_kink_exceeds_one_at_origin() {
        let f = MetricField::from_spec(&MetricSpec::conformal(&square(2.0), "1 + abs(x1)")).unwrap();
        let eps = 0.3;
        let m = mollify_with_width(&f, eps, 35).unwrap();
        let got = m.eval(&[0.0, 0.0]).unwrap().a[0][0];
        // Direct convolution oracle: midpoint rule on a 200 × 200 grid over the kernel square.
        let k = 200;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let y1 = -eps + 2.0 * eps * (i as f64 + 0.5) / k as f64;
                let y2 = -eps + 2.0 * eps * (j as f64 + 0.5) / k as f64;
                let r2 = (y1 * y1 + y2 * y2) / (eps * eps);
                if r2 < 1.0 {
                    let w = (1.0 - r2).powi(4);
                    num += w * (1.0 + y1.abs()).powi(2);
                    den += w;
                }
            }
        }
        let oracle = num / den;
        assert!(oracle > 1.0);
        assert!(got > 1.0);
        assert!((got - oracle).abs() < 2e-3, "{got} vs {oracle}");
    }

    #[test]
    fn sandwich_holds_at_target_ten() {
        let f = MetricField::from_spec(&MetricSpec::conformal(&square(2.0), "1 + abs(x1)")).unwrap();
        let mut cfg = MollifyConfig::new(10);
        cfg.grid_res = 32;
        cfg.bisection_steps = 6;
        let m = mollify_metric(&f, &cfg).unwrap();
        let mut rng = SplitMix64::new(7);
        for r in m.ratio_samples(1000, &mut rng).unwrap() {
            assert!((0.9 - 1e-3..=1.1 + 1e-3).contains(&r), "{r}");
        }
    }

    #[test]
    fn euclidean_mollification_keeps_distances() {
        let f = MetricField::euclidean(&square(1.0));
        let mut cfg = MollifyConfig::new(5);
        cfg.grid_res = 12;
        let m = mollify_metric(&f, &cfg).unwrap();
        let mut rng = SplitMix64::new(3);
        let r = mollified_distance_check(&m, 4, &DistanceConfig::default(), &mut rng).unwrap();
        for c in &r.pairs {
            assert!((c.ratio - 1.0).abs() < 1e-9, "{c:?}");
        }
        assert!(r.pass);
    }

    #[test]
    fn cover_partition_splits_between_boxes() {
        let c = Curve::segment(&[-1.0, 0.0], &[1.0, 0.0]);
        let boxes = [
            BoxDomain::new(vec![-1.5, -1.0], vec![0.25, 1.0]).unwrap(),
            BoxDomain::new(vec![-0.25, -1.0], vec![1.5, 1.0]).unwrap(),
        ];
        let b = cover_partition(&c, &boxes).unwrap();
        assert_eq!(b.len(), 3);
        assert!((b[1] - 0.625).abs() < 1e-3);
        let gap = [BoxDomain::new(vec![-1.5, -1.0], vec![0.0, 1.0]).unwrap()];
        assert!(matches!(cover_partition(&c, &gap), Err(Error::Cover { .. })));
    }

    #[test]
    fn affine_curve_is_reproduced() {
        let f = MetricField::euclidean(&square(2.0));
        let c = Curve::expr(&["t", "0"], None, &[]).unwrap();
        let r = smooth_approximation(&f, &c, 1e-2, std::slice::from_ref(&f.domain), &EuclideanDistance, &QuadratureConfig::smooth())
            .unwrap();
        assert!(r.dac_measured < 1e-2, "{}", r.dac_measured);
        assert_eq!(r.chart_count, 1);
    }

    #[test]
    fn kinked_curve_meets_the_bound() {
        let f = MetricField::euclidean(&square(2.0));
        let c = Curve::expr(&["t", "abs(t - 0.5)"], None, &[0.5]).unwrap();
        let r = smooth_approximation(&f, &c, 1e-2, std::slice::from_ref(&f.domain), &EuclideanDistance, &QuadratureConfig::smooth())
            .unwrap();
        assert!(r.dac_measured <= 0.1 + 1e-6, "{}", r.dac_measured);
        let end = r.curve.eval(1.0).unwrap();
        let start = r.curve.eval(0.0).unwrap();
        assert!(dist(&end, &c.eval(1.0).unwrap()) <= 1e-12);
        assert!(dist(&start, &c.eval(0.0).unwrap()) <= 1e-12);
        let eps = r.pieces[0].eps;
        assert!(r.curve.knots().iter().any(|k| (k - (0.5 - eps)).abs() < 1e-15));
        assert!(r.curve.knots().iter().any(|k| (k - (0.5 + eps)).abs() < 1e-15));
    }

    #[test]
    fn singular_speed_curve_meets_the_bound() {
        let f = MetricField::euclidean(&square(2.0));
        let c = Curve::expr(&["t", "t^(2/3)"], Some(&["1", "(2/3)*t^(-1/3)"]), &[]).unwrap();
        let r = smooth_approximation(&f, &c, 1e-2, std::slice::from_ref(&f.domain), &EuclideanDistance, &QuadratureConfig::smooth())
            .unwrap();
        assert!(r.dac_measured <= 0.1 + 1e-6, "{}", r.dac_measured);
        // Independent check of the sup term on 10⁵ nodes.
        let sup = (0..=100_000)
            .map(|i| {
                let t = i as f64 / 100_000.0;
                dist(&c.eval(t).unwrap(), &r.curve.eval(t).unwrap())
            })
            .fold(0.0, f64::max);
        assert!(sup <= r.dac.sup_term + 1e-9);
    }
}
