//! Intrinsic distance of a metric field: lattice Dijkstra, polyline descent,
//! axiom checks and empirical equivalence constants.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::metric::{pointwise_factor_pair, BoxDomain, MetricField, DEFAULT_BOUNDS_RES};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistanceConfig {
    pub grid_res: usize,
    pub polyline_points: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub fd_step: f64,
    pub levels: usize,
    /// Shrink the lattice box and polyline size with the endpoint separation.
    pub scale_to_chord: bool,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            grid_res: 64,
            polyline_points: 33,
            max_iters: 500,
            step_tol: 1e-8,
            fd_step: 1e-6,
            levels: 2,
            scale_to_chord: true,
        }
    }
}

impl DistanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_res < 2 || self.polyline_points < 3 || self.max_iters == 0 || self.levels == 0 {
            return Err(Error::Invalid(
                "distance config needs gridRes ≥ 2, polylinePoints ≥ 3, maxIters ≥ 1, levels ≥ 1".into(),
            ));
        }
        if !(self.step_tol > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::Invalid("stepTol and fdStep must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistanceResult {
    pub value: f64,
    pub error_estimate: f64,
    pub path: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Set when the line search failed before the convergence test.
    pub stalled: bool,
    /// Discrete length after each accepted descent step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

/// A distance value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub error: f64,
}

/// Any distance function on points of R^n.
pub trait DistanceMap: Sync {
    fn distance(&self, p: &[f64], q: &[f64]) -> Result<DistanceEstimate>;

    /// A cheap value known to be ≥ the distance, if available.
    fn upper_bound(&self, _p: &[f64], _q: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanDistance;

impl DistanceMap for EuclideanDistance {
    fn distance(&self, p: &[f64], q: &[f64]) -> Result<DistanceEstimate> {
        Ok(DistanceEstimate { value: dist(p, q), error: 0.0 })
    }

    fn upper_bound(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        Some(dist(p, q))
    }
}

/// √d of the Euclidean distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct SnowflakeDistance;

impl DistanceMap for SnowflakeDistance {
    fn distance(&self, p: &[f64], q: &[f64]) -> Result<DistanceEstimate> {
        Ok(DistanceEstimate { value: dist(p, q).sqrt(), error: 0.0 })
    }
}

/// Distance of a metric field computed by [`distance`], with an optional memo.
pub struct SolverDistance<'a> {
    pub field: &'a MetricField,
    pub cfg: DistanceConfig,
    cache: Option<Mutex<HashMap<Vec<u64>, DistanceEstimate>>>,
}

impl<'a> SolverDistance<'a> {
    pub fn new(field: &'a MetricField, cfg: DistanceConfig) -> Self {
        SolverDistance { field, cfg, cache: None }
    }

    /// Memoized on the exact bits of both endpoints, so results are
    /// identical to uncached evaluation.
    pub fn cached(field: &'a MetricField, cfg: DistanceConfig) -> Self {
        SolverDistance { field, cfg, cache: Some(Mutex::new(HashMap::new())) }
    }
}

impl DistanceMap for SolverDistance<'_> {
    fn distance(&self, p: &[f64], q: &[f64]) -> Result<DistanceEstimate> {
        let key: Option<Vec<u64>> =
            self.cache.as_ref().map(|_| p.iter().chain(q).map(|v| v.to_bits()).collect());
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.lock().expect("cache lock").get(key) {
                return Ok(*hit);
            }
        }
        let r = distance(self.field, p, q, &self.cfg)?;
        let est = DistanceEstimate { value: r.value, error: r.error_estimate };
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            cache.lock().expect("cache lock").insert(key, est);
        }
        Ok(est)
    }

    /// Length of the straight chord, which is itself a candidate path.
    fn upper_bound(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        polyline_length(self.field, &[p.to_vec(), q.to_vec()]).ok().map(|(v, e)| v + e)
    }
}

/// Closure-backed distance map.
pub struct FnDistance<F>(pub F);

impl<F> DistanceMap for FnDistance<F>
where
    F: Fn(&[f64], &[f64]) -> Result<DistanceEstimate> + Sync,
{
    fn distance(&self, p: &[f64], q: &[f64]) -> Result<DistanceEstimate> {
        (self.0)(p, q)
    }
}

// Relative accuracy, so that very short paths are measured as well as long ones.
fn quad_for(pts: &[Vec<f64>]) -> QuadratureConfig {
    let euclid: f64 = pts.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    QuadratureConfig { abs_tol: 1e-13 * euclid, rel_tol: 1e-10, max_panels: 4000 }
}

/// Σ of segment lengths by three-point Gauss–Legendre.
///
/// A one-point rule underestimates long segments through convex metrics,
/// and descent on it drifts toward such segments.
pub fn discrete_length(field: &MetricField, pts: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut mid = vec![0.0; field.dim()];
    let mut e = vec![0.0; field.dim()];
    for w in pts.windows(2) {
        total += segment_cost(field, &w[0], &w[1], &mut mid, &mut e)?;
    }
    Ok(total)
}

const GL3: [(f64, f64); 3] = [
    (0.1127016653792583, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.8872983346207417, 5.0 / 18.0),
];

#[inline]
fn segment_cost(field: &MetricField, a: &[f64], b: &[f64], x: &mut [f64], e: &mut [f64]) -> Result<f64> {
    for k in 0..a.len() {
        e[k] = b[k] - a[k];
    }
    if field.is_constant() {
        return field.norm(a, e);
    }
    let mut total = 0.0;
    for (s, w) in GL3 {
        for k in 0..a.len() {
            x[k] = a[k] + s * e[k];
        }
        total += w * field.norm(x, e)?;
    }
    Ok(total)
}

// Midpoint rule for the short lattice edges.
#[inline]
fn edge_cost(field: &MetricField, a: &[f64], b: &[f64], mid: &mut [f64], e: &mut [f64]) -> Result<f64> {
    for k in 0..a.len() {
        mid[k] = 0.5 * (a[k] + b[k]);
        e[k] = b[k] - a[k];
    }
    field.norm(mid, e)
}

/// Arc length of a polyline by adaptive quadrature; returns (value, error).
pub fn polyline_length(field: &MetricField, pts: &[Vec<f64>]) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return Ok((0.0, 0.0));
    }
    let m = pts.len() - 1;
    let n = field.dim();
    let breaks: Vec<f64> = (0..=m).map(|i| i as f64).collect();
    let mut x = vec![0.0; n];
    let mut e = vec![0.0; n];
    let r = integrate(
        |t| {
            let i = (t.floor() as usize).min(m - 1);
            let s = t - i as f64;
            for k in 0..n {
                e[k] = pts[i + 1][k] - pts[i][k];
                x[k] = pts[i][k] + s * e[k];
            }
            field.domain.clamp(&mut x);
            field.norm(&x, &e).map(Some)
        },
        &breaks,
        &quad_for(pts),
    )?;
    Ok((r.value, r.error))
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Lattice<'a> {
    bx: &'a BoxDomain,
    res: Vec<usize>,
}

impl Lattice<'_> {
    fn step(&self, axis: usize) -> f64 {
        self.bx.side(axis) / (self.res[axis] - 1) as f64
    }

    fn point(&self, idx: usize) -> Vec<f64> {
        let n = self.res.len();
        let mut p = vec![0.0; n];
        let mut rem = idx;
        for axis in (0..n).rev() {
            let k = rem % self.res[axis];
            rem /= self.res[axis];
            p[axis] = if k == self.res[axis] - 1 {
                self.bx.max[axis]
            } else {
                self.bx.min[axis] + k as f64 * self.step(axis)
            };
        }
        p
    }

    fn nearest(&self, p: &[f64]) -> usize {
        let mut idx = 0;
        for axis in 0..self.res.len() {
            let k = ((p[axis] - self.bx.min[axis]) / self.step(axis)).round();
            let k = (k.max(0.0) as usize).min(self.res[axis] - 1);
            idx = idx * self.res[axis] + k;
        }
        idx
    }

    fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rem = idx;
        for axis in (0..self.res.len()).rev() {
            c[axis] = rem % self.res[axis];
            rem /= self.res[axis];
        }
        c
    }

    fn index(&self, c: &[isize]) -> Option<usize> {
        let mut idx = 0;
        for axis in 0..self.res.len() {
            if c[axis] < 0 || c[axis] as usize >= self.res[axis] {
                return None;
            }
            idx = idx * self.res[axis] + c[axis] as usize;
        }
        Some(idx)
    }

    /// Dijkstra from `src` to `dst`; returns (cost, node path).
    fn shortest(&self, field: &MetricField, src: usize, dst: usize) -> Result<(f64, Vec<usize>)> {
        let n = self.res.len();
        let total: usize = self.res.iter().product();
        let offsets: Vec<[isize; 3]> = (0..3usize.pow(n as u32))
            .filter_map(|k| {
                let mut o = [0isize; 3];
                let mut rem = k;
                for slot in o.iter_mut().take(n) {
                    *slot = (rem % 3) as isize - 1;
                    rem /= 3;
                }
                o.iter().any(|&v| v != 0).then_some(o)
            })
            .collect();
        let points: Vec<Vec<f64>> = (0..total).map(|i| self.point(i)).collect();
        let mut best = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        let mut heap = BinaryHeap::new();
        best[src] = 0.0;
        heap.push(State { cost: 0.0, node: src });
        let mut mid = vec![0.0; n];
        let mut e = vec![0.0; n];
        while let Some(State { cost, node }) = heap.pop() {
            if node == dst {
                break;
            }
            if cost > best[node] {
                continue;
            }
            let c = self.coords(node);
            for o in &offsets {
                let nc: Vec<isize> = (0..n).map(|a| c[a] as isize + o[a]).collect();
                let Some(next) = self.index(&nc) else { continue };
                let w = edge_cost(field, &points[node], &points[next], &mut mid, &mut e)?;
                let cand = cost + w;
                if cand < best[next] {
                    best[next] = cand;
                    prev[next] = node;
                    heap.push(State { cost: cand, node: next });
                }
            }
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != src {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Ok((best[dst], path))
    }
}

fn lattice_path(field: &MetricField, bx: &BoxDomain, res: &[usize], p: &[f64], q: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    let lat = Lattice { bx, res: res.to_vec() };
    let (a, b) = (lat.nearest(p), lat.nearest(q));
    let (_, nodes) = lat.shortest(field, a, b)?;
    let mut path = vec![p.to_vec()];
    for idx in nodes {
        let pt = lat.point(idx);
        if dist(&pt, path.last().unwrap()) > 0.0 {
            path.push(pt);
        }
    }
    if dist(q, path.last().unwrap()) > 0.0 {
        path.push(q.to_vec());
    }
    if path.len() < 2 {
        path.push(q.to_vec());
    }
    let value = discrete_length(field, &path)?;
    Ok((value, path))
}

/// Shortest path on the 8- (2-D) or 26-connected (3-D) lattice over the
/// whole domain, with endpoints joined to their nearest nodes.
pub fn grid_distance(field: &MetricField, p: &[f64], q: &[f64], grid_res: usize) -> Result<DistanceResult> {
    for x in [p, q] {
        if !field.domain.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
    }
    if grid_res < 2 {
        return Err(Error::Invalid("gridRes must be at least 2".into()));
    }
    let res = vec![grid_res; field.dim()];
    let (value, path) = lattice_path(field, &field.domain, &res, p, q)?;
    Ok(DistanceResult { value, error_estimate: 0.0, path, iterations: 0, stalled: false, history: vec![] })
}

struct Descent {
    pts: Vec<Vec<f64>>,
    length: f64,
    iterations: usize,
    stalled: bool,
    history: Vec<f64>,
}

// Central-difference gradient of the discrete length, touching only the
// two segments adjacent to each interior vertex.
fn gradient(field: &MetricField, pts: &mut [Vec<f64>], h: f64, g: &mut [f64]) -> Result<()> {
    let n = field.dim();
    let mut mid = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in 1..pts.len() - 1 {
        for k in 0..n {
            let orig = pts[i][k];
            let mut local = |x: f64, pts: &mut [Vec<f64>]| -> Result<f64> {
                pts[i][k] = x;
                Ok(segment_cost(field, &pts[i - 1], &pts[i], &mut mid, &mut e)?
                    + segment_cost(field, &pts[i], &pts[i + 1], &mut mid, &mut e)?)
            };
            let hi = (orig + h).min(field.domain.max[k]);
            let lo = (orig - h).max(field.domain.min[k]);
            let fp = local(hi, pts)?;
            let fm = local(lo, pts)?;
            pts[i][k] = orig;
            g[(i - 1) * n + k] = if hi > lo { (fp - fm) / (hi - lo) } else { 0.0 };
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS descent on the discrete length with fixed endpoints.
fn descend(field: &MetricField, start: &[Vec<f64>], cfg: &DistanceConfig) -> Result<Descent> {
    let n = field.dim();
    let mut pts: Vec<Vec<f64>> = start.to_vec();
    for p in pts.iter_mut() {
        field.domain.clamp(p);
    }
    let mut length = discrete_length(field, &pts)?;
    let mut history = vec![length];
    let interior = pts.len().saturating_sub(2) * n;
    if interior == 0 {
        return Ok(Descent { pts, length, iterations: 0, stalled: false, history });
    }
    let chord = dist(&pts[0], pts.last().unwrap());
    let scale = if chord > 0.0 { chord } else { 1.0 };
    let h = cfg.fd_step * scale;
    let mean_seg = (pts.windows(2).map(|w| dist(&w[0], &w[1])).sum::<f64>() / (pts.len() - 1) as f64)
        .max(1e-300);

    const MEMORY: usize = 8;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut g = vec![0.0; interior];
    gradient(field, &mut pts, h, &mut g)?;
    let mut quiet = 0;
    let mut stalled = false;
    let mut iterations = 0;
    let mut trial = pts.clone();
    let mut g_new = vec![0.0; interior];
    while iterations < cfg.max_iters {
        iterations += 1;
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &d) / dot(y, s);
            for (dv, yv) in d.iter_mut().zip(y) {
                *dv -= a * yv;
            }
            alphas.push(a);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax == 0.0 {
                break;
            }
            let c = 0.25 * mean_seg / gmax;
            d.iter_mut().for_each(|v| *v *= c);
        }
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.iter().rev()) {
            let b = dot(y, &d) / dot(y, s);
            for (dv, sv) in d.iter_mut().zip(s) {
                *dv += (a - b) * sv;
            }
        }
        if dot(&d, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax == 0.0 {
                break;
            }
            let c = 0.25 * mean_seg / gmax;
            d = g.iter().map(|v| -v * c).collect();
        }
        // Backtracking: halve until strict decrease.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 1..pts.len() - 1 {
                for k in 0..n {
                    let v = pts[i][k] + step * d[(i - 1) * n + k];
                    trial[i][k] = v.clamp(field.domain.min[k], field.domain.max[k]);
                }
            }
            let f = discrete_length(field, &trial)?;
            if f < length {
                accepted = Some(f);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            if !s_hist.is_empty() {
                // Retry from steepest descent before giving up.
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            stalled = true;
            break;
        };
        let rel = (length - f_new) / length.max(1e-300);
        gradient(field, &mut trial, h, &mut g_new)?;
        let s: Vec<f64> = (1..pts.len() - 1)
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .map(|(i, k)| trial[i][k] - pts[i][k])
            .collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        std::mem::swap(&mut pts, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        length = f_new;
        history.push(length);
        if rel < cfg.step_tol {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(Descent { pts, length, iterations, stalled, history })
}

const RELAX_SWEEPS: usize = 10;

/// Gauss–Seidel sweeps that move one vertex at a time by golden-section
/// search along each axis. Needs no gradient, so it makes progress where the
/// metric has a cusp and descent stalls. Returns the new discrete length.
pub fn relax_vertices(field: &MetricField, pts: &mut [Vec<f64>], sweeps: usize, tol: f64) -> Result<f64> {
    let n = field.dim();
    let mut x = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut length = discrete_length(field, pts)?;
    if pts.len() < 3 {
        return Ok(length);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..sweeps {
        let before = length;
        for i in 1..pts.len() - 1 {
            let (head, tail) = pts.split_at_mut(i);
            let prev = &head[i - 1];
            let (mid, rest) = tail.split_at_mut(1);
            let v = &mut mid[0];
            let next = &rest[0];
            let reach = 0.5 * dist(prev, v).min(dist(v, next)).max(1e-12);
            for k in 0..n {
                let mut local = |v: &mut Vec<f64>, t: f64| -> Result<f64> {
                    let keep = v[k];
                    v[k] = t;
                    let c = segment_cost(field, prev, v, &mut x, &mut e)? + segment_cost(field, v, next, &mut x, &mut e)?;
                    v[k] = keep;
                    Ok(c)
                };
                let start = v[k];
                let f0 = local(v, start)?;
                let mut lo = (start - reach).max(field.domain.min[k]);
                let mut hi = (start + reach).min(field.domain.max[k]);
                let mut c = hi - INV_PHI * (hi - lo);
                let mut d = lo + INV_PHI * (hi - lo);
                let mut fc = local(v, c)?;
                let mut fd = local(v, d)?;
                while hi - lo > 1e-9 * reach.max(1e-6) {
                    if fc < fd {
                        hi = d;
                        d = c;
                        fd = fc;
                        c = hi - INV_PHI * (hi - lo);
                        fc = local(v, c)?;
                    } else {
                        lo = c;
                        c = d;
                        fc = fd;
                        d = lo + INV_PHI * (hi - lo);
                        fd = local(v, d)?;
                    }
                }
                let (t, ft) = if fc < fd { (c, fc) } else { (d, fd) };
                if ft < f0 {
                    v[k] = t;
                }
            }
        }
        length = discrete_length(field, pts)?;
        if before - length <= tol * length {
            break;
        }
    }
    Ok(length)
}

/// Polish a polyline by descent on its discrete length.
pub fn refine_polyline(field: &MetricField, path: &[Vec<f64>], cfg: &DistanceConfig) -> Result<DistanceResult> {
    cfg.validate()?;
    if path.len() < 2 {
        return Err(Error::Invalid("path needs at least two points".into()));
    }
    for p in path {
        if !field.domain.contains(p) {
            return Err(Error::Domain { point: p.clone() });
        }
    }
    let d = descend(field, path, cfg)?;
    let (value, qerr) = polyline_length(field, &d.pts)?;
    Ok(DistanceResult {
        value,
        error_estimate: (d.length - value).abs() + qerr,
        path: d.pts,
        iterations: d.iterations,
        stalled: d.stalled,
        history: d.history,
    })
}

/// `m` points evenly spaced by Euclidean arc length along `path`.
pub fn resample(path: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        cum.push(cum.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for j in 0..m {
        if j == m - 1 {
            out.push(path.last().unwrap().clone());
            break;
        }
        let target = total * j as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let s = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(path[seg].iter().zip(&path[seg + 1]).map(|(a, b)| a + s * (b - a)).collect());
    }
    out
}

fn insert_midpoints(path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * path.len() - 1);
    for w in path.windows(2) {
        out.push(w[0].clone());
        out.push(w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    out.push(path.last().unwrap().clone());
    out
}

/// Intrinsic distance between `p` and `q`.
///
/// Candidates are the straight chord, a lattice path inside the box that
/// must contain every competitive path, and the polylines produced by descent
/// over `cfg.levels` levels of doubling resolution. Every candidate is an
/// admissible path, so the returned value is an upper bound up to quadrature
/// error.
///
/// Both orientations are solved; they can settle in different local minima,
/// so the shorter one is kept and their spread is added to the error estimate.
pub fn distance(field: &MetricField, p: &[f64], q: &[f64], cfg: &DistanceConfig) -> Result<DistanceResult> {
    let fwd = distance_oriented(field, p, q, cfg)?;
    if p == q || field.is_constant() {
        return Ok(fwd);
    }
    let mut bwd = distance_oriented(field, q, p, cfg)?;
    let spread = (fwd.value - bwd.value).abs();
    let iterations = fwd.iterations + bwd.iterations;
    let stalled = fwd.stalled || bwd.stalled;
    let mut best = if bwd.value < fwd.value {
        bwd.path.reverse();
        bwd
    } else {
        fwd
    };
    best.error_estimate += spread;
    best.iterations = iterations;
    best.stalled = stalled;
    Ok(best)
}

fn distance_oriented(field: &MetricField, p: &[f64], q: &[f64], cfg: &DistanceConfig) -> Result<DistanceResult> {
    cfg.validate()?;
    for x in [p, q] {
        if x.len() != field.dim() {
            return Err(Error::Dimension { expected: field.dim(), got: x.len() });
        }
        if !field.domain.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
    }
    if p == q {
        return Ok(DistanceResult {
            value: 0.0,
            error_estimate: 0.0,
            path: vec![p.to_vec(), q.to_vec()],
            iterations: 0,
            stalled: false,
            history: vec![],
        });
    }
    let chord = vec![p.to_vec(), q.to_vec()];
    if field.is_constant() {
        // Straight lines are geodesics of a constant metric.
        let e: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        return Ok(DistanceResult {
            value: field.norm(p, &e)?,
            error_estimate: 0.0,
            path: chord,
            iterations: 0,
            stalled: false,
            history: vec![],
        });
    }
    let (chord_len, chord_err) = polyline_length(field, &chord)?;
    let bounds = field.bounds()?;
    let sep = dist(p, q);
    let diam = field.domain.diameter();

    let mut best = chord_len;
    let mut best_err = chord_err;
    let mut best_path = chord.clone();
    let mut seed = chord.clone();

    // Any path shorter than the chord stays in {x : λ₀(|x−p| + |x−q|) ≤ L}.
    let reach = 0.5 * chord_len / bounds.lambda0;
    let center: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let trap = BoxDomain::new(
        center.iter().map(|c| c - reach).collect(),
        center.iter().map(|c| c + reach).collect(),
    )
    .ok()
    .and_then(|b| b.intersect(&field.domain));
    let lattice_box = if cfg.scale_to_chord { trap } else { Some(field.domain.clone()) };
    if let Some(bx) = lattice_box {
        let res: Vec<usize> = (0..field.dim())
            .map(|a| {
                let h = field.domain.side(a) / (cfg.grid_res - 1) as f64;
                (bx.side(a) / h).round() as usize + 1
            })
            .collect();
        if res.iter().all(|&r| r >= 5) {
            let (_, path) = lattice_path(field, &bx, &res, p, q)?;
            let (len, err) = polyline_length(field, &path)?;
            if len < best {
                best = len;
                best_err = err;
                best_path = path.clone();
            }
            // The lattice route seeds descent even when the chord is shorter:
            // it has already picked the right basin.
            seed = path;
        }
    }

    let m = if cfg.scale_to_chord {
        let scaled = (cfg.polyline_points as f64 * sep / diam).ceil() as usize;
        scaled.clamp(5.min(cfg.polyline_points), cfg.polyline_points)
    } else {
        cfg.polyline_points
    };
    let mut current = resample(&seed, m);
    let mut level_values = Vec::with_capacity(cfg.levels);
    let mut iterations = 0;
    let mut stalled = false;
    let mut history = Vec::new();
    let mut discretization_gap = 0.0;
    for level in 0..cfg.levels {
        if level > 0 {
            current = insert_midpoints(&current);
        }
        let mut d = descend(field, &current, cfg)?;
        iterations += d.iterations;
        history.extend_from_slice(&d.history);
        if d.stalled {
            // Descent stops at cusps of the metric; relax and resume.
            let relaxed = relax_vertices(field, &mut d.pts, RELAX_SWEEPS, cfg.step_tol)?;
            history.push(relaxed);
            let again = descend(field, &d.pts, cfg)?;
            iterations += again.iterations;
            history.extend_from_slice(&again.history);
            d = again;
        }
        stalled |= d.stalled;
        let (len, err) = polyline_length(field, &d.pts)?;
        if len < best {
            best = len;
            best_err = err;
            discretization_gap = (d.length - len).abs();
            best_path = d.pts.clone();
        }
        level_values.push(best);
        current = d.pts;
    }
    let ladder = match level_values.len() {
        0 | 1 => 0.0,
        k => (level_values[k - 1] - level_values[k - 2]).abs(),
    };
    Ok(DistanceResult {
        value: best,
        error_estimate: ladder + discretization_gap + best_err + cfg.step_tol * best,
        path: best_path,
        iterations,
        stalled,
        history,
    })
}

/// Per-check margins of [`verify_metric_axioms`]; a negative margin is a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomReport {
    pub pairs: usize,
    pub triples: usize,
    pub identity_max: f64,
    pub symmetry_margin: f64,
    pub triangle_margin: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub lambda0: f64,
    pub pass: bool,
}

/// Identity, symmetry, triangle and comparison checks on the consecutive
/// pairs (pᵢ, pᵢ₊₁) and triples (pᵢ, pᵢ₊₁, pᵢ₊₂) of a cyclic point list.
pub fn verify_metric_axioms(field: &MetricField, points: &[Vec<f64>], cfg: &DistanceConfig) -> Result<AxiomReport> {
    if points.len() < 3 {
        return Err(Error::Invalid("axiom check needs at least 3 points".into()));
    }
    let k = points.len();
    let lambda0 = field.bounds()?.lambda0;
    let d = |a: &[f64], b: &[f64]| distance(field, a, b, cfg);
    let mut identity_max: f64 = 0.0;
    for p in points {
        identity_max = identity_max.max(d(p, p)?.value.abs());
    }
    let mut fwd = Vec::with_capacity(k);
    let mut symmetry_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    for i in 0..k {
        let (p, q) = (&points[i], &points[(i + 1) % k]);
        let a = d(p, q)?;
        let b = d(q, p)?;
        let slack = 2.0 * a.error_estimate.max(b.error_estimate);
        symmetry_margin = symmetry_margin.min(slack - (a.value - b.value).abs());
        lower_margin = lower_margin.min(a.value - lambda0 * dist(p, q));
        let (chord, _) = polyline_length(field, &[p.clone(), q.clone()])?;
        upper_margin = upper_margin.min(chord + 1e-9 - a.value);
        fwd.push(a);
    }
    let mut triangle_margin = f64::INFINITY;
    for i in 0..k {
        let (p, r) = (&points[i], &points[(i + 2) % k]);
        let pq = &fwd[i];
        let qr = &fwd[(i + 1) % k];
        let pr = d(p, r)?;
        let err = pq.error_estimate.max(qr.error_estimate).max(pr.error_estimate);
        triangle_margin = triangle_margin.min(pq.value + qr.value + 3.0 * err - pr.value);
    }
    let pass = identity_max == 0.0
        && symmetry_margin >= 0.0
        && triangle_margin >= 0.0
        && lower_margin >= 0.0
        && upper_margin >= 0.0;
    Ok(AxiomReport {
        pairs: k,
        triples: k,
        identity_max,
        symmetry_margin,
        triangle_margin,
        lower_margin,
        upper_margin,
        lambda0,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquivalenceReport {
    pub c_emp: f64,
    #[serde(rename = "CEmp")]
    pub c_emp_upper: f64,
    pub band: (f64, f64),
    pub slack: f64,
    pub pairs: usize,
    pub skipped: usize,
    pub pass: bool,
}

/// Extreme ratios d_g/d_h over random pairs in `bx`, checked against the
/// pointwise eigenvalue band widened by the solver error.
pub fn empirical_equivalence(
    g: &MetricField,
    h: &MetricField,
    bx: &BoxDomain,
    pairs: usize,
    cfg: &DistanceConfig,
    rng: &mut SplitMix64,
) -> Result<EquivalenceReport> {
    if pairs == 0 {
        return Err(Error::Invalid("need at least one pair".into()));
    }
    let band = pointwise_factor_pair(g, h, bx, DEFAULT_BOUNDS_RES)?;
    let resolution = 1e-6 * bx.diameter();
    let (mut lo, mut hi, mut slack) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut skipped = 0;
    for _ in 0..pairs {
        let p = bx.sample(rng);
        let q = bx.sample(rng);
        if dist(&p, &q) < resolution {
            skipped += 1;
            continue;
        }
        let dg = distance(g, &p, &q, cfg)?;
        let dh = distance(h, &p, &q, cfg)?;
        if dh.value < resolution {
            skipped += 1;
            continue;
        }
        let ratio = dg.value / dh.value;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        slack = slack.max((dg.error_estimate + ratio * dh.error_estimate) / dh.value);
    }
    let used = pairs - skipped;
    let slack = slack + 1e-9;
    let pass = used > 0 && lo >= band.0 - slack && hi <= band.1 + slack;
    Ok(EquivalenceReport { c_emp: lo, c_emp_upper: hi, band, slack, pairs: used, skipped, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnowflakeReport {
    /// (separation, d₂/d₁) per probed separation.
    pub ratios: Vec<(f64, f64)>,
    /// Least-squares slope of log ratio against log separation.
    pub slope: f64,
    pub equivalent: bool,
}

/// Probes d₂/d₁ at separations 10⁰ … 10⁻⁶ from `x` along `dir`. Bounded
/// ratios have slope near zero on a log-log scale; the pair is reported as
/// not equivalent when the slope exceeds 0.1 in magnitude or the ratios
/// spread over more than a factor of 10.
pub fn snowflake_check(d1: &dyn DistanceMap, d2: &dyn DistanceMap, x: &[f64], dir: &[f64]) -> Result<SnowflakeReport> {
    let norm = crate::linalg::norm(dir);
    if norm == 0.0 {
        return Err(Error::Invalid("probe direction is zero".into()));
    }
    let mut ratios = Vec::new();
    for k in 0..=6 {
        let sep = 10f64.powi(-k);
        let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + sep * b / norm).collect();
        let a = d1.distance(x, &y)?.value;
        let b = d2.distance(x, &y)?.value;
        ratios.push((sep, b / a));
    }
    let pts: Vec<(f64, f64)> = ratios.iter().map(|(s, r)| (s.ln(), r.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, r)| (lo.min(*r), hi.max(*r)));
    let equivalent = slope.abs() <= 0.1 && rmax / rmin <= 10.0;
    Ok(SnowflakeReport { ratios, slope, equivalent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{build_metric, MetricSpec};

    fn square(r: f64) -> BoxDomain {
        BoxDomain::cube(2, -r, r)
    }

    #[test]
    fn lattice_examples() {
        let f = MetricField::euclidean(&BoxDomain::cube(2, 0.0, 2.0));
        let r = grid_distance(&f, &[0.0, 0.0], &[1.0, 0.0], 9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        let r = grid_distance(&f, &[0.0, 0.0], &[1.0, 1.0], 9).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-15);
        let r = grid_distance(&f, &[0.0, 0.0], &[2.0, 1.0], 9).unwrap();
        assert!((r.value - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(r.value / 5f64.sqrt() - 1.0 <= 0.083);
        assert!(grid_distance(&f, &[3.0, 0.0], &[1.0, 1.0], 9).is_err());
    }

    #[test]
    fn lattice_matches_exhaustive_enumeration() {
        // Oracle: Bellman–Ford style relaxation over all lattice paths on a
        // 5×5 grid of a non-constant metric.
        let bx = square(1.0);
        let f = build_metric(&MetricSpec::conformal(&bx, "1 + abs(x1) + 0.5*x2^2")).unwrap();
        let res = 5;
        let pts = bx.grid(res);
        let idx = |i: usize, j: usize| i * res + j;
        let mut best = vec![f64::INFINITY; res * res];
        best[idx(0, 0)] = 0.0;
        for _ in 0..res * res {
            for i in 0..res {
                for j in 0..res {
                    for di in -1i32..=1 {
                        for dj in -1i32..=1 {
                            let (ni, nj) = (i as i32 + di, j as i32 + dj);
                            if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= 5 || nj >= 5 {
                                continue;
                            }
                            let (a, b) = (idx(i, j), idx(ni as usize, nj as usize));
                            let w = discrete_length(&f, &[pts[a].clone(), pts[b].clone()]).unwrap();
                            if best[a] + w < best[b] {
                                best[b] = best[a] + w;
                            }
                        }
                    }
                }
            }
        }
        let r = grid_distance(&f, &[-1.0, -1.0], &[1.0, 1.0], res).unwrap();
        assert!((r.value - best[idx(4, 4)]).abs() < 1e-12);
    }

    #[test]
    fn refine_straightens_euclidean() {
        let f = MetricField::euclidean(&BoxDomain::cube(2, -1.0, 5.0));
        let start = vec![vec![0.0, 0.0], vec![2.5, 0.5], vec![3.0, 1.0], vec![3.5, 3.0], vec![3.0, 4.0]];
        let r = refine_polyline(&f, &resample(&start, 9), &DistanceConfig::default()).unwrap();
        assert!((r.value - 5.0).abs() < 1e-4, "{}", r.value);
        assert!(r.history.windows(2).all(|w| w[1] < w[0]));
        for p in &r.path {
            assert!((4.0 * p[0] - 3.0 * p[1]).abs() / 5.0 < 1e-3);
        }
    }

    #[test]
    fn constant_and_exponential_metrics() {
        let cfg = DistanceConfig::default();
        let d = build_metric(&MetricSpec::constant(&square(2.0), &[vec![1.0, 0.0], vec![0.0, 4.0]])).unwrap();
        let r = distance(&d, &[0.0, 0.0], &[1.0, 1.0], &cfg).unwrap();
        assert!((r.value - 5f64.sqrt()).abs() < 1e-3);
        let e = build_metric(&MetricSpec::conformal(&square(2.0), "exp(x1)")).unwrap();
        let r = distance(&e, &[0.0, 0.0], &[1.0, 0.0], &cfg).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 5e-3, "{r:?}");
        assert_eq!(distance(&e, &[0.3, 0.2], &[0.3, 0.2], &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn kinked_conformal_distance() {
        let c = build_metric(&MetricSpec::conformal(&square(1.0), "1 + abs(x1)")).unwrap();
        let r = distance(&c, &[-1.0, 0.0], &[1.0, 0.0], &DistanceConfig::default()).unwrap();
        assert!((r.value - 3.0).abs() < 5e-3, "{r:?}");
        // Oracle: fine lattice over the whole domain.
        let g = grid_distance(&c, &[-1.0, 0.0], &[1.0, 0.0], 129).unwrap();
        assert!(r.value <= g.value + 1e-9);
    }

    #[test]
    fn cache_is_transparent() {
        let c = build_metric(&MetricSpec::conformal(&square(1.0), "1 + x1^2")).unwrap();
        let cfg = DistanceConfig { levels: 1, ..Default::default() };
        let plain = SolverDistance::new(&c, cfg);
        let memo = SolverDistance::cached(&c, cfg);
        let (p, q) = ([0.1, -0.4], [-0.6, 0.7]);
        let a = plain.distance(&p, &q).unwrap();
        let b = memo.distance(&p, &q).unwrap();
        let b2 = memo.distance(&p, &q).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, b2);
    }

    #[test]
    fn snowflake_is_not_equivalent() {
        let r = snowflake_check(&EuclideanDistance, &SnowflakeDistance, &[0.0], &[1.0]).unwrap();
        let (sep, ratio) = *r.ratios.last().unwrap();
        assert_eq!(sep, 1e-6);
        assert!((ratio - 1e3).abs() <= 1e-9 * 1e3);
        assert!(!r.equivalent);
        let same = snowflake_check(&EuclideanDistance, &EuclideanDistance, &[0.0], &[1.0]).unwrap();
        assert!(same.equivalent);
    }
}
