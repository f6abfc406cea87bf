//! Metric tensor fields on box domains and their comparison bounds.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr, Func, Vars};
use crate::linalg::{cholesky, eigen_extremes, generalized_eigen_extremes, Mat};

/// Axis-aligned box in R^n, 1 ≤ n ≤ 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxDomain {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<BoxDomain> {
        if min.len() != max.len() {
            return Err(Error::Dimension { expected: min.len(), got: max.len() });
        }
        if !(1..=3).contains(&min.len()) {
            return Err(Error::Invalid(format!("dimension {} not in 1..=3", min.len())));
        }
        for i in 0..min.len() {
            if !(min[i] < max[i]) || !min[i].is_finite() || !max[i].is_finite() {
                return Err(Error::Invalid(format!(
                    "box side {i} is empty: [{}, {}]",
                    min[i], max[i]
                )));
            }
        }
        Ok(BoxDomain { min, max })
    }

    /// The cube [lo, hi]^n.
    pub fn cube(n: usize, lo: f64, hi: f64) -> BoxDomain {
        BoxDomain::new(vec![lo; n], vec![hi; n]).expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn side(&self, i: usize) -> f64 {
        self.max[i] - self.min[i]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| 0.5 * (self.min[i] + self.max[i])).collect()
    }

    /// Closed-box membership with a rounding allowance of 1e-12 per side.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && (0..self.dim()).all(|i| {
                let slack = 1e-12 * self.side(i).max(1.0);
                p[i] >= self.min[i] - slack && p[i] <= self.max[i] + slack
            })
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for i in 0..self.dim() {
            p[i] = p[i].clamp(self.min[i], self.max[i]);
        }
    }

    /// Box shrunk by `eps` on every side.
    pub fn shrink(&self, eps: f64) -> Result<BoxDomain> {
        BoxDomain::new(
            self.min.iter().map(|v| v + eps).collect(),
            self.max.iter().map(|v| v - eps).collect(),
        )
    }

    pub fn intersect(&self, other: &BoxDomain) -> Option<BoxDomain> {
        let min: Vec<f64> = self.min.iter().zip(&other.min).map(|(a, b)| a.max(*b)).collect();
        let max: Vec<f64> = self.max.iter().zip(&other.max).map(|(a, b)| a.min(*b)).collect();
        BoxDomain::new(min, max).ok()
    }

    pub fn sample(&self, rng: &mut crate::rng::SplitMix64) -> Vec<f64> {
        (0..self.dim()).map(|i| rng.uniform(self.min[i], self.max[i])).collect()
    }

    /// Uniform grid with `res` nodes per axis, axis 0 slowest.
    pub fn grid(&self, res: usize) -> Vec<Vec<f64>> {
        let res = res.max(2);
        let n = self.dim();
        let total = res.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = vec![0.0; n];
            for axis in (0..n).rev() {
                let k = rem % res;
                rem /= res;
                p[axis] = self.min[axis] + self.side(axis) * k as f64 / (res - 1) as f64;
            }
            out.push(p);
        }
        out
    }
}

/// Declared regularity class of a metric; metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Smooth,
    Lipschitz,
    Hoelder(f64),
    Continuous,
}

impl Regularity {
    pub fn is_smooth(self) -> bool {
        self == Regularity::Smooth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    Constant,
    Conformal,
    Matrix,
    SampledGrid,
}

/// Matrix entry: a literal or an expression in x1..xn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expr(String),
}

impl Entry {
    fn parse(&self) -> Result<Expr> {
        match self {
            Entry::Number(v) => Ok(Expr::Num(*v)),
            Entry::Expr(s) => parse_expression(s),
        }
    }
}

/// Node values of a sampled-grid metric.
///
/// `components` holds one flat array per upper-triangular entry (i ≤ j, row
/// by row), each indexed over the grid with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub shape: Vec<usize>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// JSON description of a metric field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub dim: usize,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<Regularity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl MetricSpec {
    fn base(kind: MetricKind, domain: &BoxDomain) -> MetricSpec {
        MetricSpec {
            kind,
            dim: domain.dim(),
            domain: DomainSpec { min: domain.min.clone(), max: domain.max.clone() },
            omega: None,
            entries: None,
            grid: None,
            regularity: None,
            name: None,
        }
    }

    pub fn euclidean(domain: &BoxDomain) -> MetricSpec {
        MetricSpec::base(MetricKind::Euclidean, domain)
    }

    pub fn constant(domain: &BoxDomain, rows: &[Vec<f64>]) -> MetricSpec {
        MetricSpec {
            entries: Some(
                rows.iter().map(|r| r.iter().map(|v| Entry::Number(*v)).collect()).collect(),
            ),
            ..MetricSpec::base(MetricKind::Constant, domain)
        }
    }

    pub fn conformal(domain: &BoxDomain, omega: &str) -> MetricSpec {
        MetricSpec { omega: Some(omega.to_string()), ..MetricSpec::base(MetricKind::Conformal, domain) }
    }

    pub fn matrix(domain: &BoxDomain, entries: &[Vec<&str>]) -> MetricSpec {
        MetricSpec {
            entries: Some(
                entries
                    .iter()
                    .map(|r| r.iter().map(|s| Entry::Expr(s.to_string())).collect())
                    .collect(),
            ),
            ..MetricSpec::base(MetricKind::Matrix, domain)
        }
    }

    pub fn named(mut self, name: &str) -> MetricSpec {
        self.name = Some(name.to_string());
        self
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Euclidean,
    Constant(Mat),
    Conformal(Expr),
    Matrix(Vec<Vec<Expr>>),
    Grid(SampledGrid),
}

/// Uniform [λ₀, μ₀] sandwich of ‖·‖_g against the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBounds {
    pub lambda0: f64,
    pub mu0: f64,
    pub grid_res: usize,
}

/// Relative widening applied to grid extrema.
pub const BOUND_SAFETY: f64 = 1e-6;

/// Nodes per axis of the build-time positive-definiteness scan.
const BUILD_CHECK_RES: usize = 9;

/// A symmetric positive-definite matrix field on a box.
#[derive(Debug)]
pub struct MetricField {
    pub name: String,
    pub domain: BoxDomain,
    pub regularity: Regularity,
    spec: MetricSpec,
    repr: Repr,
    bounds: OnceLock<std::result::Result<ComparisonBounds, String>>,
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        MetricField {
            name: self.name.clone(),
            domain: self.domain.clone(),
            regularity: self.regularity,
            spec: self.spec.clone(),
            repr: self.repr.clone(),
            bounds: OnceLock::new(),
        }
    }
}

pub fn build_metric(spec: &MetricSpec) -> Result<MetricField> {
    let domain = BoxDomain::new(spec.domain.min.clone(), spec.domain.max.clone())?;
    let n = spec.dim;
    if domain.dim() != n {
        return Err(Error::Dimension { expected: n, got: domain.dim() });
    }
    let check_vars = |e: &Expr| -> Result<()> {
        if e.max_coordinate() > n {
            return Err(Error::Invalid(format!(
                "expression uses x{} but the metric has dimension {n}",
                e.max_coordinate()
            )));
        }
        Ok(())
    };
    let parse_entries = || -> Result<Vec<Vec<Expr>>> {
        let rows = spec
            .entries
            .as_ref()
            .ok_or_else(|| Error::Invalid("metric spec needs `entries`".into()))?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, got: rows.len() });
        }
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(Entry::parse).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        for e in parsed.iter().flatten() {
            check_vars(e)?;
        }
        Ok(parsed)
    };
    let (repr, default_reg) = match spec.kind {
        MetricKind::Euclidean => (Repr::Euclidean, Regularity::Smooth),
        MetricKind::Constant => {
            let parsed = parse_entries()?;
            let mut m = Mat::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m.a[i][j] = parsed[i][j].constant_value().ok_or_else(|| {
                        Error::Invalid(format!("constant metric entry ({i},{j}) is not constant"))
                    })?;
                }
            }
            (Repr::Constant(m), Regularity::Smooth)
        }
        MetricKind::Conformal => {
            let src = spec
                .omega
                .as_deref()
                .ok_or_else(|| Error::Invalid("conformal metric needs `omega`".into()))?;
            let e = parse_expression(src)?;
            check_vars(&e)?;
            let reg = guess_regularity(&e);
            (Repr::Conformal(e), reg)
        }
        MetricKind::Matrix => {
            let parsed = parse_entries()?;
            let reg = if parsed.iter().flatten().all(|e| guess_regularity(e).is_smooth()) {
                Regularity::Smooth
            } else {
                Regularity::Continuous
            };
            (Repr::Matrix(parsed), reg)
        }
        MetricKind::SampledGrid => {
            let data = spec
                .grid
                .as_ref()
                .ok_or_else(|| Error::Invalid("sampled-grid metric needs `grid`".into()))?;
            (Repr::Grid(SampledGrid::new(data.clone(), n)?), Regularity::Lipschitz)
        }
    };
    let field = MetricField {
        name: spec.name.clone().unwrap_or_else(|| format!("{:?}", spec.kind).to_lowercase()),
        domain,
        regularity: spec.regularity.unwrap_or(default_reg),
        spec: spec.clone(),
        repr,
        bounds: OnceLock::new(),
    };
    for p in field.domain.grid(BUILD_CHECK_RES) {
        field.eval(&p)?;
    }
    Ok(field)
}

// Kinks enter only through abs, min, max, sqrt and non-integer powers.
fn guess_regularity(e: &Expr) -> Regularity {
    fn rough(e: &Expr) -> bool {
        match e {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(a) => rough(a),
            Expr::Binary(op, a, b) => {
                let frac_pow = *op == crate::expr::BinOp::Pow
                    && !matches!(**b, Expr::Num(v) if v.fract() == 0.0 && v >= 0.0);
                (frac_pow && a.mentions_variables()) || rough(a) || rough(b)
            }
            Expr::Call(f, args) => {
                matches!(f, Func::Abs | Func::Min | Func::Max | Func::Sqrt) || args.iter().any(rough)
            }
        }
    }
    if rough(e) {
        Regularity::Continuous
    } else {
        Regularity::Smooth
    }
}

impl MetricField {
    pub fn from_spec(spec: &MetricSpec) -> Result<MetricField> {
        build_metric(spec)
    }

    pub fn euclidean(domain: &BoxDomain) -> MetricField {
        build_metric(&MetricSpec::euclidean(domain).named("euclidean")).expect("euclidean metric")
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.repr, Repr::Euclidean)
    }

    /// True for fields whose tensor does not depend on the point.
    pub fn is_constant(&self) -> bool {
        matches!(self.repr, Repr::Euclidean | Repr::Constant(_))
    }

    /// Matrix at `p` without the positive-definiteness test.
    fn raw(&self, p: &[f64]) -> Result<Mat> {
        if !self.domain.contains(p) {
            return Err(Error::Domain { point: p.to_vec() });
        }
        let n = self.dim();
        match &self.repr {
            Repr::Euclidean => Ok(Mat::identity(n)),
            Repr::Constant(m) => Ok(*m),
            Repr::Conformal(w) => {
                let w = w.eval(&Vars::point(p))?;
                Ok(Mat::scaled_identity(n, w * w))
            }
            Repr::Matrix(entries) => {
                let vars = Vars::point(p);
                let mut m = Mat::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        m.a[i][j] = entries[i][j].eval(&vars)?;
                    }
                }
                let asym = m.asymmetry();
                if asym > 1e-12 {
                    return Err(Error::NotSymmetric { point: p.to_vec(), asymmetry: asym });
                }
                Ok(m)
            }
            Repr::Grid(g) => Ok(g.eval(p)),
        }
    }

    /// G(p), checked symmetric and positive definite.
    pub fn eval(&self, p: &[f64]) -> Result<Mat> {
        let m = self.raw(p)?;
        if m.a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Eval(format!("non-finite metric entry at {p:?}")));
        }
        if cholesky(&m).is_none() {
            let (lo, _) = eigen_extremes(&m);
            return Err(Error::NotPositiveDefinite { point: p.to_vec(), eigenvalue: lo });
        }
        Ok(m)
    }

    /// ‖v‖_g at p.
    #[inline]
    pub fn norm(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        match &self.repr {
            Repr::Euclidean => {
                if !self.domain.contains(p) {
                    return Err(Error::Domain { point: p.to_vec() });
                }
                Ok(crate::linalg::norm(v))
            }
            Repr::Conformal(w) => {
                if !self.domain.contains(p) {
                    return Err(Error::Domain { point: p.to_vec() });
                }
                let w = w.eval(&Vars::point(p))?;
                if w == 0.0 || !w.is_finite() {
                    return Err(Error::NotPositiveDefinite { point: p.to_vec(), eigenvalue: w * w });
                }
                Ok(w.abs() * crate::linalg::norm(v))
            }
            _ => {
                let m = self.raw(p)?;
                let q = m.quad_form(v);
                if q < 0.0 || !q.is_finite() {
                    let (lo, _) = eigen_extremes(&m);
                    return Err(Error::NotPositiveDefinite { point: p.to_vec(), eigenvalue: lo });
                }
                Ok(q.sqrt())
            }
        }
    }

    /// Comparison bounds over the whole domain at the default grid, cached.
    pub fn bounds(&self) -> Result<ComparisonBounds> {
        self.bounds
            .get_or_init(|| {
                comparison_bounds(self, &self.domain, DEFAULT_BOUNDS_RES).map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Invalid)
    }
}

pub fn metric_norm(field: &MetricField, p: &[f64], v: &[f64]) -> Result<f64> {
    field.norm(p, v)
}

pub const DEFAULT_BOUNDS_RES: usize = 64;

/// Grid minimum of `f` refined by compass search; returns the minimum value.
fn refined_min(
    bx: &BoxDomain,
    grid_res: usize,
    f: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut best_p = bx.min.clone();
    let mut best = f64::INFINITY;
    for p in bx.grid(grid_res) {
        let v = f(&p)?;
        if v < best {
            best = v;
            best_p = p;
        }
    }
    let n = bx.dim();
    let mut step: Vec<f64> = (0..n).map(|i| bx.side(i) / (grid_res.max(2) - 1) as f64).collect();
    let floor: Vec<f64> = (0..n).map(|i| 1e-12 * bx.side(i)).collect();
    let mut evals = 0;
    while step.iter().zip(&floor).any(|(s, f)| s > f) && evals < 4000 {
        let mut improved = false;
        for axis in 0..n {
            for sign in [-1.0, 1.0] {
                let mut q = best_p.clone();
                q[axis] = (q[axis] + sign * step[axis]).clamp(bx.min[axis], bx.max[axis]);
                evals += 1;
                let v = f(&q)?;
                if v < best {
                    best = v;
                    best_p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok(best)
}

/// λ₀ = min √η_min and μ₀ = max √η_max of G over `bx`, widened by [`BOUND_SAFETY`].
pub fn comparison_bounds(field: &MetricField, bx: &BoxDomain, grid_res: usize) -> Result<ComparisonBounds> {
    if grid_res < 2 {
        return Err(Error::Invalid("gridRes must be at least 2".into()));
    }
    if !field.domain.contains_box(bx) {
        return Err(Error::Invalid("bounds box is not inside the metric domain".into()));
    }
    let (lo, hi) = match &field.repr {
        Repr::Euclidean => (1.0, 1.0),
        Repr::Constant(m) => {
            let (lo, hi) = eigen_extremes(m);
            (lo.sqrt(), hi.sqrt())
        }
        _ => {
            let lo = refined_min(bx, grid_res, &|p| Ok(eigen_extremes(&field.eval(p)?).0))?;
            let hi = -refined_min(bx, grid_res, &|p| Ok(-eigen_extremes(&field.eval(p)?).1))?;
            (lo.sqrt(), hi.sqrt())
        }
    };
    let exact = matches!(field.repr, Repr::Euclidean | Repr::Constant(_));
    let widen = if exact { 0.0 } else { BOUND_SAFETY };
    Ok(ComparisonBounds { lambda0: lo * (1.0 - widen), mu0: hi * (1.0 + widen), grid_res })
}

/// Constants (c, C) with c‖v‖_h ≤ ‖v‖_g ≤ C‖v‖_h on `bx`.
pub fn pointwise_factor_pair(
    g: &MetricField,
    h: &MetricField,
    bx: &BoxDomain,
    grid_res: usize,
) -> Result<(f64, f64)> {
    if g.dim() != h.dim() {
        return Err(Error::Dimension { expected: g.dim(), got: h.dim() });
    }
    if !g.domain.contains_box(bx) || !h.domain.contains_box(bx) {
        return Err(Error::Invalid("factor box is not inside both metric domains".into()));
    }
    let pencil = |p: &[f64]| -> Result<(f64, f64)> {
        let gm = g.eval(p)?;
        let hm = h.eval(p)?;
        generalized_eigen_extremes(&gm, &hm).ok_or_else(|| Error::NotPositiveDefinite {
            point: p.to_vec(),
            eigenvalue: eigen_extremes(&hm).0,
        })
    };
    let lo = refined_min(bx, grid_res, &|p| Ok(pencil(p)?.0))?;
    let hi = -refined_min(bx, grid_res, &|p| Ok(-pencil(p)?.1))?;
    let both_constant = matches!(g.repr, Repr::Euclidean | Repr::Constant(_))
        && matches!(h.repr, Repr::Euclidean | Repr::Constant(_));
    let widen = if both_constant { 0.0 } else { BOUND_SAFETY };
    Ok((lo.sqrt() * (1.0 - widen), hi.sqrt() * (1.0 + widen)))
}

/// Tensor-product Catmull-Rom interpolant of grid node values.
#[derive(Debug, Clone)]
pub struct SampledGrid {
    data: GridData,
    n: usize,
}

impl SampledGrid {
    pub fn new(data: GridData, n: usize) -> Result<SampledGrid> {
        if data.shape.len() != n || data.min.len() != n || data.max.len() != n {
            return Err(Error::Dimension { expected: n, got: data.shape.len() });
        }
        if data.shape.iter().any(|&s| s < 2) {
            return Err(Error::Invalid("grid needs at least 2 nodes per axis".into()));
        }
        let nodes: usize = data.shape.iter().product();
        let ncomp = n * (n + 1) / 2;
        if data.components.len() != ncomp || data.components.iter().any(|c| c.len() != nodes) {
            return Err(Error::Invalid(format!(
                "grid needs {ncomp} component arrays of {nodes} values"
            )));
        }
        BoxDomain::new(data.min.clone(), data.max.clone())?;
        Ok(SampledGrid { data, n })
    }

    fn node(&self, comp: usize, idx: &[isize]) -> f64 {
        // Linear extrapolation supplies ghost nodes one step outside the grid.
        let shape = &self.data.shape;
        for axis in 0..self.n {
            let last = shape[axis] as isize - 1;
            if idx[axis] < 0 || idx[axis] > last {
                let (edge, inner) = if idx[axis] < 0 { (0, 1) } else { (last, last - 1) };
                let mut a = idx.to_vec();
                a[axis] = edge;
                let e = self.node(comp, &a);
                a[axis] = inner;
                let i = self.node(comp, &a);
                return 2.0 * e - i;
            }
        }
        let mut flat = 0usize;
        for axis in 0..self.n {
            flat = flat * shape[axis] + idx[axis] as usize;
        }
        self.data.components[comp][flat]
    }

    pub fn eval(&self, p: &[f64]) -> Mat {
        let n = self.n;
        let mut base = [0isize; 3];
        let mut w = [[0.0f64; 4]; 3];
        for axis in 0..n {
            let cells = (self.data.shape[axis] - 1) as f64;
            let h = (self.data.max[axis] - self.data.min[axis]) / cells;
            let u = ((p[axis] - self.data.min[axis]) / h).clamp(0.0, cells);
            let i = (u.floor() as isize).min(self.data.shape[axis] as isize - 2);
            let s = u - i as f64;
            base[axis] = i;
            let (s2, s3) = (s * s, s * s * s);
            w[axis] = [
                0.5 * (-s3 + 2.0 * s2 - s),
                0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
                0.5 * (-3.0 * s3 + 4.0 * s2 + s),
                0.5 * (s3 - s2),
            ];
        }
        let ncomp = n * (n + 1) / 2;
        let mut vals = [0.0f64; 6];
        let stencil = 4usize.pow(n as u32);
        let mut idx = [0isize; 3];
        for k in 0..stencil {
            let mut rem = k;
            let mut weight = 1.0;
            for axis in (0..n).rev() {
                let o = rem % 4;
                rem /= 4;
                idx[axis] = base[axis] + o as isize - 1;
                weight *= w[axis][o];
            }
            if weight == 0.0 {
                continue;
            }
            for (c, v) in vals.iter_mut().enumerate().take(ncomp) {
                *v += weight * self.node(c, &idx[..n]);
            }
        }
        let mut m = Mat::zeros(n);
        let mut c = 0;
        for i in 0..n {
            for j in i..n {
                m.a[i][j] = vals[c];
                m.a[j][i] = vals[c];
                c += 1;
            }
        }
        m
    }
}
