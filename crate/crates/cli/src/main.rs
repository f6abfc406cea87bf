use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lowreg_core::{
    arc_length, distance, empirical_equivalence, induced_length, metric_derivative, mollify_metric, run_suite,
    smooth_approximation, variational_distance, BoxDomain, Curve, CurveSpec, CurveSpecKind, DistanceConfig,
    MetricDerivativeConfig, MetricField, MetricSpec, MollifyConfig, QuadratureConfig, RefinementConfig,
    SolverDistance, SplitMix64, SuiteConfig, VerificationReport, SUITE_NAMES,
};

#[derive(Parser)]
#[command(name = "lowreg", version, about = "Lengths, distances and approximations for continuous Riemannian metrics")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Lattice nodes per axis.
    #[arg(long = "grid")]
    grid: Option<usize>,
    /// Polyline vertices for descent.
    #[arg(long = "points")]
    points: Option<usize>,
    /// Midpoint-refinement levels.
    #[arg(long = "levels")]
    levels: Option<usize>,
}

impl SolverArgs {
    fn config(&self) -> Result<DistanceConfig> {
        let mut cfg = DistanceConfig::default();
        if let Some(g) = self.grid {
            cfg.grid_res = g;
        }
        if let Some(p) = self.points {
            cfg.polyline_points = p;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Arc length ∫‖γ′‖_g dt.
    Length {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        /// Absolute quadrature tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Induced length from chord sums; CSV output is the refinement trace.
    InducedLength {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        /// Refine to exactly this depth instead of stopping on the increment.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Intrinsic distance between two points.
    Distance {
        #[arg(long)]
        metric: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        /// Include the descent history in the output.
        #[arg(long)]
        history: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Variational distance D_ac between two curves.
    Dac {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        curve_a: PathBuf,
        #[arg(long)]
        curve_b: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Mollified metric gₙ as a sampled-grid metric spec.
    Mollify {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        target_n: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Metric derivative |γ̇|(t).
    MetricDerivative {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Piecewise-smooth approximation λ_η, written as a dense polyline.
    Approximate {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        eta: f64,
        /// JSON list of {"min": [...], "max": [...]} chart boxes; the metric domain when omitted.
        #[arg(long)]
        boxes: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Empirical equivalence constants between two metrics.
    Equivalence {
        #[arg(long)]
        metric_a: PathBuf,
        #[arg(long)]
        metric_b: PathBuf,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        /// Lower corner of the sampling box; the common domain when omitted.
        #[arg(long, allow_hyphen_values = true)]
        box_min: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        box_max: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a verification suite; exits nonzero when any case fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Record per-case wall time.
        #[arg(long)]
        timing: bool,
    },
    /// Re-emit a saved JSON report in the chosen format.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&src).with_context(|| format!("parsing {}", path.display()))
}

fn load_metric(path: &Path) -> Result<MetricField> {
    let spec: MetricSpec = read_json(path)?;
    MetricField::from_spec(&spec).with_context(|| format!("building metric from {}", path.display()))
}

fn load_curve(path: &Path) -> Result<Curve> {
    let spec: CurveSpec = read_json(path)?;
    Curve::from_spec(&spec).with_context(|| format!("building curve from {}", path.display()))
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad coordinate `{v}`: {e}")))
        .collect()
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Scalar top-level fields as a one-row CSV.
fn record_csv(v: &Value) -> String {
    let Value::Object(map) = v else { return format!("value\n{}\n", csv_value(v)) };
    let scalars: Vec<(&String, &Value)> = map.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).collect();
    let header: Vec<&str> = scalars.iter().map(|(k, _)| k.as_str()).collect();
    let row: Vec<String> = scalars.iter().map(|(_, v)| csv_value(v)).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn write(&self, body: &str) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }

    fn json(&self, v: &impl Serialize) -> Result<()> {
        self.write(&(serde_json::to_string_pretty(v)? + "\n"))
    }

    fn record(&self, v: &impl Serialize) -> Result<()> {
        match self.format {
            Format::Json => self.json(v),
            Format::Csv => self.write(&record_csv(&serde_json::to_value(v)?)),
        }
    }

    fn report(&self, r: &VerificationReport) -> Result<()> {
        match self.format {
            Format::Json => self.write(&(r.to_json()? + "\n")),
            Format::Csv => self.write(&r.to_csv()),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = Output { path: cli.out.clone(), format: cli.format };
    match cli.command {
        Command::Length { metric, curve, tol } => {
            let field = load_metric(&metric)?;
            let c = load_curve(&curve)?;
            let mut quad = QuadratureConfig::for_smooth(field.regularity.is_smooth());
            if let Some(t) = tol {
                quad = quad.with_tol(t);
            }
            let r = arc_length(&field, &c, &quad)?;
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
            out.record(&r)?;
        }
        Command::InducedLength { metric, curve, depth, tol, solver } => {
            let field = load_metric(&metric)?;
            let c = load_curve(&curve)?;
            let d = SolverDistance::new(&field, solver.config()?);
            let cfg = match depth {
                Some(k) => RefinementConfig::fixed_depth(k),
                None => RefinementConfig { tol, ..RefinementConfig::default() },
            };
            let r = induced_length(&d, &c, &cfg)?;
            match out.format {
                Format::Json => out.json(&r)?,
                Format::Csv => {
                    let mut body = String::from("depth,chordCount,chordSum\n");
                    for lvl in r.trace.as_deref().unwrap_or(&[]) {
                        body.push_str(&format!("{},{},{}\n", lvl.depth, lvl.chord_count, lvl.chord_sum));
                    }
                    out.write(&body)?;
                }
            }
        }
        Command::Distance { metric, from, to, history, solver } => {
            let field = load_metric(&metric)?;
            let mut r = distance(&field, &parse_point(&from)?, &parse_point(&to)?, &solver.config()?)?;
            if !history {
                r.history.clear();
            }
            out.record(&r)?;
        }
        Command::Dac { metric, curve_a, curve_b, solver } => {
            let field = load_metric(&metric)?;
            let a = load_curve(&curve_a)?;
            let b = load_curve(&curve_b)?;
            let d = SolverDistance::new(&field, solver.config()?);
            let quad = QuadratureConfig::for_smooth(field.regularity.is_smooth());
            out.record(&variational_distance(&field, &a, &b, &d, &quad)?)?;
        }
        Command::Mollify { metric, target_n, grid } => {
            if out.format == Format::Csv {
                bail!("mollify emits a metric spec; use --format json");
            }
            let field = load_metric(&metric)?;
            let mut cfg = MollifyConfig::new(target_n);
            cfg.grid_res = grid;
            cfg.seed = cli.seed;
            let m = mollify_metric(&field, &cfg)?;
            eprintln!(
                "kernel width {:.6e}, effective domain {:?}..{:?}, ratios in [{:.6}, {:.6}]",
                m.kernel_width, m.effective_domain.min, m.effective_domain.max, m.ratio_range.0, m.ratio_range.1
            );
            out.json(m.field.spec())?;
        }
        Command::MetricDerivative { metric, curve, t, solver } => {
            let field = load_metric(&metric)?;
            let c = load_curve(&curve)?;
            let d = SolverDistance::new(&field, solver.config()?);
            let m = metric_derivative(&d, &c, t, &MetricDerivativeConfig::default())?;
            let analytic = match c.derivative(t)? {
                Some(v) => Some(field.norm(&c.eval(t)?, &v)?),
                None => None,
            };
            out.record(&json!({
                "t": t,
                "value": m.value,
                "converged": m.converged,
                "steps": m.steps,
                "delta": m.delta,
                "analytic": analytic,
            }))?;
        }
        Command::Approximate { metric, curve, eta, boxes, solver } => {
            let field = load_metric(&metric)?;
            let c = load_curve(&curve)?;
            let boxes: Vec<BoxDomain> = match boxes {
                Some(p) => {
                    let raw: Vec<BoxDomain> = read_json(&p)?;
                    raw.into_iter().map(|b| BoxDomain::new(b.min, b.max)).collect::<Result<_, _>>()?
                }
                None => vec![field.domain.clone()],
            };
            let d = SolverDistance::new(&field, solver.config()?);
            let quad = QuadratureConfig::for_smooth(field.regularity.is_smooth());
            let r = smooth_approximation(&field, &c, eta, &boxes, &d, &quad)?;
            let mut params: Vec<f64> = (0..=2048).map(|i| i as f64 / 2048.0).collect();
            params.extend_from_slice(r.curve.knots());
            // Resolve the short joins and the smoothed corners of each piece.
            let mut window = |lo: f64, hi: f64| {
                let (lo, hi) = (lo.max(0.0), hi.min(1.0));
                params.extend((0..=128).map(|i| lo + (hi - lo) * i as f64 / 128.0));
            };
            for p in &r.pieces {
                window(p.a, p.a + p.delta);
                window(p.b - p.delta, p.b);
                for &k in c.knots().iter().filter(|&&k| k > p.a && k < p.b) {
                    window(k - p.eps, k + p.eps);
                }
            }
            params.sort_by(f64::total_cmp);
            params.dedup();
            let vertices: Vec<Vec<f64>> = params.iter().map(|&t| r.curve.eval(t)).collect::<Result<_, _>>()?;
            let spec = CurveSpec {
                kind: CurveSpecKind::Polyline,
                components: None,
                derivatives: None,
                vertices: Some(vertices),
                knots: Some(params),
                depth: None,
                knot_level: None,
            };
            let record = json!({
                "eta": r.eta,
                "chartCount": r.chart_count,
                "dacBound": r.dac_bound,
                "dacMeasured": r.dac_measured,
                "dac": r.dac,
                "pieces": r.pieces,
                "curve": spec,
            });
            out.record(&record)?;
        }
        Command::Equivalence { metric_a, metric_b, pairs, box_min, box_max, solver } => {
            let g = load_metric(&metric_a)?;
            let h = load_metric(&metric_b)?;
            let bx = match (box_min, box_max) {
                (Some(lo), Some(hi)) => BoxDomain::new(parse_point(&lo)?, parse_point(&hi)?)?,
                (None, None) => g
                    .domain
                    .intersect(&h.domain)
                    .ok_or_else(|| anyhow!("metric domains do not overlap"))?,
                _ => bail!("give both --box-min and --box-max, or neither"),
            };
            let mut rng = SplitMix64::new(cli.seed);
            let r = empirical_equivalence(&g, &h, &bx, pairs, &solver.config()?, &mut rng)?;
            out.record(&r)?;
            return Ok(if r.pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Verify { suite, timing } => {
            if suite != "all" && !SUITE_NAMES.contains(&suite.as_str()) {
                bail!("unknown suite `{suite}`; expected one of: all, {}", SUITE_NAMES.join(", "));
            }
            let report = run_suite(&suite, &SuiteConfig { seed: cli.seed, timing })?;
            out.report(&report)?;
            for c in report.failures() {
                eprintln!("FAIL {}:{} observed {:?} expected {} ± {} {}", c.suite, c.name, c.observed, c.expected, c.tolerance, c.detail);
            }
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Report { input } => {
            let src = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = VerificationReport::from_json(&src)?;
            out.report(&report)?;
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
