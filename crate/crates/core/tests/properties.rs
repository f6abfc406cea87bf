use lowreg_core::quadrature::integrate;
use lowreg_core::solver::discrete_length;
use lowreg_core::*;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.9f64..1.9, 2)
}

fn metric_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(BUILTIN_METRICS.to_vec())
}

fn polyline(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(), 2..max)
}

/// Adds a vertex wherever a segment crosses x1 = 0, the kink line of the
/// non-smooth built-in metrics, so the length integrand is smooth between knots.
fn split_at_kink_line(verts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out = vec![verts[0].clone()];
    for w in verts.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if p[0] * q[0] < 0.0 {
            let s = p[0] / (p[0] - q[0]);
            out.push(vec![0.0, p[1] + s * (q[1] - p[1])]);
        }
        out.push(q.clone());
    }
    out
}

fn euclid(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_within_comparison_bounds(m in metric_name(), p in point(), v in prop::collection::vec(-3.0f64..3.0, 2)) {
        let f = builtin_metric(m).unwrap();
        let b = f.bounds().unwrap();
        let n = f.norm(&p, &v).unwrap();
        let e = euclid(&v, &[0.0, 0.0]);
        prop_assert!(b.lambda0 * e <= n * (1.0 + 1e-12));
        prop_assert!(n <= b.mu0 * e * (1.0 + 1e-12));
    }

    #[test]
    fn eval_is_symmetric_positive(m in metric_name(), p in point()) {
        let f = builtin_metric(m).unwrap();
        let g = f.eval(&p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((g.a[i][j] - g.a[j][i]).abs() <= 1e-12);
            }
        }
        prop_assert!(g.a[0][0] > 0.0 && g.a[0][0] * g.a[1][1] - g.a[0][1] * g.a[1][0] > 0.0);
    }

    #[test]
    fn norm_is_homogeneous(m in metric_name(), p in point(), v in prop::collection::vec(-3.0f64..3.0, 2), s in -4.0f64..4.0) {
        let f = builtin_metric(m).unwrap();
        let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
        let lhs = f.norm(&p, &sv).unwrap();
        let rhs = s.abs() * f.norm(&p, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn euclidean_polyline_lengths_agree(verts in polyline(8)) {
        let f = builtin_metric("euclidean").unwrap();
        let exact: f64 = verts.windows(2).map(|w| euclid(&w[0], &w[1])).sum();
        let c = Curve::polyline(verts, None).unwrap();
        let l = arc_length(&f, &c, &QuadratureConfig::smooth()).unwrap().value;
        let ld = induced_length(&EuclideanDistance, &c, &RefinementConfig::fixed_depth(4)).unwrap().value;
        prop_assert!((l - exact).abs() <= 1e-9 * (1.0 + exact));
        prop_assert!((ld - exact).abs() <= 1e-9 * (1.0 + exact));
    }

    #[test]
    fn chord_sums_never_exceed_arc_length(verts in polyline(6), depth in 1usize..8) {
        let f = builtin_metric("diag-1-4").unwrap();
        let c = Curve::polyline(verts, None).unwrap();
        let l = arc_length(&f, &c, &QuadratureConfig::smooth()).unwrap();
        let d = SolverDistance::new(&f, DistanceConfig::default());
        let ld = induced_length(&d, &c, &RefinementConfig::fixed_depth(depth)).unwrap();
        prop_assert!(ld.value <= l.value + l.estimated_error + ld.estimated_error + 1e-12);
    }

    #[test]
    fn chord_sums_grow_with_refinement(a in -1.5f64..1.5, b in -1.5f64..1.5, k in 1.0f64..6.0) {
        let c = Curve::expr(
            &[&format!("{a} + t"), &format!("{b} + 0.3*sin({k}*t)")],
            None,
            &[],
        )
        .unwrap();
        let mut cfg = RefinementConfig::fixed_depth(9);
        cfg.keep_partitions = true;
        let r = induced_length(&EuclideanDistance, &c, &cfg).unwrap();
        let trace = r.trace.unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1].chord_sum >= w[0].chord_sum - 1e-12 * (1.0 + w[0].chord_sum));
        }
    }

    #[test]
    fn arc_length_is_reparametrization_invariant(m in metric_name(), verts in polyline(5)) {
        let f = builtin_metric(m).unwrap();
        let c = Curve::polyline(split_at_kink_line(verts), None).unwrap();
        let r = c.reparametrize("t^2", "2*t").unwrap();
        let quad = QuadratureConfig::smooth();
        let l0 = arc_length(&f, &c, &quad).unwrap();
        let l1 = arc_length(&f, &r, &quad).unwrap();
        let tol = 10.0 * (l0.estimated_error + l1.estimated_error) + 1e-8 * l0.value;
        prop_assert!((l0.value - l1.value).abs() <= tol, "{} vs {}", l0.value, l1.value);
    }

    #[test]
    fn quadrature_is_exact_on_polynomials(coef in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let f = |t: f64| coef.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let exact: f64 = coef.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum();
        let r = integrate(|t| Ok(Some(f(t))), &[0.0, 1.0], &QuadratureConfig::smooth()).unwrap();
        prop_assert!((r.value - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn cantor_function_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (u, v) = (cantor_value(lo, 40), cantor_value(hi, 40));
        prop_assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
        prop_assert!(u <= v);
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), lo in -10.0f64..0.0, hi in 0.1f64..10.0) {
        let mut a = SplitMix64::new(seed);
        let mut b = SplitMix64::new(seed);
        for _ in 0..32 {
            let x = a.uniform(lo, hi);
            prop_assert_eq!(x, b.uniform(lo, hi));
            prop_assert!(x >= lo && x < hi);
        }
    }

    #[test]
    fn report_round_trips(obs in prop::collection::vec(-1e6f64..1e6, 0..10)) {
        let mut r = VerificationReport::new("p", serde_json::json!({ "n": obs.len() }));
        for (i, v) in obs.iter().enumerate() {
            r.cases.push(VerificationCase::within("p", &format!("c{i}"), *v, 0.0, 1e5));
        }
        let back = VerificationReport::from_json(&r.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(r.to_csv().lines().count(), obs.len() + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_is_sandwiched(p in point(), q in point()) {
        let f = builtin_metric("abs-conformal").unwrap();
        let cfg = DistanceConfig { grid_res: 24, ..DistanceConfig::default() };
        let d = distance(&f, &p, &q, &cfg).unwrap();
        let b = f.bounds().unwrap();
        let chord = arc_length(&f, &Curve::segment(&p, &q), &QuadratureConfig::smooth()).unwrap().value;
        prop_assert!(b.lambda0 * euclid(&p, &q) <= d.value + 1e-12);
        prop_assert!(d.value <= chord + 1e-9);
    }

    #[test]
    fn descent_never_increases_discrete_length(verts in polyline(7)) {
        let f = builtin_metric("exp-conformal").unwrap();
        let start = discrete_length(&f, &verts).unwrap();
        let r = refine_polyline(&f, &verts, &DistanceConfig::default()).unwrap();
        prop_assert!(r.history[0] <= start);
        for w in r.history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn variational_distance_is_symmetric(a in point(), b in point(), c in point()) {
        let f = builtin_metric("abs-conformal").unwrap();
        let g = Curve::segment(&a, &b);
        let s = Curve::polyline(vec![a.clone(), c, b.clone()], None).unwrap();
        let d = EuclideanDistance;
        let quad = QuadratureConfig::continuous();
        let x = variational_distance(&f, &g, &s, &d, &quad).unwrap().value;
        let y = variational_distance(&f, &s, &g, &d, &quad).unwrap().value;
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x));
        prop_assert_eq!(variational_distance(&f, &g, &g, &d, &quad).unwrap().value, 0.0);
    }

    #[test]
    fn metric_derivative_matches_constant_speed(p in point(), q in point()) {
        prop_assume!(euclid(&p, &q) > 1e-3);
        let f = builtin_metric("diag-1-4").unwrap();
        let c = Curve::segment(&p, &q);
        let d = SolverDistance::new(&f, DistanceConfig::default());
        let v: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
        let speed = f.norm(&p, &v).unwrap();
        let md = metric_derivative(&d, &c, 0.37, &MetricDerivativeConfig::default()).unwrap();
        prop_assert!((md.value - speed).abs() <= 1e-9 * (1.0 + speed));
    }
}
