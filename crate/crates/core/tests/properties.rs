//! Property tests for the invariants of each layer.

use std::sync::OnceLock;

use catlin_core::config::ExperimentConfig;
use catlin_core::geometry::{load_domain, sample_boundary, sample_collar, Domain};
use catlin_core::hyperbolicity::gromov_product;
use catlin_core::metric::{catlin_metric, DistanceEstimator, EstimatorConfig};
use catlin_core::normalization::{d_prime, d_prime_bisection, pseudodistance, tau};
use catlin_core::symbolic::{taylor_in_chart, AffineSubst, SymExpr, Var};
use catlin_core::{Complex64, C2};
use proptest::prelude::*;

const NAMES: [&str; 4] = ["ball", "egg2", "egg3", "egg2_perturbed"];

fn domains() -> &'static [Domain] {
    static D: OnceLock<Vec<Domain>> = OnceLock::new();
    D.get_or_init(|| NAMES.iter().map(|n| load_domain(n).unwrap()).collect())
}

fn c2(r: [f64; 4]) -> C2 {
    C2::from_real(r)
}

fn point(scale: f64) -> impl Strategy<Value = C2> {
    prop::array::uniform4(-scale..scale).prop_map(c2)
}

fn expr() -> impl Strategy<Value = SymExpr> {
    let leaf = prop_oneof![
        (0usize..4).prop_map(|i| SymExpr::var(Var::from_index(i))),
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| SymExpr::constant(Complex64::new(a, b))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner, 1i32..4).prop_map(|(a, n)| a.powi(n)),
        ]
    })
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wirtinger_is_linear_and_obeys_the_product_rule(a in expr(), b in expr(), v in 0usize..4, p in point(1.0)) {
        let var = Var::from_index(v);
        let sum = (a.clone() + b.clone()).wirtinger(var).eval(&p).unwrap();
        let parts = a.wirtinger(var).eval(&p).unwrap() + b.wirtinger(var).eval(&p).unwrap();
        prop_assert!(close(sum, parts, 1e-10), "{sum} vs {parts}");
        let prod = (a.clone() * b.clone()).wirtinger(var).eval(&p).unwrap();
        let rule = a.wirtinger(var).eval(&p).unwrap() * b.eval(&p).unwrap()
            + a.eval(&p).unwrap() * b.wirtinger(var).eval(&p).unwrap();
        prop_assert!(close(prod, rule, 1e-10), "{prod} vs {rule}");
    }

    #[test]
    fn defining_functions_are_real(k in 0usize..4, p in point(1.2)) {
        let im = domains()[k].spec.r.eval(&p).unwrap().im;
        prop_assert!(im.abs() < 1e-12, "{im}");
    }

    #[test]
    fn taylor_in_chart_reproduces_eval(
        k in 0usize..4,
        a in prop::array::uniform4(-1.0..1.0f64),
        b in point(0.8),
        w in point(0.1 / 2f64.sqrt()),
    ) {
        let r = &domains()[k].spec.r;
        let m = [[Complex64::new(a[0], a[1]), Complex64::new(0.2, 0.0)], [Complex64::new(-0.1, a[3]), Complex64::new(1.0, a[2])]];
        let s = AffineSubst { a: m, b: b.0 };
        prop_assume!(s.det().norm() > 0.1);
        let poly = taylor_in_chart(r, &s, 16).unwrap();
        let direct = r.eval(&s.apply(&w)).unwrap();
        prop_assert!(close(poly.eval(&w), direct, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normal_segments_keep_their_depth(k in 0usize..4, seed in any::<u64>(), s in 0.01..0.99f64) {
        let dom = &domains()[k];
        let p = sample_boundary(dom, 1, seed)[0];
        let n = dom.outward_normal(&p).unwrap();
        let t = s * dom.delta0().min(dom.eps0());
        let f = dom.foot(&(p - n * t)).unwrap();
        prop_assert!((f.distance - t).abs() < 1e-8, "{} vs {t}", f.distance);
        // projection is idempotent along the normal
        prop_assert!(f.point.dist(p) < 1e-8, "{}", f.point.dist(p));
    }

    #[test]
    fn signed_distance_is_one_lipschitz(k in 0usize..4, x in point(0.9), y in point(0.9)) {
        let dom = &domains()[k];
        let (rx, ry) = (dom.signed_distance(&x), dom.signed_distance(&y));
        prop_assume!(rx.is_ok() && ry.is_ok());
        prop_assert!((rx.unwrap() - ry.unwrap()).abs() <= x.dist(y) + 1e-9);
    }

    #[test]
    fn tau_scales_at_least_like_the_extreme_powers(k in 0usize..4, seed in any::<u64>(), c in 0.01..100.0f64) {
        let dom = &domains()[k];
        let z = sample_collar(dom, 1, (1e-4, 0.1), seed)[0];
        let chart = dom.chart(&z.point).unwrap();
        let d = z.delta;
        let e = if c > 1.0 { 0.5 } else { 1.0 / dom.m() as f64 };
        let (lhs, rhs) = (tau(&chart, c * d).unwrap(), c.powf(e) * tau(&chart, d).unwrap());
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn d_prime_matches_its_bisection_oracle(k in 0usize..4, seed in any::<u64>(), off in point(0.05)) {
        let dom = &domains()[k];
        let pts = sample_collar(dom, 1, (1e-4, 0.1), seed);
        let x = pts[0].point;
        let y = x + off;
        prop_assume!(dom.is_inside(&y));
        let chart = dom.chart(&x).unwrap();
        let a = d_prime(&chart, &y, dom.chart_radius()).unwrap();
        let b = d_prime_bisection(&chart, &y, dom.chart_radius()).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn pseudodistance_vanishes_only_on_the_diagonal(k in 0usize..4, seed in any::<u64>(), off in point(0.05)) {
        let dom = &domains()[k];
        let x = sample_collar(dom, 1, (1e-4, 0.1), seed)[0].point;
        prop_assert_eq!(pseudodistance(dom, &x, &x).unwrap().value, 0.0);
        let y = x + off;
        prop_assume!(y != x && dom.is_inside(&y));
        prop_assert!(pseudodistance(dom, &x, &y).unwrap().value > 0.0);
    }

    #[test]
    fn metric_is_a_norm_in_the_direction(k in 0usize..4, seed in any::<u64>(), x in point(1.0), y in point(1.0), s in -5.0..5.0f64) {
        let dom = &domains()[k];
        let z = sample_collar(dom, 1, (1e-4, 0.2), seed)[0].point;
        let f = |v: &C2| catlin_metric(dom, &z, v).unwrap();
        prop_assert!(f(&(x + y)) <= f(&x) + f(&y) + 1e-10);
        let scaled = f(&(x * s));
        prop_assert!((scaled - s.abs() * f(&x)).abs() <= 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn gromov_product_with_a_repeated_point_is_the_distance(x in point(1.0), y in point(1.0), w in point(1.0)) {
        let d = |a: &C2, b: &C2| a.dist(*b);
        prop_assert_eq!(gromov_product(d, &x, &x, &w), d(&x, &w));
        prop_assert_eq!(gromov_product(d, &x, &y, &w), gromov_product(d, &y, &x, &w));
    }

    #[test]
    fn config_text_round_trips(seed in any::<u64>(), lo in 1e-8..1e-3f64, n in 1usize..100_000, drift in 0.01..1.0f64) {
        let mut cfg = ExperimentConfig { seed, delta_range: (lo, 0.25), ..ExperimentConfig::default() };
        cfg.suites = vec![catlin_core::config::Suite::Lemma32, catlin_core::config::Suite::Visual];
        cfg.sizes.insert(catlin_core::config::Suite::Visual, n);
        cfg.tolerances.drift = drift;
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

proptest! {
    // each case runs the curve family, so keep the count small
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_are_symmetric_and_respect_the_collar_bound(k in 0usize..2, seed in any::<u64>()) {
        let dom = &domains()[k];
        let pts = sample_collar(dom, 2, (1e-4, 0.2), seed);
        let est = DistanceEstimator::new(dom, EstimatorConfig::light());
        let (x, y) = (pts[0], pts[1]);
        let a = est.estimate(&x.point, &y.point).unwrap();
        let b = est.estimate(&y.point, &x.point).unwrap();
        prop_assert_eq!(a.value, b.value);
        prop_assert!(a.value >= (y.delta / x.delta).ln().abs() - 1e-6);
    }
}
