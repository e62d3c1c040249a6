use std::collections::HashMap;

use proptest::prelude::*;

use sasaki_lab::bundle::{calibrated_metric, decompose_homogeneous_metric, symplectize};
use sasaki_lab::contact::{darboux_contact, is_contact_form};
use sasaki_lab::exprlang::{eval, eval_f64, parse, Expr, Func};
use sasaki_lab::manifold::{sample_chart, Atlas, Chart, SamplePlan};
use sasaki_lab::numkernel::{solve_linear, DScalar, DenseMatrix};
use sasaki_lab::report::{measure, Verdict};
use sasaki_lab::tensor::{
    add, lie_bracket, nijenhuis_on, scale, NijenhuisMode, Symmetry, TensorField, Valence,
};

fn cube() -> Atlas {
    Atlas::single("R3", Chart::new("R", &["x", "y", "z"], &[(-1.0, 1.0); 3]).unwrap())
}

fn field(v: Valence, sym: Symmetry, entries: &[(String, String)]) -> TensorField {
    let refs: Vec<(&str, &str)> = entries.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    TensorField::from_dsl("f", v, sym, &cube(), &[("R", &refs)]).unwrap()
}

/// A quadratic polynomial in `x, y, z` from ten coefficients.
fn quadratic(c: &[f64]) -> String {
    let m = ["1", "x", "y", "z", "x^2", "y^2", "z^2", "x*y", "x*z", "y*z"];
    c.iter().zip(m).map(|(c, m)| format!("{c:.4}*{m}")).collect::<Vec<_>>().join(" + ")
}

fn vector(c: &[f64]) -> TensorField {
    let e: Vec<(String, String)> =
        ["x", "y", "z"].iter().enumerate().map(|(i, k)| (k.to_string(), quadratic(&c[10 * i..10 * i + 10]))).collect();
    field(Valence::VECTOR, Symmetry::None, &e)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..1e6f64).prop_map(Expr::Num),
        (0u32..100).prop_map(|k| Expr::Num(k as f64)),
        prop::sample::select(vec!["x", "y", "s", "pi"]).prop_map(Expr::var),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Mul(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Div(b(a), b(c))),
            (inner.clone(), -3i32..5).prop_map(move |(a, k)| Expr::Pow(b(a), k)),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(move |(f, a)| Expr::Call(f, b(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn printing_then_parsing_is_identity(e in arb_expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_tangent_eval_matches_plain_eval(e in arb_expr(), x in -2.0..2.0f64, y in -2.0..2.0f64, s in 0.5..2.0f64) {
        let plain: HashMap<String, f64> = [("x", x), ("y", y), ("s", s)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let dual: HashMap<String, DScalar> = plain.iter().map(|(k, v)| (k.clone(), DScalar::constant(*v))).collect();
        match (eval_f64(&e, &plain), eval(&e, &dual)) {
            (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.value().to_bits() || (a.is_nan() && b.value().is_nan())),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b.map(|d| d.value())),
        }
    }

    #[test]
    fn zero_tangent_arithmetic_is_bitwise_plain(a in -10.0..10.0f64, b in 0.1..10.0f64) {
        let (da, db) = (DScalar::constant(a), DScalar::constant(b));
        prop_assert_eq!((da + db).value().to_bits(), (a + b).to_bits());
        prop_assert_eq!((da - db).value().to_bits(), (a - b).to_bits());
        prop_assert_eq!((da * db).value().to_bits(), (a * b).to_bits());
        prop_assert_eq!((da / db).value().to_bits(), (a / b).to_bits());
        // sin and cos may be fused into one sincos call, which can differ by an ulp
        prop_assert!((da.sin().value() - a.sin()).abs() <= 2.0 * f64::EPSILON);
        prop_assert_eq!(da.exp().value().to_bits(), a.exp().to_bits());
    }

    #[test]
    fn tangents_are_linear(x in -1.0..1.0f64, al in -3.0..3.0f64, be in -3.0..3.0f64) {
        // d f(x)[αu + βv] = α df[u] + β df[v] for f = sin(x)·exp(x)
        let f = |v: DScalar| v.sin() * v.exp();
        let mut v = DScalar::constant(x);
        v.perturb(0, al).unwrap();
        let combined = f(v).coeff(1);
        let unit = f(DScalar::variable(x, 0).unwrap()).coeff(1);
        prop_assert!((combined - al * unit).abs() <= 1e-12 * (1.0 + combined.abs()));
        let mut w = DScalar::constant(x);
        w.perturb(0, al + be).unwrap();
        prop_assert!((f(w).coeff(1) - (al + be) * unit).abs() <= 1e-12 * (1.0 + unit.abs() * (al + be).abs()));
    }

    #[test]
    fn polynomial_derivatives_are_exact(c in prop::collection::vec(-5.0..5.0f64, 5), x in -2.0..2.0f64) {
        let v = DScalar::variable(x, 0).unwrap();
        let p = c.iter().rev().fold(DScalar::constant(0.0), |acc, &ck| acc * v + DScalar::constant(ck));
        let want: f64 = (1..5).map(|k| k as f64 * c[k] * x.powi(k as i32 - 1)).sum();
        prop_assert!((p.coeff(1) - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn solve_reproduces_right_hand_side(a in prop::collection::vec(-1.0..1.0f64, 36), b in prop::collection::vec(-5.0..5.0f64, 6)) {
        // diagonal dominance keeps the condition number small
        let mut m = a.clone();
        for i in 0..6 {
            m[i * 6 + i] += 7.0;
        }
        let mat = DenseMatrix::from_f64(6, 6, &m).unwrap();
        let rhs: Vec<DScalar> = b.iter().map(|&v| DScalar::constant(v)).collect();
        let x = solve_linear(&mat, &rhs).unwrap();
        let back = mat.matvec(&x).unwrap();
        let scale = max_abs(&b).max(1e-300);
        for (u, v) in back.iter().zip(&b) {
            prop_assert!((u.value() - v).abs() <= 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), count in 1usize..40) {
        let chart = Chart::new("B", &["x", "s"], &[(0.0, 1.0), (-2.0, 2.0)]).unwrap().exclude("s", -0.5, 0.5).unwrap();
        let plan = SamplePlan::new(seed, count);
        let a = sample_chart(&chart, &plan).unwrap();
        prop_assert_eq!(&a, &sample_chart(&chart, &plan).unwrap());
        prop_assert_eq!(a.len(), count);
        for p in &a {
            prop_assert!(chart.contains(p) && p[1].abs() >= 0.5);
        }
    }

    #[test]
    fn verdict_tracks_tolerance_and_witness_tracks_failure(
        r in prop::collection::vec(0.0..1.0f64, 1..30),
        tol in 0.0..1.0f64,
    ) {
        let pts: Vec<(String, Vec<f64>)> = (0..r.len()).map(|i| ("R".to_string(), vec![i as f64])).collect();
        let m = measure(pts, |_, x| Ok(vec![r[x[0] as usize]]));
        let rep = m.report("prop", &SamplePlan::default(), &[0], tol, None);
        let worst = r.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(rep.max_residual, worst);
        prop_assert_eq!(rep.verdict == Verdict::Pass, worst <= tol);
        prop_assert_eq!(rep.witness.is_some(), rep.verdict == Verdict::Fail);
    }

    #[test]
    fn action_is_a_homomorphism(nu in 0.3..3.0f64, mu in -3.0..-0.3f64, x in -1.0..1.0f64, s in 0.5..2.0f64) {
        let c = darboux_contact(1).unwrap();
        let (b, _) = symplectize(&c, 3, false).unwrap();
        let p = sasaki_lab::manifold::Point::new("R", &[x, 0.2, -0.1, s]);
        let two = b.action(nu).apply_point(&b.action(mu).apply_point(&p).unwrap()).unwrap();
        let one = b.action(nu * mu).apply_point(&p).unwrap();
        for (u, v) in two.coords.iter().zip(&one.coords) {
            prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn conformal_rescaling_keeps_contact(c in -0.6..0.6f64, k in 0.5..3.0f64) {
        let con = darboux_contact(1).unwrap();
        let f = TensorField::from_dsl("f", Valence::SCALAR, Symmetry::None, &con.atlas, &[("R", &[("", &format!("1 + {c}*sin({k}*x)") as &str)])]).unwrap();
        let feta = scale(&f, &con.eta).unwrap();
        prop_assert!(is_contact_form(&feta, &con.atlas, &SamplePlan::new(1, 16)).unwrap().passed());
    }

    #[test]
    fn declared_symmetry_holds(c in prop::collection::vec(-2.0..2.0f64, 60)) {
        let keys = ["x x", "x y", "x z", "y y", "y z", "z z"];
        let e: Vec<(String, String)> =
            keys.iter().enumerate().map(|(i, k)| (k.to_string(), quadratic(&c[10 * i..10 * i + 10]))).collect();
        let off: Vec<(String, String)> = e.iter().filter(|(k, _)| k.as_bytes()[0] != k.as_bytes()[2]).cloned().collect();
        let sym = field(Valence::BILINEAR, Symmetry::Symmetric, &e);
        let anti = field(Valence::BILINEAR, Symmetry::Antisymmetric, &off);
        for x in [[0.1, -0.4, 0.7], [-0.9, 0.3, 0.0]] {
            prop_assert!(sym.symmetry_residual("R", &x).unwrap() <= 1e-10);
            prop_assert!(anti.symmetry_residual("R", &x).unwrap() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn jacobi_identity_on_polynomial_fields(c in prop::collection::vec(-1.0..1.0f64, 90)) {
        let (x, y, z) = (vector(&c[..30]), vector(&c[30..60]), vector(&c[60..]));
        let a = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap();
        let b = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap();
        let d = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap();
        let sum = add(&add(&a, &b).unwrap(), &d).unwrap();
        for p in cube().sample_points(&SamplePlan::new(2, 8)).unwrap() {
            prop_assert!(max_abs(&sum.eval_f64("R", &p.coords).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn nijenhuis_is_antisymmetric_and_tensorial(c in prop::collection::vec(-0.5..0.5f64, 70)) {
        let keys = ["x x", "x y", "y x", "y y", "z z", "x z", "z y"];
        let e: Vec<(String, String)> = keys.iter().enumerate().map(|(i, k)| (k.to_string(), quadratic(&c[10 * i..10 * i + 10]))).collect();
        let j = field(Valence::ENDO, Symmetry::None, &e);
        let (x, y) = (vector(&c[..30]), vector(&c[30..60]));
        let f = field(Valence::SCALAR, Symmetry::None, &[("".into(), "1 + x*y - z^2".into())]);
        let fx = scale(&f, &x).unwrap();
        for mode in [NijenhuisMode::Torsion, NijenhuisMode::Complex] {
            let nxy = nijenhuis_on(&j, &x, &y, mode).unwrap();
            let nyx = nijenhuis_on(&j, &y, &x, mode).unwrap();
            let nfxy = nijenhuis_on(&j, &fx, &y, mode).unwrap();
            for p in cube().sample_points(&SamplePlan::new(3, 6)).unwrap() {
                let (u, v, w) = (nxy.eval_f64("R", &p.coords).unwrap(), nyx.eval_f64("R", &p.coords).unwrap(), nfxy.eval_f64("R", &p.coords).unwrap());
                let fv = f.eval_f64("R", &p.coords).unwrap()[0];
                let scale = max_abs(&u).max(1.0);
                prop_assert!(u.iter().zip(&v).all(|(a, b)| (a + b).abs() <= 1e-9 * scale));
                if mode == NijenhuisMode::Torsion {
                    prop_assert!(u.iter().zip(&w).all(|(a, b)| (fv * a - b).abs() <= 1e-9 * scale * fv.abs().max(1.0)));
                }
            }
        }
    }

    #[test]
    fn shadow_is_recovered_from_any_calibrated_metric(c in prop::collection::vec(-0.01..0.01f64, 60)) {
        let con = darboux_contact(1).unwrap();
        let (b, _) = symplectize(&con, 3, false).unwrap();
        let m = ["1", "x", "p", "z", "x^2", "p^2", "z^2", "x*p", "x*z", "p*z"];
        let base = [("x x", "1 + p^2"), ("x z", "-p"), ("z z", "1"), ("p p", "1"), ("x p", "0"), ("p z", "0")];
        let entries: Vec<(String, String)> = base
            .iter()
            .enumerate()
            .map(|(i, (k, e))| {
                let poly: Vec<String> = m.iter().zip(&c[10 * i..]).map(|(m, c)| format!("{c:.6}*{m}")).collect();
                (k.to_string(), format!("{e} + {}", poly.join(" + ")))
            })
            .collect();
        let refs: Vec<(&str, &str)> = entries.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let gm = TensorField::from_dsl("g_M", Valence::BILINEAR, Symmetry::Symmetric, &con.atlas, &[("R", &refs)]).unwrap();
        let cal = b.normal_calibration();
        let g = calibrated_metric(&gm, &cal, &b).unwrap();
        let plan = SamplePlan::new(4, 8);
        let dec = decompose_homogeneous_metric(&g, &cal, &b, &plan).unwrap();
        let lifted = b.lift(&gm).unwrap();
        for p in b.atlas.sample_points(&plan).unwrap() {
            prop_assert!((dec.a.eval_f64(&p.chart, &p.coords).unwrap()[0] - 1.0).abs() <= 1e-9);
            prop_assert!(max_abs(&dec.mu.eval_f64(&p.chart, &p.coords).unwrap()) <= 1e-9);
            let (u, v) = (dec.gm.eval_f64(&p.chart, &p.coords).unwrap(), lifted.eval_f64(&p.chart, &p.coords).unwrap());
            prop_assert!(u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-9));
        }
    }
}
