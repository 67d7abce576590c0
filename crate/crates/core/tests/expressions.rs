use contact_nh::expr::{parse, Expr, Func, Var};
use proptest::prelude::*;

const N: usize = 2;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (-4i32..5).prop_map(|k| k.to_string()),
        (1u32..40).prop_map(|k| format!("{}", k as f64 / 8.0)),
        prop::sample::select(vec!["q1", "q2", "p1", "p2", "z"]).prop_map(String::from),
    ]
}

/// Source text for expressions that are smooth and finite on the whole sampling box.
fn source() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} / (1 + ({b})^2)")),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(tanh({a}))")),
            inner.clone().prop_map(|a| format!("log(1 + ({a})^2)")),
            inner.prop_map(|a| format!("sqrt(2 + sin({a}))")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * N + 1)
}

fn var() -> impl Strategy<Value = Var> {
    (0..2 * N + 1).prop_map(|s| Var::from_slot(s, N))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn fd(e: &Expr, x: &[f64], v: Var) -> f64 {
    let h = 1e-6;
    let s = v.slot(N);
    let (mut up, mut down) = (x.to_vec(), x.to_vec());
    up[s] += h;
    down[s] -= h;
    (e.eval_at(N, &up).unwrap() - e.eval_at(N, &down).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_round_trips(src in source(), x in point()) {
        let e = parse(&src, N).unwrap();
        let printed = e.to_string();
        let again = parse(&printed, N).unwrap();
        prop_assert_eq!(again.to_string(), printed.clone());
        let (a, b) = (e.eval_at(N, &x).unwrap(), again.eval_at(N, &x).unwrap());
        prop_assert!(close(a, b, 1e-14), "{} vs {}", a, b);
    }

    #[test]
    fn derivative_matches_central_difference(src in source(), x in point(), v in var()) {
        let e = parse(&src, N).unwrap();
        let d = e.diff(v).eval_at(N, &x).unwrap();
        let f = fd(&e, &x, v);
        prop_assert!(close(d, f, 1e-5), "{}: {} vs {}", src, d, f);
    }

    #[test]
    fn derivative_is_linear(a in source(), b in source(), ca in -3.0..3.0f64, cb in -3.0..3.0f64, x in point(), v in var()) {
        let (ea, eb) = (parse(&a, N).unwrap(), parse(&b, N).unwrap());
        let combo = Expr::num(ca) * ea.clone() + Expr::num(cb) * eb.clone();
        let lhs = combo.diff(v).eval_at(N, &x).unwrap();
        let rhs = ca * ea.diff(v).eval_at(N, &x).unwrap() + cb * eb.diff(v).eval_at(N, &x).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn chain_rule(src in source(), x in point(), v in var()) {
        let e = parse(&src, N).unwrap();
        let outer = Expr::call(Func::Sin, e.clone());
        let lhs = outer.diff(v).eval_at(N, &x).unwrap();
        let rhs = e.eval_at(N, &x).unwrap().cos() * e.diff(v).eval_at(N, &x).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn mixed_partials_commute(src in source(), x in point(), u in var(), v in var()) {
        let e = parse(&src, N).unwrap();
        let uv = e.diff(u).diff(v).eval_at(N, &x).unwrap();
        let vu = e.diff(v).diff(u).eval_at(N, &x).unwrap();
        prop_assert!(close(uv, vu, 1e-9), "{} vs {}", uv, vu);
    }
}

#[test]
fn syntax_errors_carry_offsets() {
    let err = parse("q1 + * p1", N).unwrap_err();
    assert!(matches!(err, contact_nh::Error::Syntax { offset: 5, .. }), "{err:?}");
    let err = parse("q3", N).unwrap_err();
    assert!(matches!(err, contact_nh::Error::UnknownVariable { .. }), "{err:?}");
}
