use horizon_core::expr::{self, parse, Expr, Func, Var};
use proptest::prelude::*;

const NAMES: [&str; 2] = ["u", "v"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-4i32..5).prop_map(|c| Expr::constant(c as f64)),
        (-3.0..3.0f64).prop_map(Expr::constant),
        Just(Expr::time()),
        (0usize..2).prop_map(Expr::state),
    ]
}

/// Trees built only from operations that are smooth everywhere.
fn smooth() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| expr::mul(a, b)),
            inner.clone().prop_map(expr::neg),
            (inner.clone(), 0u32..4).prop_map(|(a, p)| expr::pow(a, p as f64)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| expr::div(a, expr::add(Expr::constant(1.0), expr::pow(b, 2.0)))),
            (inner.clone(), prop::sample::select(vec![Func::Sin, Func::Cos])).prop_map(|(a, f)| expr::call(f, a)),
            inner.prop_map(|a| expr::call(Func::Exp, expr::call(Func::Sin, a))),
        ]
    })
}

/// Anything the printer can emit, including partial functions.
fn any_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), prop_oneof![(-3i32..6).prop_map(f64::from), (-2.0..3.0f64)])
                .prop_map(|(a, p)| Expr::Pow(Box::new(a), p)),
            (inner, prop::sample::select(Func::ALL.to_vec())).prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn derivative_matches_finite_differences(
        e in smooth(),
        t in -2.0..2.0f64,
        x in prop::collection::vec(-2.0..2.0f64, 2),
        wrt in prop_oneof![Just(Var::Time), Just(Var::State(0)), Just(Var::State(1))],
    ) {
        let d = e.diff(wrt).eval(t, &x).unwrap();
        let h = 1e-5;
        let at = |s: f64| match wrt {
            Var::Time => e.eval(t + s, &x).unwrap(),
            Var::State(i) => {
                let mut y = x.clone();
                y[i] += s;
                e.eval(t, &y).unwrap()
            }
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assume!(d.is_finite() && fd.is_finite() && d.abs() < 1e6);
        prop_assert!(close(d, fd, 1e-4), "{} : {d} vs {fd}", e.display(&NAMES));
    }

    #[test]
    fn print_then_parse_is_identity(
        e in any_expr(),
        t in -2.0..2.0f64,
        x in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let text = e.display(&NAMES).to_string();
        let canon = parse(&text, &NAMES).unwrap();
        let again = parse(&canon.display(&NAMES).to_string(), &NAMES).unwrap();
        prop_assert_eq!(&again, &canon, "{}", text);
        match (e.eval(t, &x), canon.eval(t, &x)) {
            (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{text}: {a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn domain_errors_are_reported() {
    let sqrt = parse("sqrt(u)", &NAMES).unwrap();
    assert!(sqrt.eval(0.0, &[-1.0, 0.0]).is_err());
    let frac = parse("u^(1/2)", &NAMES).unwrap();
    assert!(frac.eval(0.0, &[-1.0, 0.0]).is_err());
    let int = parse("u^3", &NAMES).unwrap();
    assert_eq!(int.eval(0.0, &[-2.0, 0.0]).unwrap(), -8.0);
}
