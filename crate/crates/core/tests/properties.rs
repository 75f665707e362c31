//! Property tests for the expression layer: printing round-trips through the
//! parser, and simplification never changes values.

use proptest::prelude::*;
use warpsol_core::Expr;

/// Random expression trees over the full grammar, kept numerically gentle:
/// literals are small, exponents are small integers, and depth is bounded.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(|x| Expr::Lit((x * 8.0).round() / 8.0)),
        Just(Expr::Var),
        Just(Expr::Pi),
        Just(Expr::Euler),
    ];
    leaf.prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::neg(a)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
            (inner.clone(), 2u32..4)
                .prop_map(|(a, k)| Expr::Pow(a.into(), Box::new(Expr::Lit(k as f64)))),
            inner.clone().prop_map(Expr::exp),
            inner.clone().prop_map(Expr::log),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(Expr::cos),
            inner
                .clone()
                .prop_map(|a| Expr::call(warpsol_core::expr::Func::Tan, a)),
            inner.prop_map(Expr::sqrt),
        ]
    })
}

const PROBE_POINTS: [f64; 7] = [-1.7, -0.9, -0.3, 0.0, 0.4, 1.1, 1.9];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_preserves_values(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = Expr::parse(&printed).unwrap_or_else(|err| {
            panic!("printed form failed to parse: {printed:?}: {err}")
        });
        for &x in &PROBE_POINTS {
            match (e.evaluate(x), reparsed.evaluate(x)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "at {} for {}", x, printed),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "definedness changed at {}: {:?} vs {:?}", x, a, b),
            }
        }
    }

    #[test]
    fn simplify_preserves_values(e in arb_expr()) {
        let simplified = e.simplify();
        for &x in &PROBE_POINTS {
            if let Ok(v) = e.evaluate(x) {
                let w = simplified.evaluate(x).unwrap_or_else(|err| {
                    panic!("simplify lost definedness of {e:?} at {x}: {err}")
                });
                prop_assert!(
                    (v - w).abs() <= 1e-12 * (1.0 + v.abs()),
                    "{} vs {} at {} for {}",
                    v, w, x, e
                );
            }
        }
    }

    #[test]
    fn derivative_is_total(e in arb_expr()) {
        // Differentiation never panics and yields a printable tree.
        let d = e.differentiate();
        let _ = d.to_string();
    }
}
